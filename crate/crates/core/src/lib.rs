//! Spectral analysis of a three-level non-Hermitian Hamiltonian
//! `H = H0 + λ Hp` with two second-order exceptional points (EP2s) whose
//! joint encirclement produces a third-order (EP3) cascade.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: configuration, the Hamiltonian and its secular polynomial.
//! * [`solver`]: Cardano eigenvalues, a Durand–Kerner oracle, the
//!   coalescence discriminant and right eigenvectors.
//! * [`branch`]: continuity matching and three-element permutations.
//! * [`arc`]: λ sweeps and avoided-resonance-crossing classification.
//! * [`eplocate`]: grid scan and Newton refinement of discriminant zeros.
//! * [`encircle`]: elliptical contours, monodromy and conversion events.
//! * [`phase`]: parallel-transport phases along a loop and phase switches.

pub mod arc;
pub mod branch;
pub mod encircle;
pub mod eplocate;
pub mod error;
pub mod model;
pub mod phase;
pub mod solver;

pub use branch::Permutation3;
pub use error::{Error, Result};
pub use model::{ControlPoint, LambdaImPolicy, SecularCoeffs, SystemConfig, C64};
pub use solver::EigenFrame;
