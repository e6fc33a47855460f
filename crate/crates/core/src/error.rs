use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("root iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("value is not an eigenvalue: residual {residual:e} exceeds {tolerance:e}")]
    NotAnEigenvalue { residual: f64, tolerance: f64 },

    #[error("sweep trace has {0} frames, at least 3 are required")]
    ShortTrace(usize),

    #[error("both real and imaginary differences flip for pair {pair:?}; the sweep stepped over an EP, refine it")]
    InconsistentTrace { pair: (usize, usize) },

    #[error("no EP bracket: both deltas classify as {0}")]
    NoEpBracket(String),

    #[error("refinement drifted {distance:.3e} from its seed (limit {limit})")]
    DriftedSeed { distance: f64, limit: f64 },

    #[error("Newton refinement diverged after {} iterates", trace.len())]
    Diverged { trace: Vec<(f64, f64, f64)> },

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("step bisection exhausted near theta = {theta:.6}; the path passes through an EP, perturb the contour")]
    BisectionExhausted { theta: f64 },

    #[error("final eigenvalues do not map bijectively onto the initial ones")]
    NonBijective,

    #[error("zero overlap between consecutive eigenvectors at index {index}; refine the trajectory")]
    StaleTrajectory { index: usize },
}
