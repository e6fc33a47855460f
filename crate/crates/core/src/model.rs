//! System configuration, the three-level Hamiltonian `H0 + λ Hp` and its
//! secular (characteristic) polynomial.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = [[C64; 3]; 3];
pub type Vec3 = [C64; 3];

/// Passive spectrum and fixed couplings.
///
/// The complex passive eigenvalues are `eps[j] + i tau[j]`; the sign of the
/// imaginary part is taken as written, without any decay-convention flip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub eps: [f64; 3],
    pub tau: [f64; 3],
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            eps: [0.76, 0.65, 0.3],
            tau: [0.005, 0.0025, 0.0002],
            gamma: 0.95,
            kappa: 0.3,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    passive: PassiveSection,
    coupling: CouplingSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PassiveSection {
    eps: [f64; 3],
    tau: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSection {
    gamma: f64,
    kappa: f64,
}

impl SystemConfig {
    /// Complex passive eigenvalues `eps_j + i tau_j`.
    pub fn passive(&self) -> [C64; 3] {
        [0, 1, 2].map(|j| C64::new(self.eps[j], self.tau[j]))
    }

    /// Parses the `[passive]` / `[coupling]` TOML layout documented in
    /// `docs/config.md`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = Self {
            eps: file.passive.eps,
            tau: file.passive.tau,
            gamma: file.coupling.gamma,
            kappa: file.coupling.kappa,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        format!(
            "[passive]\neps = [{}, {}, {}]\ntau = [{}, {}, {}]\n\n[coupling]\ngamma = {}\nkappa = {}\n",
            self.eps[0],
            self.eps[1],
            self.eps[2],
            self.tau[0],
            self.tau[1],
            self.tau[2],
            self.gamma,
            self.kappa
        )
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.eps.iter().chain(&self.tau).chain([&self.gamma, &self.kappa]);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::Config("all parameters must be finite".into()));
        }
        if self.tau.iter().any(|&t| t < 0.0) {
            return Err(Error::Config("decay rates must be non-negative".into()));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if self.eps[i] == self.eps[j] {
                    return Err(Error::Config(format!("eps[{i}] and eps[{j}] coincide")));
                }
            }
        }
        if self.gamma == self.kappa {
            return Err(Error::Config("gamma equals kappa; the delta control degenerates".into()));
        }
        Ok(())
    }
}

/// Live parameters `(δ, λ_R, λ_I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub delta: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
}

impl ControlPoint {
    pub fn new(delta: f64, lambda_re: f64, lambda_im: f64) -> Self {
        Self { delta, lambda_re, lambda_im }
    }

    pub fn lambda(&self) -> C64 {
        C64::new(self.lambda_re, self.lambda_im)
    }

    pub fn is_finite(&self) -> bool {
        self.delta.is_finite() && self.lambda_re.is_finite() && self.lambda_im.is_finite()
    }
}

/// Linear rule `λ_I = scale · λ_R + offset` tying the imaginary part of λ to
/// its real part during sweeps and encirclements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaImPolicy {
    pub scale: f64,
    pub offset: f64,
}

impl Default for LambdaImPolicy {
    fn default() -> Self {
        Self { scale: 1.0, offset: 0.0 }
    }
}

impl LambdaImPolicy {
    pub fn lambda_im(&self, lambda_re: f64) -> f64 {
        self.scale * lambda_re + self.offset
    }

    pub fn point(&self, delta: f64, lambda_re: f64) -> ControlPoint {
        ControlPoint::new(delta, lambda_re, self.lambda_im(lambda_re))
    }
}

/// Coefficients of `E³ + a1 E² + a2 E + a3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecularCoeffs {
    pub a1: C64,
    pub a2: C64,
    pub a3: C64,
}

impl SecularCoeffs {
    pub fn new(a1: C64, a2: C64, a3: C64) -> Self {
        Self { a1, a2, a3 }
    }

    pub fn from_real(a1: f64, a2: f64, a3: f64) -> Self {
        Self::new(a1.into(), a2.into(), a3.into())
    }

    /// Monic cubic with the given roots.
    pub fn from_roots(r: [C64; 3]) -> Self {
        Self {
            a1: -(r[0] + r[1] + r[2]),
            a2: r[0] * r[1] + r[1] * r[2] + r[2] * r[0],
            a3: -(r[0] * r[1] * r[2]),
        }
    }

    pub fn eval(&self, e: C64) -> C64 {
        ((e + self.a1) * e + self.a2) * e + self.a3
    }

    pub fn derivative(&self, e: C64) -> C64 {
        (3.0 * e + 2.0 * self.a1) * e + self.a2
    }

    pub fn is_finite(&self) -> bool {
        [self.a1, self.a2, self.a3].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest coefficient magnitude, floored at one. Used to scale tolerances.
    pub fn scale(&self) -> f64 {
        1f64.max(self.a1.norm()).max(self.a2.norm()).max(self.a3.norm())
    }
}

pub fn build_hamiltonian(cfg: &SystemConfig, p: &ControlPoint) -> Mat3 {
    let zero = C64::new(0.0, 0.0);
    let l = p.lambda();
    let e = cfg.passive();
    [
        [e[0], l * (p.delta - cfg.gamma), zero],
        [l * cfg.kappa, e[1], l * cfg.gamma],
        [zero, l * (p.delta - cfg.kappa), e[2]],
    ]
}

/// Closed-form secular coefficients of the Hamiltonian at `p`.
pub fn secular_coefficients(cfg: &SystemConfig, p: &ControlPoint) -> SecularCoeffs {
    let [e1, e2, e3] = cfg.passive();
    let l2 = p.lambda() * p.lambda();
    let g = cfg.gamma;
    let k = cfg.kappa;
    let d = p.delta;
    SecularCoeffs {
        a1: -(e1 + e2 + e3),
        a2: e1 * e2 + e2 * e3 + e3 * e1 - l2 * (g * (d - k) + k * (d - g)),
        a3: -(e1 * e2 * e3) + l2 * (g * (d - k) * e1 + k * (d - g) * e3),
    }
}

/// Characteristic polynomial `det(E·I − H)` of a general 3×3 matrix via its
/// trace, principal minors and determinant.
pub fn characteristic_coefficients(h: &Mat3) -> SecularCoeffs {
    let trace = h[0][0] + h[1][1] + h[2][2];
    let minors = h[0][0] * h[1][1] - h[0][1] * h[1][0] + h[0][0] * h[2][2] - h[0][2] * h[2][0]
        + h[1][1] * h[2][2]
        - h[1][2] * h[2][1];
    SecularCoeffs { a1: -trace, a2: minors, a3: -determinant(h) }
}

pub fn determinant(h: &Mat3) -> C64 {
    h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
        - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
}

pub fn trace(h: &Mat3) -> C64 {
    h[0][0] + h[1][1] + h[2][2]
}

/// Control parameters and exceptional-point count for `m` mutually
/// interacting states: `((m² + m − 2)/2, m(m − 1)/2)`.
pub fn parameter_budget(m: u32) -> Result<(u64, u64)> {
    if m < 2 {
        return Err(Error::Domain(format!("parameter budget needs m >= 2, got {m}")));
    }
    let m = u64::from(m);
    Ok(((m * m + m - 2) / 2, m * (m - 1) / 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn unperturbed_matrix_is_diagonal() {
        let cfg = SystemConfig::default();
        let h = build_hamiltonian(&cfg, &ControlPoint::new(0.37, 0.0, 0.0));
        assert_eq!(h[0][0], c(0.76, 0.005));
        assert_eq!(h[1][1], c(0.65, 0.0025));
        assert_eq!(h[2][2], c(0.3, 0.0002));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(h[i][j], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn delta_equal_gamma_kills_upper_coupling() {
        let cfg = SystemConfig::default();
        let h = build_hamiltonian(&cfg, &ControlPoint::new(0.95, 1.0, 0.0));
        assert_eq!(h[0][1], c(0.0, 0.0));
        assert_eq!(h[1][0], c(0.3, 0.0));
    }

    #[test]
    fn trace_matches_passive_sum() {
        let cfg = SystemConfig::default();
        let h = build_hamiltonian(&cfg, &ControlPoint::new(0.22, 0.45, 0.45));
        let t = trace(&h);
        assert!((t - c(1.71, 0.0077)).norm() < 1e-15);
    }

    #[test]
    fn entries_follow_layout() {
        let cfg = SystemConfig::default();
        let p = ControlPoint::new(0.4, 0.3, -0.2);
        let l = p.lambda();
        let h = build_hamiltonian(&cfg, &p);
        assert_eq!(h[0][1], l * (0.4 - 0.95));
        assert_eq!(h[1][0], l * 0.3);
        assert_eq!(h[1][2], l * 0.95);
        assert_eq!(h[2][1], l * (0.4 - 0.3));
        assert_eq!(h[0][2], c(0.0, 0.0));
        assert_eq!(h[2][0], c(0.0, 0.0));
    }

    #[test]
    fn zero_lambda_coefficients_are_symmetric_functions() {
        let cfg = SystemConfig::default();
        let [e1, e2, e3] = cfg.passive();
        let s = secular_coefficients(&cfg, &ControlPoint::new(1.1, 0.0, 0.0));
        assert_eq!(s.a1, -(e1 + e2 + e3));
        assert!((s.a2 - (e1 * e2 + e2 * e3 + e3 * e1)).norm() < 1e-16);
        assert!((s.a3 + e1 * e2 * e3).norm() < 1e-16);
    }

    #[test]
    fn equal_couplings_give_symmetric_bracket() {
        let cfg = SystemConfig { gamma: 0.4, kappa: 0.4, ..SystemConfig::default() };
        let p = ControlPoint::new(0.9, 0.3, 0.1);
        let base = secular_coefficients(&cfg, &ControlPoint::new(0.9, 0.0, 0.0));
        let s = secular_coefficients(&cfg, &p);
        let l2 = p.lambda() * p.lambda();
        let bracket = (base.a2 - s.a2) / l2;
        assert!((bracket - c(2.0 * 0.4 * (0.9 - 0.4), 0.0)).norm() < 1e-14);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn closed_form_matches_matrix_minors() {
        let cfg = SystemConfig::default();
        let p = ControlPoint::new(0.22, 0.45, 0.45);
        let a = secular_coefficients(&cfg, &p);
        let b = characteristic_coefficients(&build_hamiltonian(&cfg, &p));
        assert!((a.a1 - b.a1).norm() < 1e-14);
        assert!((a.a2 - b.a2).norm() < 1e-14);
        assert!((a.a3 - b.a3).norm() < 1e-14);
    }

    #[test]
    fn budget_values() {
        assert_eq!(parameter_budget(3).unwrap(), (5, 3));
        assert_eq!(parameter_budget(2).unwrap(), (2, 1));
        assert_eq!(parameter_budget(4).unwrap(), (9, 6));
        assert!(parameter_budget(1).is_err());
        assert!(parameter_budget(0).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SystemConfig::default();
        let parsed = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn config_rejects_bad_files() {
        assert!(SystemConfig::from_toml_str("[passive]\neps=[1,2,3]\n").is_err());
        let dup = "[passive]\neps=[0.5,0.5,0.1]\ntau=[0.0,0.0,0.0]\n[coupling]\ngamma=1.0\nkappa=0.2\n";
        assert!(SystemConfig::from_toml_str(dup).is_err());
        let extra = "[passive]\neps=[0.7,0.5,0.1]\ntau=[0.0,0.0,0.0]\nfoo=1\n[coupling]\ngamma=1.0\nkappa=0.2\n";
        assert!(SystemConfig::from_toml_str(extra).is_err());
    }
}
