//! λ sweeps at fixed δ and avoided-resonance-crossing (ARC) classification.

use std::fmt;

use serde::Serialize;

use crate::branch::match_branches;
use crate::error::{Error, Result};
use crate::model::{ControlPoint, LambdaImPolicy, SystemConfig};
use crate::solver::{eigen_frame, EigenFrame};

/// Sign flips only count inside the samples around the closest approach
/// whose gap is at most this multiple of the minimum gap.
pub const INTERACTION_WINDOW_FACTOR: f64 = 2.0;

/// A pair interacts only if its closest approach is below this fraction of
/// its separation at the start of the sweep.
pub const INTERACTION_DIP: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub delta: f64,
    pub lambda_re_start: f64,
    pub lambda_re_end: f64,
    /// Number of frames, endpoints included.
    pub steps: usize,
    pub policy: LambdaImPolicy,
}

impl SweepSpec {
    /// `λ_R ∈ [0, 0.6]` with `λ_I = λ_R`.
    pub fn standard(delta: f64, steps: usize) -> Self {
        Self { delta, lambda_re_start: 0.0, lambda_re_end: 0.6, steps, policy: LambdaImPolicy::default() }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.lambda_re_start, self.lambda_re_end]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("sweep bounds must be finite".into()));
        }
        if self.lambda_re_start > self.lambda_re_end {
            return Err(Error::Domain("sweep start exceeds end".into()));
        }
        if self.lambda_re_start < self.lambda_re_end && self.steps < 2 {
            return Err(Error::Domain("a sweep needs at least 2 steps".into()));
        }
        Ok(())
    }

    pub fn lambda_values(&self) -> Vec<f64> {
        if self.lambda_re_start == self.lambda_re_end {
            return vec![self.lambda_re_start];
        }
        let h = (self.lambda_re_end - self.lambda_re_start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.lambda_re_start + h * k as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcFrame {
    pub point: ControlPoint,
    /// Branch-ordered eigenvalues: `frame.values[b]` is branch `b + 1`.
    pub frame: EigenFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchWarning {
    pub index: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcTrace {
    pub spec: SweepSpec,
    pub frames: Vec<ArcFrame>,
    pub warnings: Vec<MatchWarning>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ArcKind {
    #[serde(rename = "ReCross_ImAnti")]
    ReCrossImAnti,
    #[serde(rename = "ReAnti_ImCross")]
    ReAntiImCross,
    NoInteraction,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcKind::ReCrossImAnti => "ReCross_ImAnti",
            ArcKind::ReAntiImCross => "ReAnti_ImCross",
            ArcKind::NoInteraction => "NoInteraction",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcClass {
    /// One-based branch labels, ascending.
    pub pair: (usize, usize),
    pub kind: ArcKind,
    /// λ_R where the crossing part changes sign.
    pub crossing_lambda: Option<f64>,
}

/// Tracks the three eigenvalues along the sweep. The first frame is labelled
/// by descending real part; later frames follow by minimum-cost matching.
pub fn sweep(cfg: &SystemConfig, spec: &SweepSpec) -> Result<ArcTrace> {
    spec.validate()?;
    let mut frames: Vec<ArcFrame> = Vec::with_capacity(spec.steps);
    let mut warnings = Vec::new();
    for (index, lr) in spec.lambda_values().into_iter().enumerate() {
        let point = spec.policy.point(spec.delta, lr);
        let raw = eigen_frame(cfg, &point, false)?;
        let mut frame = match frames.last() {
            None => raw.reordered(raw.order_by_re_desc()),
            Some(prev) => {
                let m = match_branches(&prev.frame.values, &raw.values);
                if m.ambiguous {
                    warnings.push(MatchWarning { index, cost: m.cost });
                }
                raw.reordered(m.order)
            }
        };
        frame.labels = [1, 2, 3];
        frames.push(ArcFrame { point, frame });
    }
    Ok(ArcTrace { spec: *spec, frames, warnings })
}

fn check_pair(pair: (usize, usize)) -> Result<(usize, usize)> {
    let (a, b) = (pair.0.min(pair.1), pair.0.max(pair.1));
    if a == 0 || b > 3 || a == b {
        return Err(Error::Domain(format!("invalid branch pair {pair:?}")));
    }
    Ok((a, b))
}

fn interpolate_zero(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if y0 == y1 {
        x0
    } else {
        x0 + (x1 - x0) * y0 / (y0 - y1)
    }
}

fn first_sign_change(diff: &[f64], lo: usize, hi: usize) -> Option<usize> {
    (lo..hi).find(|&k| (diff[k] >= 0.0) != (diff[k + 1] >= 0.0))
}

/// Classifies one branch pair from the sign behaviour of its real and
/// imaginary differences inside the interaction window.
pub fn classify(trace: &ArcTrace, pair: (usize, usize)) -> Result<ArcClass> {
    let (a, b) = check_pair(pair)?;
    let n = trace.frames.len();
    if n < 3 {
        return Err(Error::ShortTrace(n));
    }
    let (i, j) = (a - 1, b - 1);
    let diff: Vec<_> = trace.frames.iter().map(|f| f.frame.values[i] - f.frame.values[j]).collect();
    let gap: Vec<f64> = diff.iter().map(|d| d.norm()).collect();
    let lam: Vec<f64> = trace.frames.iter().map(|f| f.point.lambda_re).collect();
    let none = ArcClass { pair: (a, b), kind: ArcKind::NoInteraction, crossing_lambda: None };

    let kmin = (0..n).min_by(|&x, &y| gap[x].partial_cmp(&gap[y]).unwrap()).unwrap();
    if kmin == 0 || kmin == n - 1 || gap[kmin] > INTERACTION_DIP * gap[0] {
        return Ok(none);
    }
    let limit = INTERACTION_WINDOW_FACTOR * gap[kmin];
    let mut lo = kmin - 1;
    while lo > 0 && gap[lo - 1] <= limit {
        lo -= 1;
    }
    let mut hi = kmin + 1;
    while hi < n - 1 && gap[hi + 1] <= limit {
        hi += 1;
    }

    let re: Vec<f64> = diff.iter().map(|d| d.re).collect();
    let im: Vec<f64> = diff.iter().map(|d| d.im).collect();
    let flips = |d: &[f64]| (d[lo] >= 0.0) != (d[hi] >= 0.0);
    let locate = |d: &[f64]| {
        first_sign_change(d, lo, hi).map(|k| interpolate_zero(lam[k], lam[k + 1], d[k], d[k + 1]))
    };
    match (flips(&re), flips(&im)) {
        (true, true) => Err(Error::InconsistentTrace { pair: (a, b) }),
        (false, false) => Ok(none),
        (true, false) => Ok(ArcClass { pair: (a, b), kind: ArcKind::ReCrossImAnti, crossing_lambda: locate(&re) }),
        (false, true) => Ok(ArcClass { pair: (a, b), kind: ArcKind::ReAntiImCross, crossing_lambda: locate(&im) }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossingAverage {
    pub delta_mid: f64,
    pub lambda_estimate: f64,
    pub below: ArcClass,
    pub above: ArcClass,
}

/// Coarse EP2 estimate from two δ values whose ARCs have opposite topology:
/// the mid δ and the mean of the two crossing positions.
pub fn crossing_average(
    cfg: &SystemConfig,
    delta_below: f64,
    delta_above: f64,
    template: &SweepSpec,
    pair: (usize, usize),
) -> Result<CrossingAverage> {
    let run = |delta| -> Result<ArcClass> {
        let spec = SweepSpec { delta, ..*template };
        classify(&sweep(cfg, &spec)?, pair)
    };
    let below = run(delta_below)?;
    let above = run(delta_above)?;
    let opposite = below.kind != above.kind
        && below.kind != ArcKind::NoInteraction
        && above.kind != ArcKind::NoInteraction;
    if !opposite {
        return Err(Error::NoEpBracket(format!("{} / {}", below.kind, above.kind)));
    }
    let (Some(l0), Some(l1)) = (below.crossing_lambda, above.crossing_lambda) else {
        return Err(Error::NoEpBracket("crossing position unavailable".into()));
    };
    Ok(CrossingAverage {
        delta_mid: 0.5 * (delta_below + delta_above),
        lambda_estimate: 0.5 * (l0 + l1),
        below,
        above,
    })
}
