//! Elliptical encirclement in the `(δ, λ_R)` plane, quasi-static branch
//! tracking, monodromy permutations and state-conversion events.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::branch::{match_branches, Permutation3};
use crate::error::{Error, Result};
use crate::model::{ControlPoint, LambdaImPolicy, SystemConfig};
use crate::solver::{eigen_frame, EigenFrame};

pub const MIN_STEPS: usize = 64;
pub const MAX_BISECTIONS: u32 = 12;
/// Default conversion threshold as a multiple of the median pairwise gap.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    Anticlockwise,
    Clockwise,
}

/// `δ(θ) = x0 (1 + a cos θ)`, `λ_R(θ) = y0 (1 + b sin θ)`, λ_I from the policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Contour {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    /// Samples per loop.
    pub steps: usize,
    pub loops: u32,
    pub direction: Direction,
    pub policy: LambdaImPolicy,
    /// Angle at which the loop starts and ends.
    pub theta0: f64,
}

impl Contour {
    /// One anticlockwise loop of 4096 steps under the default λ_I policy.
    pub fn new(x0: f64, y0: f64, a: f64, b: f64) -> Self {
        Self {
            x0,
            y0,
            a,
            b,
            steps: 4096,
            loops: 1,
            direction: Direction::Anticlockwise,
            policy: LambdaImPolicy::default(),
            theta0: 0.0,
        }
    }

    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn with_loops(self, loops: u32) -> Self {
        Self { loops, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x0, self.y0, self.a, self.b, self.theta0].iter().all(|x| x.is_finite()) {
            return Err(Error::DegenerateContour("non-finite contour parameters".into()));
        }
        if self.steps < MIN_STEPS {
            return Err(Error::Domain(format!("contour needs at least {MIN_STEPS} steps per loop")));
        }
        if self.loops < 1 {
            return Err(Error::Domain("contour needs at least one loop".into()));
        }
        Ok(())
    }

    fn step_angle(&self) -> f64 {
        let h = TAU / self.steps as f64;
        match self.direction {
            Direction::Anticlockwise => h,
            Direction::Clockwise => -h,
        }
    }
}

/// `theta` is measured from the loop start, so the geometric angle is
/// `theta0 + theta`.
pub fn contour_point(c: &Contour, theta: f64) -> ControlPoint {
    let theta = c.theta0 + theta;
    c.policy.point(c.x0 * (1.0 + c.a * theta.cos()), c.y0 * (1.0 + c.b * theta.sin()))
}

/// Strict interior test for the ellipse with semi-axes `a·x0`, `b·y0`.
pub fn encloses(c: &Contour, point: (f64, f64)) -> Result<bool> {
    if c.x0 == 0.0 || c.y0 == 0.0 {
        return Err(Error::DegenerateContour("centre coordinate is zero".into()));
    }
    if !(c.a > 0.0 && c.b > 0.0) {
        return Err(Error::DegenerateContour("a and b must be positive".into()));
    }
    let u = (point.0 - c.x0) / (c.a * c.x0);
    let v = (point.1 - c.y0) / (c.b * c.y0);
    Ok(u * u + v * v < 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopSample {
    pub theta: f64,
    pub point: ControlPoint,
    /// Branch-ordered: `frame.values[b]` is branch `b + 1`.
    pub frame: EigenFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConversionEvent {
    pub theta: f64,
    /// Continuity (branch-following) labels, one-based, ascending.
    pub branches: (usize, usize),
    /// Positions by descending real part at the event, one-based, ascending.
    pub ranks: (usize, usize),
    pub gap_at_event: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopTrajectory {
    pub contour: Option<Contour>,
    pub samples: Vec<LoopSample>,
    pub events: Vec<ConversionEvent>,
    /// Number of bisections inserted by adaptive refinement.
    pub refinements: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonodromyResult {
    pub permutation: Permutation3,
    pub loops_applied: u32,
    pub order: u32,
    /// `max_i |E_i(end) − E_{π(i)}(start)|`.
    pub closure_error: f64,
}

struct Tracker<'a> {
    cfg: &'a SystemConfig,
    contour: &'a Contour,
    samples: Vec<LoopSample>,
    refinements: usize,
}

impl Tracker<'_> {
    fn raw(&self, theta: f64) -> Result<(ControlPoint, EigenFrame)> {
        let p = contour_point(self.contour, theta);
        Ok((p, eigen_frame(self.cfg, &p, true)?))
    }

    fn advance(&mut self, theta: f64, depth: u32) -> Result<()> {
        let prev = self.samples.last().expect("tracker starts with one sample");
        let prev_theta = prev.theta;
        let (point, raw) = self.raw(theta)?;
        let m = match_branches(&prev.frame.values, &raw.values);
        let gap_scale = prev.frame.min_gap().min(raw.min_gap());
        if m.cost > 0.5 * gap_scale {
            if depth >= MAX_BISECTIONS {
                return Err(Error::BisectionExhausted { theta });
            }
            self.refinements += 1;
            self.advance(0.5 * (prev_theta + theta), depth + 1)?;
            return self.advance(theta, depth + 1);
        }
        let mut frame = raw.reordered(m.order);
        frame.labels = [1, 2, 3];
        self.samples.push(LoopSample { theta, point, frame });
        Ok(())
    }
}

fn track(cfg: &SystemConfig, c: &Contour) -> Result<LoopTrajectory> {
    c.validate()?;
    let mut tracker = Tracker { cfg, contour: c, samples: Vec::new(), refinements: 0 };
    let (point, raw) = tracker.raw(0.0)?;
    let mut first = raw.reordered(raw.order_by_re_desc());
    first.labels = [1, 2, 3];
    tracker.samples.push(LoopSample { theta: 0.0, point, frame: first });
    let h = c.step_angle();
    let total = c.steps * c.loops as usize;
    for k in 1..=total {
        tracker.advance(h * k as f64, 0)?;
    }
    let mut traj =
        LoopTrajectory { contour: Some(*c), samples: tracker.samples, events: Vec::new(), refinements: tracker.refinements };
    traj.events = detect_conversions(&traj, default_threshold(&traj));
    Ok(traj)
}

/// Reads the permutation off the end of a trajectory by nearest-initial
/// matching, which must be a bijection.
pub fn monodromy_of(traj: &LoopTrajectory, loops_applied: u32) -> Result<MonodromyResult> {
    let (Some(first), Some(last)) = (traj.samples.first(), traj.samples.last()) else {
        return Err(Error::Domain("empty trajectory".into()));
    };
    let init = first.frame.values;
    let fin = last.frame.values;
    let mut map = [0usize; 3];
    let mut closure_error = 0f64;
    for i in 0..3 {
        let j = (0..3).min_by(|&x, &y| (fin[i] - init[x]).norm().total_cmp(&(fin[i] - init[y]).norm())).unwrap();
        map[i] = j;
        closure_error = closure_error.max((fin[i] - init[j]).norm());
    }
    let permutation = Permutation3::new(map).ok_or(Error::NonBijective)?;
    Ok(MonodromyResult { permutation, loops_applied, order: permutation.order(), closure_error })
}

/// Tracks `c.loops` loops and reports the trajectory with its monodromy.
pub fn track_loop(cfg: &SystemConfig, c: &Contour) -> Result<(LoopTrajectory, MonodromyResult)> {
    let traj = track(cfg, c)?;
    let mono = monodromy_of(&traj, c.loops)?;
    Ok((traj, mono))
}

/// Monodromy after `n` consecutive loops without relabelling in between.
pub fn monodromy_power(cfg: &SystemConfig, c: &Contour, n: u32) -> Result<MonodromyResult> {
    if n < 1 {
        return Err(Error::Domain("monodromy power needs n >= 1".into()));
    }
    Ok(track_loop(cfg, &c.with_loops(n))?.1)
}

/// Median over all samples and pairs of the eigenvalue separation, scaled
/// by [`DEFAULT_THRESHOLD_FACTOR`].
pub fn default_threshold(traj: &LoopTrajectory) -> f64 {
    let mut gaps: Vec<f64> = traj
        .samples
        .iter()
        .flat_map(|s| {
            let v = s.frame.values;
            [(v[0] - v[1]).norm(), (v[1] - v[2]).norm(), (v[0] - v[2]).norm()]
        })
        .collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(f64::total_cmp);
    DEFAULT_THRESHOLD_FACTOR * gaps[gaps.len() / 2]
}

fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature <= 0.0 || !curvature.is_finite() {
        return x[1];
    }
    let vertex = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    vertex.clamp(x[0].min(x[2]), x[0].max(x[2]))
}

fn ranks_by_re(frame: &EigenFrame) -> [usize; 3] {
    let order = frame.order_by_re_desc();
    let mut rank = [0usize; 3];
    for (r, &b) in order.iter().enumerate() {
        rank[b] = r;
    }
    rank
}

/// Conversion events: local minima of a pair's separation along θ that lie
/// below `threshold` and across which the two states exchange their
/// real-part ordering (the sign of `Re(E_i − E_j)` differs at the
/// neighbouring separation maxima). θ is refined by a parabola through the
/// minimum and its neighbours.
pub fn detect_conversions(traj: &LoopTrajectory, threshold: f64) -> Vec<ConversionEvent> {
    let s = &traj.samples;
    let n = s.len();
    let mut events = Vec::new();
    if n < 3 || !(threshold > 0.0) {
        return events;
    }
    let theta: Vec<f64> = s.iter().map(|x| x.theta).collect();
    for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
        let diff: Vec<_> = s.iter().map(|x| x.frame.values[i] - x.frame.values[j]).collect();
        let gap: Vec<f64> = diff.iter().map(|d| d.norm()).collect();
        for k in 1..n - 1 {
            if !(gap[k] < gap[k - 1] && gap[k] <= gap[k + 1] && gap[k] < threshold) {
                continue;
            }
            let mut lo = k - 1;
            while lo > 0 && gap[lo - 1] > gap[lo] {
                lo -= 1;
            }
            let mut hi = k + 1;
            while hi < n - 1 && gap[hi + 1] > gap[hi] {
                hi += 1;
            }
            if (diff[lo].re >= 0.0) == (diff[hi].re >= 0.0) {
                continue;
            }
            let rank = ranks_by_re(&s[k].frame);
            let (ra, rb) = (rank[i].min(rank[j]) + 1, rank[i].max(rank[j]) + 1);
            events.push(ConversionEvent {
                theta: parabolic_vertex([theta[k - 1], theta[k], theta[k + 1]], [gap[k - 1], gap[k], gap[k + 1]]),
                branches: (i + 1, j + 1),
                ranks: (ra, rb),
                gap_at_event: gap[k],
            });
        }
    }
    events.sort_by(|a, b| {
        let forward = a.theta.abs().total_cmp(&b.theta.abs());
        forward.then(a.branches.cmp(&b.branches))
    });
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn both_eps() -> Contour {
        Contour::new(0.6, 0.25, 2.5, 1.0)
    }

    #[test]
    fn contour_points() {
        let c = Contour::new(0.5, 0.25, 1.0, 1.0);
        let p = contour_point(&c, 0.0);
        assert!((p.delta - 1.0).abs() < 1e-15 && (p.lambda_re - 0.25).abs() < 1e-15);
        assert_eq!(p.lambda_im, p.lambda_re);
        let p = contour_point(&c, PI / 2.0);
        assert!((p.delta - 0.5).abs() < 1e-15 && (p.lambda_re - 0.5).abs() < 1e-15);
        let p = contour_point(&both_eps(), PI);
        assert!((p.delta + 0.9).abs() < 1e-15 && (p.lambda_re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn enclosure_of_reported_locations() {
        let black = Contour::new(0.5, 0.25, 1.0, 1.0);
        let violet = Contour::new(1.25, 0.25, 0.5, 1.0);
        assert!(encloses(&black, (0.22, 0.45)).unwrap());
        assert!(!encloses(&black, (1.275, 0.15)).unwrap());
        assert!(encloses(&violet, (1.275, 0.15)).unwrap());
        assert!(!encloses(&violet, (0.22, 0.45)).unwrap());
        assert!(encloses(&black, (0.5, 0.25)).unwrap());
        assert!(encloses(&Contour::new(0.0, 0.25, 1.0, 1.0), (0.0, 0.25)).is_err());
        assert!(encloses(&Contour::new(0.5, 0.25, 0.0, 1.0), (0.5, 0.25)).is_err());
    }

    #[test]
    fn contour_validation() {
        let cfg = SystemConfig::default();
        assert!(track_loop(&cfg, &both_eps().with_steps(32)).is_err());
        assert!(track_loop(&cfg, &both_eps().with_loops(0)).is_err());
        assert!(monodromy_power(&cfg, &both_eps(), 0).is_err());
    }

    #[test]
    fn violet_contour_swaps_one_and_two() {
        let cfg = SystemConfig::default();
        let (_, m) = track_loop(&cfg, &Contour::new(1.25, 0.25, 0.5, 1.0)).unwrap();
        assert_eq!(m.permutation.cycle_notation(), "(1 2)");
        assert!(m.closure_error < 1e-6);
    }

    #[test]
    fn both_eps_give_three_cycle() {
        let cfg = SystemConfig::default();
        let (traj, m) = track_loop(&cfg, &both_eps()).unwrap();
        assert_eq!(m.permutation.one_based(), [3, 1, 2]);
        assert_eq!(m.order, 3);
        assert!(m.closure_error < 1e-6);
        let ev: Vec<_> = traj.events.iter().map(|e| (e.theta / PI, e.ranks)).collect();
        assert_eq!(ev.len(), 2, "{ev:?}");
        assert!((ev[0].0 - 0.46).abs() < 0.03 && ev[0].1 == (1, 2));
        assert!((ev[1].0 - 0.582).abs() < 0.03 && ev[1].1 == (2, 3));
    }

    #[test]
    fn powers_compose() {
        let cfg = SystemConfig::default();
        let c = both_eps().with_steps(1024);
        let single = track_loop(&cfg, &c).unwrap().1.permutation;
        for n in [1, 2, 3] {
            let m = monodromy_power(&cfg, &c, n).unwrap();
            assert_eq!(m.permutation, single.pow(n), "n = {n}");
            assert_eq!(m.loops_applied, n);
        }
        assert!(monodromy_power(&cfg, &c, 3).unwrap().permutation.is_identity());
    }

    #[test]
    fn far_contour_has_no_conversions() {
        let cfg = SystemConfig::default();
        let (traj, m) = track_loop(&cfg, &Contour::new(0.7, 0.08, 0.1, 0.1)).unwrap();
        assert!(m.permutation.is_identity());
        assert!(traj.events.is_empty());
        assert!(detect_conversions(&traj, 10.0).is_empty());
        let (fig, _) = track_loop(&cfg, &both_eps().with_steps(512)).unwrap();
        assert!(detect_conversions(&fig, 0.0).is_empty());
    }

    #[test]
    fn frozen_contour_is_stationary() {
        let cfg = SystemConfig::default();
        let (traj, m) = track_loop(&cfg, &Contour::new(0.7, 0.2, 0.0, 0.0).with_steps(64)).unwrap();
        assert!(m.permutation.is_identity());
        assert_eq!(m.closure_error, 0.0);
        assert_eq!(traj.refinements, 0);
    }

    #[test]
    fn clockwise_traversal_has_same_permutation_class() {
        let cfg = SystemConfig::default();
        let c = Contour { direction: Direction::Clockwise, ..both_eps().with_steps(2048) };
        let (_, m) = track_loop(&cfg, &c).unwrap();
        assert_eq!(m.order, 3);
    }

    #[test]
    fn parabola_vertex() {
        let v = parabolic_vertex([0.0, 1.0, 3.0], [4.0, 1.0, 1.0]);
        // y = (x - 2)^2 fits (0,4), (1,1), (3,1)
        assert!((v - 2.0).abs() < 1e-12);
    }
}
