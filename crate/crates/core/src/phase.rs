//! Accumulated eigenvector phases along a loop trajectory.
//!
//! Each eigenvector is first put in the canonical gauge (largest component
//! real and positive), then the phase is the running sum of the arguments
//! of consecutive overlaps. Because the canonical gauge is fixed by the
//! vector itself, the result does not depend on the phases the solver
//! happened to return.

use rayon::prelude::*;
use serde::Serialize;

use crate::encircle::{ConversionEvent, LoopTrajectory};
use crate::error::{Error, Result};
use crate::model::{SystemConfig, Vec3};
use crate::solver::{canonical_gauge, eigen_frame, inner};

/// Overlaps below this magnitude are treated as lost continuity.
pub const MIN_OVERLAP: f64 = 1e-12;
/// Half-width of the search window around an event, in radians of θ.
pub const SWITCH_WINDOW: f64 = 0.02 * std::f64::consts::PI;

/// Discrete parallel transport: rotates each vector so that its overlap
/// with the (already rotated) predecessor is real and positive. Also
/// returns the accumulated phase removed at each sample.
pub fn gauge_fix(vectors: &[Vec3]) -> Result<(Vec<Vec3>, Vec<f64>)> {
    let mut out = Vec::with_capacity(vectors.len());
    let mut phases = Vec::with_capacity(vectors.len());
    let mut acc = 0.0;
    for (k, v) in vectors.iter().enumerate() {
        if k == 0 {
            out.push(*v);
            phases.push(0.0);
            continue;
        }
        let ov = inner(&out[k - 1], v);
        if ov.norm() < MIN_OVERLAP || !ov.norm().is_finite() {
            return Err(Error::StaleTrajectory { index: k });
        }
        let rot = ov.conj() / ov.norm();
        out.push(v.map(|x| x * rot));
        // Phase of the raw step, relative to the previous raw vector.
        let raw = inner(&vectors[k - 1], v).arg();
        acc += raw;
        phases.push(acc);
    }
    Ok((out, phases))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSeries {
    pub theta: Vec<f64>,
    /// `branch[k][b]`: phase of continuity branch `b + 1` at sample `k`.
    pub branch: Vec<[f64; 3]>,
    /// `ordered[k][r]`: phase of the state ranked `r + 1` by descending Re.
    pub ordered: Vec<[f64; 3]>,
    /// `rank_branch[k][r]`: zero-based branch holding rank `r` at sample `k`.
    pub rank_branch: Vec<[usize; 3]>,
    /// Final branch phases.
    pub closure: [f64; 3],
    /// Distance of each final phase from the nearest multiple of 2π.
    pub closure_mod_2pi: [f64; 3],
}

pub fn distance_to_2pi_multiple(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    (x - t * (x / t).round()).abs()
}

pub fn accumulate_phase(cfg: &SystemConfig, traj: &LoopTrajectory) -> Result<PhaseSeries> {
    let n = traj.samples.len();
    if n == 0 {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let mut vectors: Vec<[Vec3; 3]> = Vec::with_capacity(n);
    for s in &traj.samples {
        let vs = match s.frame.vectors {
            Some(v) => v,
            None => {
                // Recompute and align with the stored branch order.
                let raw = eigen_frame(cfg, &s.point, true)?;
                let m = crate::branch::match_branches(&s.frame.values, &raw.values);
                raw.reordered(m.order).vectors.expect("vectors requested")
            }
        };
        vectors.push(vs.map(|v| canonical_gauge(&v)));
    }
    let per_branch: Vec<Vec<f64>> = (0..3)
        .into_par_iter()
        .map(|b| {
            let seq: Vec<Vec3> = vectors.iter().map(|v| v[b]).collect();
            gauge_fix(&seq).map(|(_, phi)| phi)
        })
        .collect::<Result<_>>()?;

    let theta: Vec<f64> = traj.samples.iter().map(|s| s.theta).collect();
    let branch: Vec<[f64; 3]> = (0..n).map(|k| [per_branch[0][k], per_branch[1][k], per_branch[2][k]]).collect();
    let rank_branch: Vec<[usize; 3]> = traj.samples.iter().map(|s| s.frame.order_by_re_desc()).collect();
    let ordered = branch.iter().zip(&rank_branch).map(|(p, r)| r.map(|b| p[b])).collect();
    let closure = branch[n - 1];
    Ok(PhaseSeries { theta, branch, ordered, rank_branch, closure, closure_mod_2pi: closure.map(distance_to_2pi_multiple) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseSwitch {
    pub theta: f64,
    /// One-based ranks whose occupants swap.
    pub ranks: (usize, usize),
    /// One-based continuity branches involved.
    pub branches: (usize, usize),
    pub event_theta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SwitchReport {
    pub switches: Vec<PhaseSwitch>,
    pub diagnostics: Vec<String>,
}

/// Confirms each conversion event by finding, within [`SWITCH_WINDOW`] of
/// it, the sample interval where the event's two branches exchange ranks in
/// the order-following labelling. The switch angle is interpolated from the
/// sign change of the real-part difference.
pub fn detect_phase_switch(
    traj: &LoopTrajectory,
    series: &PhaseSeries,
    events: &[ConversionEvent],
) -> SwitchReport {
    let mut report = SwitchReport::default();
    let th = &series.theta;
    for ev in events {
        let (bi, bj) = (ev.branches.0 - 1, ev.branches.1 - 1);
        let mut found = None;
        for k in 0..th.len().saturating_sub(1) {
            let mid = 0.5 * (th[k] + th[k + 1]);
            if (mid - ev.theta).abs() > SWITCH_WINDOW {
                continue;
            }
            let (r0, r1) = (&series.rank_branch[k], &series.rank_branch[k + 1]);
            let pos = |r: &[usize; 3], b| r.iter().position(|&x| x == b).unwrap();
            let (pi0, pj0, pi1, pj1) = (pos(r0, bi), pos(r0, bj), pos(r1, bi), pos(r1, bj));
            if pi0 == pj1 && pj0 == pi1 && pi0 != pi1 {
                let d0 = (traj.samples[k].frame.values[bi] - traj.samples[k].frame.values[bj]).re;
                let d1 = (traj.samples[k + 1].frame.values[bi] - traj.samples[k + 1].frame.values[bj]).re;
                let t = if d0 != d1 { d0 / (d0 - d1) } else { 0.5 };
                let theta = th[k] + t.clamp(0.0, 1.0) * (th[k + 1] - th[k]);
                let ranks = (pi0.min(pj0) + 1, pi0.max(pj0) + 1);
                let cand = PhaseSwitch { theta, ranks, branches: ev.branches, event_theta: ev.theta };
                let better = found.map_or(true, |f: PhaseSwitch| (theta - ev.theta).abs() < (f.theta - ev.theta).abs());
                if better {
                    found = Some(cand);
                }
            }
        }
        match found {
            Some(s) => report.switches.push(s),
            None => report.diagnostics.push(format!(
                "no rank exchange of branches {:?} within the window around theta = {:.6}",
                ev.branches, ev.theta
            )),
        }
    }
    report
}
