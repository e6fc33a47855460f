//! EP2 location as zeros of the complex discriminant `D(δ, λ_R)` with λ_I
//! tied to λ_R by a [`LambdaImPolicy`].

use rayon::prelude::*;
use serde::Serialize;

use crate::branch::match_branches;
use crate::error::{Error, Result};
use crate::model::{secular_coefficients, ControlPoint, LambdaImPolicy, SystemConfig, C64};
use crate::solver::{cardano_roots, discriminant, discriminant_scale};

pub const FD_STEP: f64 = 1e-7;
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const STEP_TOL: f64 = 1e-12;
pub const MAX_DRIFT: f64 = 0.1;
pub const MAX_NEWTON_ITER: usize = 100;
pub const DEFAULT_ORDER_RADIUS: f64 = 1e-3;
const ORDER_SAMPLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpCandidate {
    pub delta: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// `|D|` at the point.
    pub residual: f64,
    /// Coalescing pair as one-based ranks by descending real part.
    pub pair: (usize, usize),
    pub refined: bool,
    pub degenerate_jacobian: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanBox {
    pub delta: (f64, f64),
    pub lambda_re: (f64, f64),
    pub n_delta: usize,
    pub n_lambda: usize,
}

impl ScanBox {
    /// `δ ∈ [0, 1.6]`, `λ_R ∈ [0, 0.6]` on a 64 × 64 grid.
    pub fn standard() -> Self {
        Self { delta: (0.0, 1.6), lambda_re: (0.0, 0.6), n_delta: 64, n_lambda: 64 }
    }

    fn validate(&self) -> Result<()> {
        let bounds = [self.delta.0, self.delta.1, self.lambda_re.0, self.lambda_re.1];
        if bounds.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("scan bounds must be finite".into()));
        }
        if !(self.delta.0 < self.delta.1) || !(self.lambda_re.0 < self.lambda_re.1) {
            return Err(Error::Domain("empty scan range".into()));
        }
        if self.n_delta < 8 || self.n_lambda < 8 {
            return Err(Error::Domain("scan grid must be at least 8 x 8".into()));
        }
        Ok(())
    }

    pub fn contains(&self, delta: f64, lambda_re: f64) -> bool {
        (self.delta.0..=self.delta.1).contains(&delta)
            && (self.lambda_re.0..=self.lambda_re.1).contains(&lambda_re)
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = (hi - lo) / (n - 1) as f64;
        (0..n).map(|k| lo + h * k as f64).collect()
    }
}

pub fn discriminant_at(cfg: &SystemConfig, policy: &LambdaImPolicy, delta: f64, lambda_re: f64) -> C64 {
    discriminant(&secular_coefficients(cfg, &policy.point(delta, lambda_re)))
}

fn coalescing_pair(cfg: &SystemConfig, p: &ControlPoint) -> (usize, usize) {
    let raw = cardano_roots(&secular_coefficients(cfg, p));
    let sorted = raw.reordered(raw.order_by_re_desc());
    let (a, b) = sorted.closest_pair();
    (a + 1, b + 1)
}

fn candidate(cfg: &SystemConfig, policy: &LambdaImPolicy, delta: f64, lambda_re: f64) -> EpCandidate {
    let p = policy.point(delta, lambda_re);
    EpCandidate {
        delta,
        lambda_re,
        lambda_im: p.lambda_im,
        residual: discriminant(&secular_coefficients(cfg, &p)).norm(),
        pair: coalescing_pair(cfg, &p),
        refined: false,
        degenerate_jacobian: false,
        iterations: 0,
    }
}

/// Interior grid points whose `|D|` is strictly below all eight neighbours,
/// sorted by ascending residual (ties toward smaller δ).
pub fn grid_scan(cfg: &SystemConfig, policy: &LambdaImPolicy, area: &ScanBox) -> Result<Vec<EpCandidate>> {
    area.validate()?;
    let ds = ScanBox::axis(area.delta.0, area.delta.1, area.n_delta);
    let ls = ScanBox::axis(area.lambda_re.0, area.lambda_re.1, area.n_lambda);
    let grid: Vec<Vec<f64>> = ds
        .par_iter()
        .map(|&d| ls.iter().map(|&l| discriminant_at(cfg, policy, d, l).norm()).collect())
        .collect();
    let mut out = Vec::new();
    for i in 1..ds.len() - 1 {
        for j in 1..ls.len() - 1 {
            let v = grid[i][j];
            let is_min = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    (di == 0 && dj == 0) || v < grid[(i as i64 + di) as usize][(j as i64 + dj) as usize]
                })
            });
            if is_min {
                out.push(candidate(cfg, policy, ds[i], ls[j]));
            }
        }
    }
    out.sort_by(|a, b| a.residual.total_cmp(&b.residual).then(a.delta.total_cmp(&b.delta)));
    Ok(out)
}

/// Damped Newton on `(Re D, Im D) = 0` in `(δ, λ_R)` with a central
/// finite-difference Jacobian.
pub fn refine(cfg: &SystemConfig, policy: &LambdaImPolicy, seed: &EpCandidate) -> Result<EpCandidate> {
    if !seed.residual.is_finite() || !seed.delta.is_finite() || !seed.lambda_re.is_finite() {
        return Err(Error::Domain("seed is not finite".into()));
    }
    let f = |x: [f64; 2]| discriminant_at(cfg, policy, x[0], x[1]);
    let mut x = [seed.delta, seed.lambda_re];
    let mut fx = f(x);
    let mut trace = vec![(x[0], x[1], fx.norm())];
    let mut degenerate = false;
    let mut converged = fx.norm() < RESIDUAL_TOL;
    let mut iterations = 0;
    while !converged && iterations < MAX_NEWTON_ITER {
        iterations += 1;
        let dd = (f([x[0] + FD_STEP, x[1]]) - f([x[0] - FD_STEP, x[1]])) / (2.0 * FD_STEP);
        let dl = (f([x[0], x[1] + FD_STEP]) - f([x[0], x[1] - FD_STEP])) / (2.0 * FD_STEP);
        // J = [[Re dd, Re dl], [Im dd, Im dl]]
        let det = dd.re * dl.im - dl.re * dd.im;
        let jscale = dd.norm_sqr() + dl.norm_sqr();
        if det.abs() <= 1e-14 * jscale || jscale == 0.0 {
            degenerate = true;
            break;
        }
        let step = [(dl.im * fx.re - dl.re * fx.im) / det, (-dd.im * fx.re + dd.re * fx.im) / det];
        let mut alpha = 1.0;
        let mut next = [x[0] - step[0], x[1] - step[1]];
        let mut fnext = f(next);
        while fnext.norm() >= fx.norm() && alpha > 1e-6 {
            alpha *= 0.5;
            next = [x[0] - alpha * step[0], x[1] - alpha * step[1]];
            fnext = f(next);
        }
        let moved = alpha * step[0].hypot(step[1]);
        if fnext.norm() < fx.norm() {
            x = next;
            fx = fnext;
        }
        trace.push((x[0], x[1], fx.norm()));
        if !fx.norm().is_finite() {
            return Err(Error::Diverged { trace });
        }
        converged = fx.norm() < RESIDUAL_TOL || moved < STEP_TOL;
    }
    let drift = (x[0] - seed.delta).hypot(x[1] - seed.lambda_re);
    if drift > MAX_DRIFT {
        return Err(Error::DriftedSeed { distance: drift, limit: MAX_DRIFT });
    }
    if !converged && !degenerate {
        return Err(Error::Diverged { trace });
    }
    let mut out = candidate(cfg, policy, x[0], x[1]);
    let scale = discriminant_scale(&secular_coefficients(cfg, &policy.point(x[0], x[1])));
    out.refined = out.residual < 1e-10 * scale;
    out.degenerate_jacobian = degenerate;
    out.iterations = iterations;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrderKind {
    SecondOrder,
    Regular,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderCertificate {
    pub exponent: f64,
    pub radii: [f64; 3],
    pub separations: [f64; 3],
    pub kind: OrderKind,
}

/// Fits `g(r) ∝ r^p` where `g(r)` is the mean of `|Δ(r) − Δ(centre)|` over a
/// circle of radius `r` in the `(δ, λ_R)` plane and `Δ = E_i − E_j` is the
/// difference of the pair closest at the centre. An EP2 gives `p ≈ 1/2`;
/// a regular point gives `p ≈ 1`.
pub fn verify_order(
    cfg: &SystemConfig,
    policy: &LambdaImPolicy,
    ep: &EpCandidate,
    radius: f64,
) -> Result<OrderCertificate> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Domain("radius must be positive".into()));
    }
    let centre = cardano_roots(&secular_coefficients(cfg, &policy.point(ep.delta, ep.lambda_re)));
    let (i, j) = centre.closest_pair();
    let centre_diff = centre.values[i] - centre.values[j];
    let radii = [radius, radius / 2.0, radius / 4.0];
    let separations = radii.map(|r| {
        (0..ORDER_SAMPLES)
            .map(|k| {
                let phi = std::f64::consts::TAU * (k as f64 + 0.5) / ORDER_SAMPLES as f64;
                let p = policy.point(ep.delta + r * phi.cos(), ep.lambda_re + r * phi.sin());
                let raw = cardano_roots(&secular_coefficients(cfg, &p));
                let m = match_branches(&centre.values, &raw.values);
                let diff = raw.values[m.order[i]] - raw.values[m.order[j]];
                (diff - centre_diff).norm()
            })
            .sum::<f64>()
            / ORDER_SAMPLES as f64
    });
    let xs = radii.map(f64::ln);
    let ys = separations.map(f64::ln);
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let num: f64 = (0..3).map(|k| (xs[k] - mx) * (ys[k] - my)).sum();
    let den: f64 = (0..3).map(|k| (xs[k] - mx).powi(2)).sum();
    let exponent = num / den;
    let kind = if (exponent - 0.5).abs() < 0.1 {
        OrderKind::SecondOrder
    } else if (exponent - 1.0).abs() < 0.1 {
        OrderKind::Regular
    } else {
        OrderKind::Inconclusive
    };
    Ok(OrderCertificate { exponent, radii, separations, kind })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocatedEp {
    #[serde(flatten)]
    pub candidate: EpCandidate,
    pub order: OrderCertificate,
}

/// Scan, refine every local minimum, keep refined points inside the box and
/// merge duplicates. Results are sorted by δ.
pub fn locate(cfg: &SystemConfig, policy: &LambdaImPolicy, area: &ScanBox) -> Result<Vec<LocatedEp>> {
    let seeds = grid_scan(cfg, policy, area)?;
    let refined: Vec<EpCandidate> = seeds
        .par_iter()
        .filter_map(|s| refine(cfg, policy, s).ok())
        .filter(|c| c.refined && area.contains(c.delta, c.lambda_re))
        .collect();
    let mut unique: Vec<EpCandidate> = Vec::new();
    for c in refined {
        if !unique.iter().any(|u| (u.delta - c.delta).hypot(u.lambda_re - c.lambda_re) < 1e-6) {
            unique.push(c);
        }
    }
    unique.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    unique
        .into_iter()
        .map(|c| Ok(LocatedEp { candidate: c, order: verify_order(cfg, policy, &c, DEFAULT_ORDER_RADIUS)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::cardano_roots;

    fn defaults() -> (SystemConfig, LambdaImPolicy) {
        (SystemConfig::default(), LambdaImPolicy::default())
    }

    fn near(c: &EpCandidate, d: f64, l: f64, tol: f64) -> bool {
        (c.delta - d).hypot(c.lambda_re - l) < tol
    }

    #[test]
    fn scan_finds_first_ep_region() {
        let (cfg, pol) = defaults();
        let area = ScanBox { delta: (0.1, 0.4), lambda_re: (0.3, 0.6), n_delta: 31, n_lambda: 31 };
        let found = grid_scan(&cfg, &pol, &area).unwrap();
        assert!(found.iter().any(|c| near(c, 0.22, 0.45, 0.05)), "{found:?}");
    }

    #[test]
    fn scan_finds_second_ep_region() {
        let (cfg, pol) = defaults();
        let area = ScanBox { delta: (1.1, 1.4), lambda_re: (0.05, 0.3), n_delta: 31, n_lambda: 26 };
        let found = grid_scan(&cfg, &pol, &area).unwrap();
        assert!(found.iter().any(|c| near(c, 1.275, 0.15, 0.05)), "{found:?}");
    }

    #[test]
    fn far_region_stays_bounded_away_from_zero() {
        let (cfg, pol) = defaults();
        let area = ScanBox { delta: (0.5, 0.9), lambda_re: (0.05, 0.1), n_delta: 16, n_lambda: 16 };
        // Oracle: the minimum gap over a dense grid of the region.
        let mut min_gap = f64::INFINITY;
        for i in 0..=40 {
            for j in 0..=40 {
                let p = pol.point(0.5 + 0.01 * i as f64, 0.05 + 0.00125 * j as f64);
                min_gap = min_gap.min(cardano_roots(&secular_coefficients(&cfg, &p)).min_gap());
            }
        }
        assert!(min_gap > 0.05);
        for c in grid_scan(&cfg, &pol, &area).unwrap() {
            assert!(c.residual > 1e-8, "{c:?}");
        }
    }

    #[test]
    fn scan_rejects_bad_boxes() {
        let (cfg, pol) = defaults();
        let empty = ScanBox { delta: (0.3, 0.3), lambda_re: (0.0, 1.0), n_delta: 10, n_lambda: 10 };
        assert!(grid_scan(&cfg, &pol, &empty).is_err());
        let coarse = ScanBox { n_delta: 4, ..ScanBox::standard() };
        assert!(grid_scan(&cfg, &pol, &coarse).is_err());
    }

    #[test]
    fn refine_converges_and_is_idempotent() {
        let (cfg, pol) = defaults();
        let seed = candidate(&cfg, &pol, 0.22, 0.45);
        let ep = refine(&cfg, &pol, &seed).unwrap();
        assert!(ep.refined);
        assert!(ep.residual < 1e-12);
        assert!(near(&ep, 0.22, 0.45, 0.05));
        let gap = cardano_roots(&secular_coefficients(&cfg, &pol.point(ep.delta, ep.lambda_re))).min_gap();
        assert!(gap < 1e-5, "gap {gap}");
        let again = refine(&cfg, &pol, &ep).unwrap();
        assert!(again.iterations <= 1);
        assert!(near(&again, ep.delta, ep.lambda_re, 1e-10));
    }

    #[test]
    fn coalescing_pairs_match_regimes() {
        let (cfg, pol) = defaults();
        let first = refine(&cfg, &pol, &candidate(&cfg, &pol, 0.22, 0.45)).unwrap();
        let second = refine(&cfg, &pol, &candidate(&cfg, &pol, 1.275, 0.15)).unwrap();
        assert_eq!(first.pair, (2, 3));
        assert_eq!(second.pair, (1, 2));
    }

    #[test]
    fn refine_reports_drift() {
        let (cfg, pol) = defaults();
        // A seed in the far region has no nearby zero.
        let seed = candidate(&cfg, &pol, 0.7, 0.07);
        assert!(refine(&cfg, &pol, &seed).is_err());
    }

    #[test]
    fn order_exponents() {
        let (cfg, pol) = defaults();
        for (d, l) in [(0.22, 0.45), (1.275, 0.15)] {
            let ep = refine(&cfg, &pol, &candidate(&cfg, &pol, d, l)).unwrap();
            let cert = verify_order(&cfg, &pol, &ep, DEFAULT_ORDER_RADIUS).unwrap();
            assert_eq!(cert.kind, OrderKind::SecondOrder, "{cert:?}");
        }
        let regular = candidate(&cfg, &pol, 0.7, 0.3);
        let cert = verify_order(&cfg, &pol, &regular, DEFAULT_ORDER_RADIUS).unwrap();
        assert_eq!(cert.kind, OrderKind::Regular, "{cert:?}");
    }

    #[test]
    fn locate_finds_exactly_two() {
        let (cfg, pol) = defaults();
        let eps = locate(&cfg, &pol, &ScanBox::standard()).unwrap();
        assert_eq!(eps.len(), 2, "{eps:?}");
        assert!(near(&eps[0].candidate, 0.22, 0.45, 0.05));
        assert!(near(&eps[1].candidate, 1.275, 0.15, 0.05));
    }
}
