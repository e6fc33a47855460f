//! Eigenvalues of the cubic secular equation by Cardano's closed form, an
//! independent Durand–Kerner oracle, the coalescence discriminant and right
//! eigenvectors.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    build_hamiltonian, characteristic_coefficients, secular_coefficients, ControlPoint, Mat3,
    SecularCoeffs, SystemConfig, Vec3, C64,
};

/// Primitive cube root of unity `e^{2πi/3}`.
pub const OMEGA: Complex64 = Complex64::new(-0.5, 0.866_025_403_784_438_6);

/// Eigenvalues closer than this are reported as coalesced.
pub const COALESCENCE_TOL: f64 = 1e-10;

/// Residual bound for a right eigenvector, relative to `max(1, ‖H‖_F)`.
pub const EIGENVECTOR_RESIDUAL_TOL: f64 = 1e-8;

const ORACLE_MAX_ITER: usize = 2000;
const ORACLE_RESIDUAL_TOL: f64 = 1e-12;

/// Three eigenvalues with optional unit right eigenvectors.
///
/// `values[k]` carries branch label `labels[k]`. Frames coming out of the
/// tracking code are stored in branch order, so `labels == [1, 2, 3]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenFrame {
    pub values: [C64; 3],
    pub vectors: Option<[Vec3; 3]>,
    pub labels: [u8; 3],
    pub degenerate: bool,
}

impl EigenFrame {
    pub fn from_values(values: [C64; 3]) -> Self {
        Self { values, vectors: None, labels: [1, 2, 3], degenerate: false }
    }

    /// Reorders slots so that new slot `k` holds old slot `order[k]`.
    pub fn reordered(&self, order: [usize; 3]) -> Self {
        Self {
            values: order.map(|k| self.values[k]),
            vectors: self.vectors.map(|v| order.map(|k| v[k])),
            labels: order.map(|k| self.labels[k]),
            degenerate: self.degenerate,
        }
    }

    /// Slot order by descending real part (ties broken by slot index).
    pub fn order_by_re_desc(&self) -> [usize; 3] {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| {
            self.values[b].re.partial_cmp(&self.values[a].re).unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }

    pub fn min_gap(&self) -> f64 {
        let v = &self.values;
        (v[0] - v[1]).norm().min((v[1] - v[2]).norm()).min((v[0] - v[2]).norm())
    }

    /// Pair (as slot indices, ascending) with the smallest separation.
    pub fn closest_pair(&self) -> (usize, usize) {
        let v = &self.values;
        let pairs = [(0, 1), (1, 2), (0, 2)];
        pairs
            .into_iter()
            .min_by(|&(a, b), &(c, d)| {
                (v[a] - v[b]).norm().partial_cmp(&(v[c] - v[d]).norm()).unwrap()
            })
            .unwrap()
    }
}

/// Intermediate quantities of the Cardano reduction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CardanoParts {
    pub m_val: C64,
    pub n_val: C64,
    pub eta: C64,
    pub eps_plus: C64,
    pub eps_minus: C64,
}

fn cardano_mn(c: &SecularCoeffs) -> (C64, C64) {
    let (a1, a2, a3) = (c.a1, c.a2, c.a3);
    let m = -a1 * a1 * a1 / 27.0 + a1 * a2 / 6.0 - a3 / 2.0;
    let n = -a1 * a1 / 9.0 + a2 / 3.0;
    (m, n)
}

fn principal_cbrt(z: C64) -> C64 {
    if z.norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z.cbrt()
    }
}

/// Computes `m`, `n`, `η` and the cube-root pair `ε±` with `ε+·ε− = −n`.
///
/// `m` uses the standard depressed-cubic reduction
/// `m = −a1³/27 + a1·a2/6 − a3/2`. The sign of `√(m² + n³)` is chosen to
/// maximise `|m ± √D|`; flipping it only swaps `ε+` and `ε−`.
pub fn cardano_parts(c: &SecularCoeffs) -> CardanoParts {
    let (m, n) = cardano_mn(c);
    let sqrt_d = (m * m + n * n * n).sqrt();
    let (plus, minus) =
        if (m + sqrt_d).norm() >= (m - sqrt_d).norm() { (m + sqrt_d, m - sqrt_d) } else { (m - sqrt_d, m + sqrt_d) };
    let eps_plus = principal_cbrt(plus);
    let eps_minus = if eps_plus.norm() > 1e-14 { -n / eps_plus } else { principal_cbrt(minus) };
    CardanoParts { m_val: m, n_val: n, eta: c.a1 / 3.0, eps_plus, eps_minus }
}

/// Roots `{ωε+ + ω̄ε− − η, ε+ + ε− − η, ω̄ε+ + ωε− − η}` in that slot order.
pub fn cardano_roots(c: &SecularCoeffs) -> EigenFrame {
    let p = cardano_parts(c);
    let w = OMEGA;
    let wb = OMEGA.conj();
    EigenFrame::from_values([
        w * p.eps_plus + wb * p.eps_minus - p.eta,
        p.eps_plus + p.eps_minus - p.eta,
        wb * p.eps_plus + w * p.eps_minus - p.eta,
    ])
}

/// `D = m² + n³`; zero exactly when two roots coalesce.
pub fn discriminant(c: &SecularCoeffs) -> C64 {
    let (m, n) = cardano_mn(c);
    m * m + n * n * n
}

/// Magnitude scale `max(1, |m|² + |n|³)` for judging how small `|D|` is.
pub fn discriminant_scale(c: &SecularCoeffs) -> f64 {
    let (m, n) = cardano_mn(c);
    1f64.max(m.norm_sqr() + n.norm().powi(3))
}

/// Roots of the monic cubic by Durand–Kerner simultaneous iteration,
/// finished with Newton polishing. Shares no code with the Cardano path.
pub fn oracle_roots(c: &SecularCoeffs) -> Result<[C64; 3]> {
    let radius = 1.0 + c.a1.norm().max(c.a2.norm()).max(c.a3.norm());
    let seed = C64::new(0.4, 0.9);
    let mut r = [radius * seed, radius * seed * seed, radius * seed * seed * seed];
    let residual = |r: &[C64; 3]| {
        r.iter()
            .map(|&x| c.eval(x).norm() / (1.0 + x.norm().powi(3)))
            .fold(0.0, |acc: f64, v| if acc.is_nan() || v.is_nan() { f64::NAN } else { acc.max(v) })
    };
    let mut iterations = 0;
    while iterations < ORACLE_MAX_ITER {
        iterations += 1;
        let mut largest_step = 0f64;
        for k in 0..3 {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..3 {
                if j != k {
                    denom *= r[k] - r[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = C64::new(f64::EPSILON, f64::EPSILON);
            }
            let step = c.eval(r[k]) / denom;
            r[k] -= step;
            largest_step = largest_step.max(step.norm() / (1.0 + r[k].norm()));
        }
        if largest_step < 1e-16 {
            break;
        }
    }
    for x in r.iter_mut() {
        for _ in 0..2 {
            let d = c.derivative(*x);
            if d.norm() > 1e-8 {
                let next = *x - c.eval(*x) / d;
                if c.eval(next).norm() <= c.eval(*x).norm() {
                    *x = next;
                }
            }
        }
    }
    let res = residual(&r);
    if !res.is_finite() || res > ORACLE_RESIDUAL_TOL {
        return Err(Error::NoConvergence { iterations, residual: res });
    }
    Ok(r)
}

/// A unit right eigenvector; `degenerate` marks a coalesced (defective)
/// eigenvalue, for which the single surviving eigenvector is returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvector {
    pub vector: Vec3,
    pub degenerate: bool,
}

fn cross(u: &Vec3, w: &Vec3) -> Vec3 {
    [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
}

pub fn vec_norm(v: &Vec3) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate-linear inner product `⟨u, v⟩ = Σ conj(u_k) v_k`.
pub fn inner(u: &Vec3, v: &Vec3) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn mat_vec(h: &Mat3, v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| h[i][0] * v[0] + h[i][1] * v[1] + h[i][2] * v[2])
}

fn frobenius(h: &Mat3) -> f64 {
    h.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotates `v` so that its largest-magnitude component is real and positive.
pub fn canonical_gauge(v: &Vec3) -> Vec3 {
    let k = (0..3).max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap()).unwrap();
    if v[k].norm() == 0.0 {
        return *v;
    }
    let phase = v[k].conj() / v[k].norm();
    v.map(|x| x * phase)
}

fn normalized(v: Vec3) -> Vec3 {
    let n = vec_norm(&v);
    v.map(|x| x / n)
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3(a: &Mat3, b: &Vec3) -> Option<Vec3> {
    let mut m = *a;
    let mut x = *b;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].norm().partial_cmp(&m[j][col].norm()).unwrap())?;
        if m[piv][col].norm() == 0.0 {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                let sub = f * m[col][k];
                m[row][k] -= sub;
            }
            let sub = f * x[col];
            x[row] -= sub;
        }
    }
    for row in (0..3).rev() {
        let mut acc = x[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

fn inverse_iteration(a: &Mat3, scale: f64) -> Option<Vec3> {
    let mut shifted = *a;
    let shift = 1e-10 * scale;
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] += shift;
    }
    let third = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut v = [third, third * C64::new(0.6, 0.8), third * C64::new(-0.28, 0.96)];
    for _ in 0..4 {
        let next = solve3(&shifted, &v)?;
        let n = vec_norm(&next);
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        v = next.map(|x| x / n);
    }
    Some(v)
}

/// True when `e` is within [`COALESCENCE_TOL`] of another root of `h`'s
/// characteristic polynomial (found by deflating out `e`).
fn is_coalesced(h: &Mat3, e: C64) -> bool {
    let c = characteristic_coefficients(h);
    let b = c.a1 + e;
    let q = c.a2 + e * b;
    let disc = (b * b - 4.0 * q).sqrt();
    let r1 = (-b + disc) / 2.0;
    let r2 = (-b - disc) / 2.0;
    (r1 - e).norm() < COALESCENCE_TOL || (r2 - e).norm() < COALESCENCE_TOL
}

/// Right eigenvector of `h` for eigenvalue `e`, from the null space of
/// `h − e·I`.
///
/// The null vector is the cross product of the two most independent rows
/// (largest cross-product norm); when every cross product is below `1e−12`
/// relative to the row scale, shifted inverse iteration takes over. The
/// result has unit norm in the canonical gauge.
pub fn right_eigenvector(h: &Mat3, e: C64) -> Result<Eigenvector> {
    let mut a = *h;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= e;
    }
    let row_scale = a.iter().map(vec_norm).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let candidates = [cross(&a[0], &a[1]), cross(&a[1], &a[2]), cross(&a[2], &a[0])];
    let best = candidates
        .iter()
        .max_by(|x, y| vec_norm(x).partial_cmp(&vec_norm(y)).unwrap())
        .copied()
        .unwrap();
    let v = if vec_norm(&best) >= 1e-12 * row_scale * row_scale {
        normalized(best)
    } else {
        inverse_iteration(&a, row_scale.max(1.0)).unwrap_or([
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
    };
    let v = canonical_gauge(&v);
    let residual = vec_norm(&mat_vec(&a, &v));
    let tolerance = EIGENVECTOR_RESIDUAL_TOL * frobenius(h).max(1.0);
    if !(residual <= tolerance) {
        return Err(Error::NotAnEigenvalue { residual, tolerance });
    }
    Ok(Eigenvector { vector: v, degenerate: is_coalesced(h, e) })
}

/// Cardano eigenvalues (and optionally eigenvectors) of the Hamiltonian at `p`.
pub fn eigen_frame(cfg: &SystemConfig, p: &ControlPoint, with_vectors: bool) -> Result<EigenFrame> {
    let coeffs = secular_coefficients(cfg, p);
    let mut frame = cardano_roots(&coeffs);
    frame.degenerate = frame.min_gap() < COALESCENCE_TOL;
    if with_vectors {
        let h = build_hamiltonian(cfg, p);
        let mut vecs = [[C64::new(0.0, 0.0); 3]; 3];
        for k in 0..3 {
            let ev = right_eigenvector(&h, frame.values[k])?;
            vecs[k] = ev.vector;
            frame.degenerate |= ev.degenerate;
        }
        frame.vectors = Some(vecs);
    }
    Ok(frame)
}
