//! Finite matrices supporting exceptional points: Jordan blocks, the
//! antisymmetrically coupled tridiagonal chain family, parameter-sweep EP
//! localization, and Jordan-chain construction of the transition matrix.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{
    cond2, eig_biorthogonal, fro_norm, least_squares_min_norm, nullspace_vector,
    rank_with_rtol, vec_norm, CMatrix, Lu,
};

/// N x N Jordan block: eta on the diagonal, 1 on the superdiagonal.
pub fn jordan_block(n: usize, eta: Complex64) -> CMatrix {
    let mut m = Array2::<Complex64>::default((n, n));
    for i in 0..n {
        m[(i, i)] = eta;
        if i + 1 < n {
            m[(i, i + 1)] = Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// Location of a coalescence point on a coupling ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatedEp {
    pub t_ep: f64,
    pub e_ep: Complex64,
    pub gap_at_ep: f64,
}

/// Tridiagonal 2J x 2J chain family: diagonal 2J-1, 2J-3, ..., 1-2J with
/// couplings +c_k on the superdiagonal and -c_k on the subdiagonal,
/// symmetric about the center. The couplings are `t` times a fixed direction
/// through coupling space, ordered outermost to innermost.
#[derive(Debug, Clone)]
pub struct EPNModel {
    pub half_dimension: usize,
    pub coupling_direction: Vec<f64>,
    pub t: f64,
    pub located_ep: Option<LocatedEp>,
}

impl EPNModel {
    pub fn new(half_dimension: usize, coupling_direction: Vec<f64>) -> Result<Self> {
        if half_dimension == 0 {
            return Err(Error::InvalidArgument("J must be at least 1".into()));
        }
        if coupling_direction.len() != half_dimension {
            return Err(Error::InvalidArgument(format!(
                "direction has {} entries, expected J = {}",
                coupling_direction.len(),
                half_dimension
            )));
        }
        if coupling_direction.iter().any(|&c| !c.is_finite() || c < 0.0) {
            return Err(Error::InvalidArgument(
                "direction entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            half_dimension,
            coupling_direction,
            t: 0.0,
            located_ep: None,
        })
    }

    pub fn dimension(&self) -> usize {
        2 * self.half_dimension
    }

    /// Realized Hamiltonian at parameter `t` (real entries).
    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let n = self.dimension();
        let j = self.half_dimension;
        let mut m = Array2::<Complex64>::default((n, n));
        for i in 0..n {
            m[(i, i)] = Complex64::new((2 * j) as f64 - 1.0 - 2.0 * i as f64, 0.0);
        }
        for k in 1..n {
            // bond k couples rows k-1 and k; direction index counts inward
            let dir = self.coupling_direction[k.min(n - k) - 1];
            let c = Complex64::new(t * dir, 0.0);
            m[(k - 1, k)] = c;
            m[(k, k - 1)] = -c;
        }
        m
    }
}

/// Coupling ray along which the chain family reaches a full 2J-fold
/// coalescence at t = 1 with all eigenvalues 2m sqrt(1 - t^2).
pub fn standard_direction(half_dimension: usize) -> Vec<f64> {
    let n = 2 * half_dimension;
    (1..=half_dimension)
        .map(|k| ((k * (n - k)) as f64).sqrt())
        .collect()
}

/// Realized chain Hamiltonian at the model's stored parameter.
pub fn chain_hamiltonian(model: &EPNModel) -> CMatrix {
    model.hamiltonian_at(model.t)
}

/// Per-grid-point coalescence diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub t: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub max_overlap: f64,
    pub defective: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub located: LocatedEp,
}

fn sweep_point(model: &EPNModel, t: f64) -> Result<SweepPoint> {
    let h = model.hamiltonian_at(t);
    let scale = fro_norm(&h).max(1.0);
    let sd = eig_biorthogonal(&h)?;
    let n = sd.len();
    let mut min_gap = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    let mut max_overlap: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let gap = (sd.eigenvalues[i] - sd.eigenvalues[j]).norm();
            min_gap = min_gap.min(gap);
            max_gap = max_gap.max(gap);
            let ov: Complex64 = sd
                .right(i)
                .iter()
                .zip(sd.right(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            max_overlap = max_overlap.max(ov.norm());
        }
    }
    if n == 1 {
        min_gap = 0.0;
    }
    // Indicator that the ray has passed its coalescence point: the spectrum
    // of the real chain family complexifies there.
    let complexified = sd
        .eigenvalues
        .iter()
        .any(|ev| ev.im.abs() > 1e-8 * scale);
    Ok(SweepPoint {
        t,
        min_gap,
        max_gap,
        max_overlap,
        defective: complexified || sd.defect_flag,
    })
}

/// Sweep the coupling ray over `t_grid`, locate the coalescence point by
/// bisection on the complexification indicator, and store it in the model.
pub fn ep_sweep(model: &mut EPNModel, t_grid: &[f64]) -> Result<SweepReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("t grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t grid must be ascending".into()));
    }
    let points: Vec<SweepPoint> = t_grid
        .par_iter()
        .map(|&t| sweep_point(model, t))
        .collect::<Result<_>>()?;

    // Bracket the indicator flip; when the grid never flips, expand from the
    // max-gap minimizer (monotone families put it at the grid edge).
    let bracket = points
        .windows(2)
        .find(|w| !w[0].defective && w[1].defective)
        .map(|w| (w[0].t, w[1].t));
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None if points[0].defective => {
            // Entire grid past the coalescence: expand downward.
            let mut lo = t_grid[0];
            let mut found = None;
            for _ in 0..70 {
                lo = if lo.abs() < 1e-12 { -1.0 } else { lo * 0.5 };
                if !sweep_point(model, lo)?.defective {
                    found = Some((lo, t_grid[0]));
                    break;
                }
            }
            found.ok_or_else(|| Error::NoCoalescence {
                t: t_grid[0],
                gap: points[0].max_gap,
                tol: 0.0,
            })?
        }
        None => {
            let k = points
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.max_gap.total_cmp(&b.1.max_gap))
                .map(|(i, _)| i)
                .expect("nonempty grid");
            let start = points[k].t;
            let mut step = t_grid
                .windows(2)
                .last()
                .map(|w| w[1] - w[0])
                .unwrap_or(1e-3)
                .max(1e-6);
            let mut lo = start;
            let mut found = None;
            for _ in 0..70 {
                let hi = lo + step;
                if sweep_point(model, hi)?.defective {
                    found = Some((lo, hi));
                    break;
                }
                lo = hi;
                step *= 2.0;
            }
            match found {
                Some(b) => b,
                None => {
                    let p = &points[k];
                    let scale = fro_norm(&model.hamiltonian_at(p.t)).max(1.0);
                    return Err(Error::NoCoalescence {
                        t: p.t,
                        gap: p.max_gap,
                        tol: 1e-4 * scale,
                    });
                }
            }
        }
    };

    // Bisection to the contracted relative width. Indicator noise near a
    // high-order coalescence (eigenvalue scatter scales like the N-th root
    // of machine precision) limits where the flip is seen, so a second,
    // noise-immune refinement follows.
    for _ in 0..60 {
        let width_tol = 1e-10 * hi.abs().max(1.0);
        if hi - lo <= width_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sweep_point(model, mid)?.defective {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mid = 0.5 * (lo + hi);

    // Golden-section on the Jordan-canonicalization residual (with the
    // eigenvalue gap as a surrogate outside the zone where the chain
    // construction is defined). The residual falls linearly to machine
    // precision at the coalescence point and is immune to the scatter that
    // stalls the indicator.
    let w = (1e-3 * mid.abs().max(1.0)).max(16.0 * (hi - lo));
    let t_ep = golden_min(&|t| coalescence_objective(model, t), mid - w, mid + w, 100);

    let h = model.hamiltonian_at(t_ep);
    let scale = fro_norm(&h).max(1.0);
    let at_ep = sweep_point(model, t_ep)?;
    let sd = eig_biorthogonal(&h)?;
    let e_ep = sd.eigenvalues.iter().sum::<Complex64>() / Complex64::new(sd.len() as f64, 0.0);
    // A full coalescence is certified either by the measured gap or, where
    // eigensolver scatter saturates the gap at high order, by the Jordan
    // canonicalization succeeding to tight residual.
    let tol = 1e-4 * scale;
    if at_ep.max_gap > tol {
        let certified = transition_matrix(&h, e_ep)
            .map(|tm| tm.similarity_residual <= 1e-8)
            .unwrap_or(false);
        if !certified {
            return Err(Error::NoCoalescence {
                t: t_ep,
                gap: at_ep.max_gap,
                tol,
            });
        }
    }
    let located = LocatedEp {
        t_ep,
        e_ep,
        gap_at_ep: at_ep.max_gap,
    };
    model.located_ep = Some(located);
    Ok(SweepReport { points, located })
}

/// Canonicalization residual at `t`, falling back to an offset eigenvalue
/// gap where the chain construction is undefined; unimodal across the
/// coalescence point.
fn coalescence_objective(model: &EPNModel, t: f64) -> f64 {
    let h = model.hamiltonian_at(t);
    let sd = match eig_biorthogonal(&h) {
        Ok(sd) => sd,
        Err(_) => return f64::INFINITY,
    };
    let n = sd.len();
    let mut max_gap = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            max_gap = max_gap.max((sd.eigenvalues[i] - sd.eigenvalues[j]).norm());
        }
    }
    let e_mean = sd.eigenvalues.iter().sum::<Complex64>() / Complex64::new(n as f64, 0.0);
    match transition_matrix(&h, e_mean) {
        Ok(tm) => tm.similarity_residual,
        Err(_) => 1.0 + max_gap,
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Jordan chain of a matrix at an exceptional point, arranged as columns of
/// the transition matrix R with `H R = R J^(N)(E_ep)`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub r: CMatrix,
    pub jordan_eigenvalue: Complex64,
    pub similarity_residual: f64,
    pub inverse_condition: f64,
}

/// Build the canonical Jordan chain of `h` at `e_ep`: the kernel vector is
/// unit-norm with its first significant component real positive, and every
/// higher chain vector is the minimal-norm solve projected orthogonal to it.
pub fn transition_matrix(h: &CMatrix, e_ep: Complex64) -> Result<TransitionMatrix> {
    let n = h.nrows();
    if h.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument(
            "transition matrix needs a nonempty square H".into(),
        ));
    }
    let scale = fro_norm(h).max(1.0);
    let mut shifted = h.clone();
    for d in 0..n {
        shifted[(d, d)] -= e_ep;
    }
    let rank = rank_with_rtol(&shifted, 1e-8)?;
    let nullity = n - rank;
    if nullity != 1 {
        return Err(Error::NotAnEp {
            reason: format!("H - E has nullity {nullity}, expected 1"),
        });
    }
    // Nilpotency of index N separates a genuine EP from a matrix that merely
    // has a simple kernel at E_ep. The chain solves below re-check this
    // column by column, so the power test is only run at small dimensions.
    if n <= 64 {
        let shifted_norm = fro_norm(&shifted);
        if shifted_norm > 0.0 {
            let normalized = shifted.mapv(|z| z / shifted_norm);
            let mut power = normalized.clone();
            for _ in 1..n {
                power = power.dot(&normalized);
            }
            let defect = fro_norm(&power);
            if defect > 1e-6 {
                return Err(Error::NotAnEp {
                    reason: format!("(H - E)^{n} has relative norm {defect:.3e}"),
                });
            }
        }
    }

    let mut psi0 = nullspace_vector(&shifted)?;
    // first significant component real positive
    if let Some(idx) = psi0.iter().position(|z| z.norm() > 1e-10) {
        let phase = psi0[idx].conj() / psi0[idx].norm();
        psi0.mapv_inplace(|z| z * phase);
    }

    let mut r = Array2::<Complex64>::default((n, n));
    r.slice_mut(s![.., 0]).assign(&psi0);
    let mut prev = psi0.clone();
    for k in 1..n {
        let (mut psi, residual) = least_squares_min_norm(&shifted, &prev, 1e-8)?;
        if residual > 1e-6 * scale {
            return Err(Error::ChainBreakdown {
                column: k,
                residual,
            });
        }
        let overlap: Complex64 = psi0.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum();
        psi = psi - psi0.mapv(|z| z * overlap);
        r.slice_mut(s![.., k]).assign(&psi);
        prev = psi;
    }

    let j = jordan_block(n, e_ep);
    let similarity_residual = verify_jordan_form(h, &r, &j)?;
    let inverse_condition = cond2(&r)?;
    Ok(TransitionMatrix {
        r,
        jordan_eigenvalue: e_ep,
        similarity_residual,
        inverse_condition,
    })
}

/// Relative similarity defect || R^-1 H R - J || / || H || (Frobenius).
pub fn verify_jordan_form(h: &CMatrix, r: &CMatrix, j_matrix: &CMatrix) -> Result<f64> {
    let n = h.nrows();
    if h.ncols() != n || r.dim() != (n, n) || j_matrix.dim() != (n, n) {
        return Err(Error::InvalidArgument(
            "verify_jordan_form needs conforming square matrices".into(),
        ));
    }
    let lu = Lu::factor(r)?;
    let hr = h.dot(r);
    let x = lu.solve_mat(&hr);
    let diff = &x - j_matrix;
    Ok(fro_norm(&diff) / fro_norm(h))
}

/// Chain-relation residuals: `(H - E) R` must shift columns of R down by one.
pub fn chain_residuals(h: &CMatrix, r: &CMatrix, e_ep: Complex64) -> Vec<f64> {
    let n = h.nrows();
    let mut shifted = h.clone();
    for d in 0..n {
        shifted[(d, d)] -= e_ep;
    }
    let prod = shifted.dot(r);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let col = prod.column(k);
        if k == 0 {
            out.push(vec_norm(&col));
        } else {
            let diff = &col - &r.column(k - 1);
            out.push(vec_norm(&diff.view()));
        }
    }
    out
}
