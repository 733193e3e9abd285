//! First-order perturbation scheme on the bidiagonal canonical form at
//! partition index zero: forward substitution through the triangular
//! structure, closure of the first-order energy ambiguity by boundary
//! truncation, and a direct-eigensolve cross-reference.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{eig_biorthogonal, CMatrix, CVector, SpectralData};

/// How the first-order energy coefficient was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// E1 supplied by the caller (equivalently, psi_1^[1] prescribed).
    PrescribedPsi11,
    /// E1 chosen as the unique root of psi_{N_trunc}^[1](E1) = 0.
    BoundaryZero,
}

/// First-order output: the unperturbed energy, the first-order energy
/// coefficient, and the first-order wave-function components.
#[derive(Debug, Clone)]
pub struct FirstOrderResult {
    pub e0: Complex64,
    pub e1: Complex64,
    /// psi1[j] = psi_j^[1]; the zeroth component is gauged to zero.
    pub psi1: CVector,
    pub residual: f64,
    pub closure: Closure,
}

fn validate_inputs(
    energies: &[Complex64],
    v: &CMatrix,
    psi0_0: Complex64,
    n_trunc: usize,
) -> Result<()> {
    if n_trunc < 2 {
        return Err(Error::InvalidArgument("N_trunc must be at least 2".into()));
    }
    if energies.len() < n_trunc {
        return Err(Error::InvalidArgument(format!(
            "need {n_trunc} unperturbed energies, got {}",
            energies.len()
        )));
    }
    if v.nrows() < n_trunc || v.ncols() < 1 {
        return Err(Error::InvalidArgument(format!(
            "perturbation must cover {n_trunc} rows, got {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    if psi0_0.norm() == 0.0 {
        return Err(Error::InvalidArgument("psi_0(0) must be nonzero".into()));
    }
    for i in 0..n_trunc {
        for j in i + 1..n_trunc {
            let gap = (energies[i] - energies[j]).norm();
            if gap < 1e-10 {
                return Err(Error::DegenerateSpectrum { i, j, gap });
            }
        }
    }
    Ok(())
}

/// Forward substitution through the first-order equation with the energy
/// coefficient prescribed: `psi_1^[1] = (E1 - V_00) psi_0(0)` and
/// `psi_{j+1}^[1] = (E_0 - E_j) psi_j^[1] - V_{j0} psi_0(0)` for j >= 1.
/// The returned residual re-evaluates the substituted rows and is zero up
/// to rounding.
pub fn first_order_forward(
    energies: &[Complex64],
    v: &CMatrix,
    psi0_0: Complex64,
    e1: Complex64,
    n_trunc: usize,
) -> Result<FirstOrderResult> {
    validate_inputs(energies, v, psi0_0, n_trunc)?;
    let e0 = energies[0];
    let mut psi1 = Array1::<Complex64>::default(n_trunc + 1);
    psi1[1] = (e1 - v[(0, 0)]) * psi0_0;
    for j in 1..n_trunc {
        psi1[j + 1] = (e0 - energies[j]) * psi1[j] - v[(j, 0)] * psi0_0;
    }
    // rows 0..N_trunc-2 of the first-order equation after substitution
    let mut residual_sq = 0.0f64;
    for j in 0..n_trunc - 1 {
        let drive = if j == 0 {
            e1 * psi0_0
        } else {
            Complex64::default()
        };
        let row = (energies[j] - e0) * psi1[j] + psi1[j + 1] + v[(j, 0)] * psi0_0 - drive;
        residual_sq += row.norm_sqr();
    }
    Ok(FirstOrderResult {
        e0,
        e1,
        psi1,
        residual: residual_sq.sqrt(),
        closure: Closure::PrescribedPsi11,
    })
}

/// Close the first-order ambiguity by demanding that the propagated
/// component at the truncation boundary vanishes. The boundary component is
/// affine in E1, so a single Newton step from the diagonal matrix element
/// lands on the unique root.
pub fn closure_boundary_zero(
    energies: &[Complex64],
    v: &CMatrix,
    psi0_0: Complex64,
    n_trunc: usize,
) -> Result<FirstOrderResult> {
    validate_inputs(energies, v, psi0_0, n_trunc)?;
    let seed = v[(0, 0)];
    let at_seed = first_order_forward(energies, v, psi0_0, seed, n_trunc)?;
    let shifted = first_order_forward(
        energies,
        v,
        psi0_0,
        seed + Complex64::new(1.0, 0.0),
        n_trunc,
    )?;
    let slope = shifted.psi1[n_trunc] - at_seed.psi1[n_trunc];
    if slope.norm() < 1e-14 {
        return Err(Error::DegenerateClosure {
            slope: slope.norm(),
        });
    }
    let e1 = seed - at_seed.psi1[n_trunc] / slope;
    let mut result = first_order_forward(energies, v, psi0_0, e1, n_trunc)?;
    result.closure = Closure::BoundaryZero;
    Ok(result)
}

/// Upper-bidiagonal canonical form at partition index zero: the given
/// energies on the diagonal, ones on the superdiagonal.
pub fn iep_jordan_matrix(energies: &[Complex64]) -> CMatrix {
    let n = energies.len();
    let mut m = Array2::<Complex64>::default((n, n));
    for (i, &e) in energies.iter().enumerate() {
        m[(i, i)] = e;
        if i + 1 < n {
            m[(i, i + 1)] = Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// Eigensolve of the perturbed truncation, levels paired to the unperturbed
/// diagonal by minimal displacement.
#[derive(Debug, Clone)]
pub struct DirectReference {
    pub spectral: SpectralData,
    /// paired[i] is the perturbed eigenvalue assigned to diagonal level i.
    pub paired: Vec<Complex64>,
    pub displacements: Vec<f64>,
}

pub fn direct_reference(j_iep: &CMatrix, v: &CMatrix, lambda: f64) -> Result<DirectReference> {
    let n = j_iep.nrows();
    if j_iep.ncols() != n || v.dim() != (n, n) {
        return Err(Error::InvalidArgument(
            "canonical form and perturbation must be conforming squares".into(),
        ));
    }
    let perturbed = j_iep + &v.mapv(|x| x * Complex64::new(lambda, 0.0));
    let sd = eig_biorthogonal(&perturbed)?;
    let mut used = vec![false; n];
    let mut paired = Vec::with_capacity(n);
    let mut displacements = Vec::with_capacity(n);
    for i in 0..n {
        let target = j_iep[(i, i)];
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &ev) in sd.eigenvalues.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (ev - target).norm();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        used[best] = true;
        paired.push(sd.eigenvalues[best]);
        displacements.push(best_d);
    }
    Ok(DirectReference {
        spectral: sd,
        paired,
        displacements,
    })
}
