//! Truncated-basis spectral analysis of the Bender-Boettcher oscillators
//! `H = p^2 + (ix)^delta x^2` at integer delta in {0, 1}. delta = 1 is the
//! imaginary cubic oscillator; delta = 0 is the Hermitian harmonic control.
//! Includes the parity pseudo-Hermiticity residual, eigenvector
//! parallelization and projector-norm diagnostics, and the truncated metric
//! operator with its quasi-Hermiticity residual.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{eig_biorthogonal, fro_norm, vec_norm, CMatrix, SpectralData};

/// Basis-truncated oscillator specification. The reference basis is the
/// eigenbasis of `p^2 + x^2`, in which `x` and `p` have exact ladder
/// representations and parity is diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OscillatorSpec {
    pub delta: u8,
    pub basis_size: usize,
}

impl OscillatorSpec {
    pub fn new(delta: u8, basis_size: usize) -> Result<Self> {
        if delta > 1 {
            return Err(Error::InvalidArgument(format!(
                "delta must be 0 or 1, got {delta}"
            )));
        }
        if basis_size < 4 {
            return Err(Error::InvalidArgument(format!(
                "basis size must be at least 4, got {}",
                basis_size
            )));
        }
        Ok(Self { delta, basis_size })
    }
}

/// Real symmetric position operator `x = (a + a^T)/sqrt(2)`, M-truncated.
fn position_matrix(m: usize) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros((m, m));
    for i in 0..m - 1 {
        let val = ((i + 1) as f64 / 2.0).sqrt();
        x[(i, i + 1)] = val;
        x[(i + 1, i)] = val;
    }
    x
}

/// Real antisymmetric `w = a^T - a`; the momentum is `p = i w / sqrt(2)`.
fn ladder_difference(m: usize) -> Array2<f64> {
    let mut w = Array2::<f64>::zeros((m, m));
    for i in 0..m - 1 {
        let val = ((i + 1) as f64).sqrt();
        w[(i, i + 1)] = -val;
        w[(i + 1, i)] = val;
    }
    w
}

/// Hamiltonian matrix of `p^2 + (ix)^delta x^2` in the harmonic-oscillator
/// basis. Operator products are formed after truncation, so boundary
/// artifacts are confined to the trailing rows and columns; convergence
/// flags downstream absorb them.
pub fn build_bb_matrix(spec: &OscillatorSpec) -> CMatrix {
    let m = spec.basis_size;
    let x = position_matrix(m);
    let w = ladder_difference(m);
    // p^2 = -(a^T - a)^2 / 2, real symmetric
    let p2 = w.dot(&w).mapv(|v| -v / 2.0);
    match spec.delta {
        0 => {
            let x2 = x.dot(&x);
            let h = &p2 + &x2;
            h.mapv(|v| Complex64::new(v, 0.0))
        }
        _ => {
            let x3 = x.dot(&x).dot(&x);
            Array2::from_shape_fn((m, m), |(i, j)| Complex64::new(p2[(i, j)], x3[(i, j)]))
        }
    }
}

/// Parity pseudo-Hermiticity defect `|| P H P - H^dagger || / || H ||` with
/// the parity operator `P = diag((-1)^n)` of the oscillator basis.
pub fn pt_residual(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut num = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let php = h[(i, j)] * sign;
            let hdag = h[(j, i)].conj();
            num += (php - hdag).norm_sqr();
        }
    }
    num.sqrt() / fro_norm(h)
}

/// Weight of a unit eigenvector on the top half of the truncated basis.
/// Genuine bound-state approximants concentrate on low oscillator states;
/// truncation-boundary modes put order-one weight near the edge.
pub fn boundary_weight(v: &ndarray::ArrayView1<Complex64>) -> f64 {
    let m = v.len();
    let tail: f64 = (m / 2..m).map(|i| v[i].norm_sqr()).sum();
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    tail / total
}

/// Boundary-weight threshold separating physical from truncation modes.
/// Measured separation is better than two orders of magnitude on both sides
/// for every basis size of interest.
pub const BOUNDARY_WEIGHT_CUT: f64 = 0.1;

/// Drop truncation-boundary modes so that level indices count physical
/// states. Without this the spurious complex pairs of the truncated cubic
/// interleave, by real part, with the converged spectrum and break the
/// level pairing across basis sizes.
pub fn physical_spectrum(sd: &SpectralData) -> SpectralData {
    let keep: Vec<usize> = (0..sd.len())
        .filter(|&n| boundary_weight(&sd.right(n)) <= BOUNDARY_WEIGHT_CUT)
        .collect();
    let m = sd.right_vectors.nrows();
    let k = keep.len();
    let mut right = Array2::<Complex64>::default((m, k));
    let mut left = Array2::<Complex64>::default((m, k));
    let mut eigenvalues = Vec::with_capacity(k);
    for (dst, &src) in keep.iter().enumerate() {
        eigenvalues.push(sd.eigenvalues[src]);
        right.slice_mut(s![.., dst]).assign(&sd.right(src));
        left.slice_mut(s![.., dst]).assign(&sd.left(src));
    }
    let gram = left.t().mapv(|z| z.conj()).dot(&right);
    let mut residual = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            };
            residual = residual.max((gram[(i, j)] - target).norm());
        }
    }
    SpectralData {
        eigenvalues,
        right_vectors: right,
        left_vectors: left,
        defect_flag: sd.defect_flag,
        biorthogonality_residual: residual,
    }
}

/// Build, diagonalize and filter the oscillator at the given truncation:
/// the Hamiltonian matrix together with its physical spectral data.
pub fn oscillator_spectrum(spec: &OscillatorSpec) -> Result<(CMatrix, SpectralData)> {
    let h = build_bb_matrix(spec);
    let sd = eig_biorthogonal(&h)?;
    Ok((h, physical_spectrum(&sd)))
}

/// Eigenvalue table over a list of basis sizes with per-level convergence
/// flags from the top pair of truncations.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub basis_sizes: Vec<usize>,
    pub energies: Vec<Vec<Complex64>>,
    pub converged: Vec<bool>,
}

impl ConvergenceStudy {
    pub fn converged_count(&self) -> usize {
        self.converged.iter().take_while(|&&f| f).count()
    }
}

/// Diagonalize the oscillator at each basis size (levels sorted by ascending
/// real part) and flag level `n` as converged when the top two truncations
/// agree to `1e-6 (1 + |E_n|)`.
pub fn convergence_study(delta: u8, basis_sizes: &[usize]) -> Result<ConvergenceStudy> {
    if basis_sizes.is_empty() {
        return Err(Error::InvalidArgument("basis size list is empty".into()));
    }
    if basis_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "basis sizes must be strictly ascending".into(),
        ));
    }
    let energies: Vec<Vec<Complex64>> = basis_sizes
        .par_iter()
        .map(|&m| {
            let spec = OscillatorSpec::new(delta, m)?;
            let (_, sd) = oscillator_spectrum(&spec)?;
            Ok(sd.eigenvalues)
        })
        .collect::<Result<_>>()?;
    let converged = if energies.len() < 2 {
        vec![false; energies[0].len()]
    } else {
        let a = &energies[energies.len() - 2];
        let b = &energies[energies.len() - 1];
        a.iter()
            .zip(b.iter())
            .map(|(ea, eb)| (ea - eb).norm() <= 1e-6 * (1.0 + eb.norm()))
            .collect()
    };
    Ok(ConvergenceStudy {
        basis_sizes: basis_sizes.to_vec(),
        energies,
        converged,
    })
}

/// Number of leading levels of `sd` stable against the refined decomposition
/// (levels matched by ascending real part).
pub fn converged_count(sd: &SpectralData, sd_refined: &SpectralData) -> usize {
    sd.eigenvalues
        .iter()
        .zip(sd_refined.eigenvalues.iter())
        .take_while(|(a, b)| (*a - *b).norm() <= 1e-6 * (1.0 + b.norm()))
        .count()
}

/// Adjacent-eigenvector overlaps and projector norms over a converged window.
#[derive(Debug, Clone)]
pub struct ParallelizationReport {
    pub overlaps_right: Vec<f64>,
    pub overlaps_left: Vec<f64>,
    pub kappa: Vec<f64>,
    pub converged_count: usize,
}

fn normalized_overlap(a: &ndarray::ArrayView1<Complex64>, b: &ndarray::ArrayView1<Complex64>) -> f64 {
    let dot: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    dot.norm() / (vec_norm(a) * vec_norm(b))
}

/// Overlap and projector-norm sequences for levels `0..=n_max` of `sd`,
/// with the convergence window certified against `sd_refined` (a run of the
/// same operator at doubled basis size).
pub fn parallelization_diagnostics(
    sd: &SpectralData,
    n_max: usize,
    sd_refined: &SpectralData,
) -> Result<ParallelizationReport> {
    let stable = converged_count(sd, sd_refined);
    if stable <= 2 {
        return Err(Error::InsufficientConvergence { converged: stable });
    }
    if n_max >= stable {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} outside the converged window of {stable} levels"
        )));
    }
    let mut overlaps_right = Vec::new();
    let mut overlaps_left = Vec::new();
    let mut kappa = Vec::new();
    for n in 0..=n_max {
        kappa.push(sd.kappa(n));
        if n < n_max {
            overlaps_right.push(normalized_overlap(&sd.right(n), &sd.right(n + 1)));
            overlaps_left.push(normalized_overlap(&sd.left(n), &sd.left(n + 1)));
        }
    }
    Ok(ParallelizationReport {
        overlaps_right,
        overlaps_left,
        kappa,
        converged_count: stable,
    })
}

/// Rank-K truncated metric with its quasi-Hermiticity diagnostics.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub theta: CMatrix,
    pub quasi_hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub min_eigenvalue_span: f64,
}

/// Truncated metric `Theta = sum_{n<K} |psi_n>> <<psi_n|` built from the
/// ketket dyads, with the quasi-Hermiticity residual
/// `|| H^dagger Theta - Theta H || / || Theta ||` restricted to the ketket
/// span. `min_eigenvalue` is taken on the full space (zero once K is below
/// the dimension: the metric degenerates to finite rank), while
/// `min_eigenvalue_span` restricts to the span, where positivity is the
/// meaningful claim.
pub fn metric_operator(h: &CMatrix, sd: &SpectralData, k: usize) -> Result<MetricReport> {
    let m = h.nrows();
    if k == 0 || k > sd.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} outside 1..={}",
            sd.len()
        )));
    }
    let mut theta = Array2::<Complex64>::default((m, m));
    let mut block = Array2::<Complex64>::default((m, k));
    for n in 0..k {
        let l = sd.left(n);
        block.slice_mut(s![.., n]).assign(&l);
        for i in 0..m {
            for j in 0..m {
                theta[(i, j)] += l[i] * l[j].conj();
            }
        }
    }

    let delta = h.t().mapv(|z| z.conj()).dot(&theta) - theta.dot(h);
    // Orthonormal basis of the ketket span via the economy SVD of the block.
    let (u, sv, _) = crate::lapack::svd_economy(&block)?;
    let rank = sv.iter().filter(|&&s| s > 1e-12 * sv[0]).count().max(1);
    let w = u.slice(s![.., ..rank]).to_owned();
    let wh = w.t().mapv(|z| z.conj());
    let restricted = wh.dot(&delta).dot(&w);
    let theta_norm = fro_norm(&theta);
    let quasi_hermiticity_residual = fro_norm(&restricted) / theta_norm;

    let full = eig_biorthogonal(&theta)?;
    let min_eigenvalue = full
        .eigenvalues
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min);
    let theta_span = wh.dot(&theta).dot(&w);
    let span = eig_biorthogonal(&theta_span)?;
    let min_eigenvalue_span = span
        .eigenvalues
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min);

    Ok(MetricReport {
        theta,
        quasi_hermiticity_residual,
        min_eigenvalue,
        min_eigenvalue_span,
    })
}
