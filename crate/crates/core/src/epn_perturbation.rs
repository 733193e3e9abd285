//! Unfolding machinery around a finite exceptional point: the reduced
//! A/Z/r system of the perturbed Jordan-block eigenproblem, resolvent-series
//! and direct evaluation of the secular function, root finding, and the
//! benign/malign admissibility classifier with its rescaling identity.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;

use crate::epn_models::jordan_block;
use crate::error::{Error, Result};
use crate::numerics::{
    eig_biorthogonal, fro_norm, spectral_norm, spectral_radius_estimate, vec_norm, CMatrix,
    CVector, Lu,
};
use crate::stats::linear_fit;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The reduction of `[J^(N)(0) + lambda V - eps] Psi = 0` under `Psi_1 = 1`
/// into the square system `(A_inv + lambda Z) y = r` with slack `Omega_N`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub n: usize,
    pub epsilon: Complex64,
    pub lambda: f64,
    pub a: CMatrix,
    pub a_inv: CMatrix,
    pub z: CMatrix,
    pub r: CVector,
}

/// Assemble the reduced system: `A[i][j] = eps^(i-j)` on and below the
/// diagonal, its bidiagonal inverse, the column-shifted perturbation `Z`,
/// and the dedicated right-hand side `r`.
pub fn assemble_system(v: &CMatrix, epsilon: Complex64, lambda: f64) -> Result<ReducedSystem> {
    let n = v.nrows();
    if v.ncols() != n || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "perturbation must be square with N >= 2, got {}x{}",
            n,
            v.ncols()
        )));
    }
    let mut a = Array2::<Complex64>::default((n, n));
    for j in 0..n {
        let mut p = ONE;
        for i in j..n {
            a[(i, j)] = p;
            p *= epsilon;
        }
    }
    let mut a_inv = Array2::<Complex64>::default((n, n));
    for i in 0..n {
        a_inv[(i, i)] = ONE;
        if i > 0 {
            a_inv[(i, i - 1)] = -epsilon;
        }
    }
    let mut z = Array2::<Complex64>::default((n, n));
    for k in 0..n - 1 {
        let col = v.column(k + 1).to_owned();
        z.slice_mut(s![.., k]).assign(&col);
    }
    let mut r = Array1::<Complex64>::default(n);
    r[0] = epsilon - Complex64::new(lambda, 0.0) * v[(0, 0)];
    for i in 1..n {
        r[i] = -Complex64::new(lambda, 0.0) * v[(i, 0)];
    }
    Ok(ReducedSystem {
        n,
        epsilon,
        lambda,
        a,
        a_inv,
        z,
        r,
    })
}

/// Evaluation route for the secular function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecularMode {
    /// Truncated resolvent series of the stated order.
    Series(usize),
    /// Exact solve of the reduced linear system.
    Direct,
}

/// Solution vector `y = (Psi_2, ..., Psi_N, Omega_N)` of the reduced system.
pub fn secular_value(system: &ReducedSystem, mode: SecularMode) -> Result<CVector> {
    let lam = Complex64::new(system.lambda, 0.0);
    match mode {
        SecularMode::Series(order) => {
            let g = system.a.dot(&system.z).mapv(|x| x * lam);
            let rho = spectral_radius_estimate(&g);
            if rho >= 1.0 {
                return Err(Error::SeriesDiverges(rho));
            }
            let ar = system.a.dot(&system.r);
            let mut term = ar.clone();
            let mut y = ar;
            for _ in 0..order {
                term = g.dot(&term).mapv(|x| -x);
                y += &term;
            }
            Ok(y)
        }
        SecularMode::Direct => {
            let m = &system.a_inv + &system.z.mapv(|x| x * lam);
            Ok(Lu::factor(&m)?.solve(&system.r))
        }
    }
}

/// Direct `y` together with `dy/deps`, from one LU factorization.
fn secular_value_direct_with_derivative(
    v: &CMatrix,
    epsilon: Complex64,
    lambda: f64,
) -> Result<(CVector, CVector)> {
    let system = assemble_system(v, epsilon, lambda)?;
    let lam = Complex64::new(lambda, 0.0);
    let m = &system.a_inv + &system.z.mapv(|x| x * lam);
    let lu = Lu::factor(&m)?;
    let y = lu.solve(&system.r);
    // M y' = dr/deps - dM/deps y = e_0 + S y  (S has ones on the subdiagonal)
    let mut rhs = Array1::<Complex64>::default(system.n);
    rhs[0] = ONE;
    for i in 1..system.n {
        rhs[i] += y[i - 1];
    }
    let dy = lu.solve(&rhs);
    Ok((y, dy))
}

/// Which route produced a `SecularSolution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecularMethod {
    Series { order: usize },
    Direct,
}

/// Roots of the secular equation `y_N(eps) = 0` with their reality flags and
/// per-root solution vectors.
#[derive(Debug, Clone)]
pub struct SecularSolution {
    pub roots: Vec<Complex64>,
    pub reality_flags: Vec<bool>,
    pub y_vectors: Vec<CVector>,
    pub method: SecularMethod,
}

fn reality_flag(eps: Complex64) -> bool {
    eps.im.abs() <= 1e-8 + 1e-4 * eps.norm()
}

/// Find all roots of the secular equation inside the disk
/// `|eps| <= 2 (lambda ||V|| + lambda^(1/N))`.
///
/// Direct mode seeds with the spectrum of `J^(N)(0) + lambda V` and polishes
/// each seed by Newton iteration on the exactly solved `y_N`; series mode
/// runs Newton from the N-th roots of `lambda ||V||` on the truncated
/// resolvent series.
pub fn solve_secular(v: &CMatrix, lambda: f64, mode: SecularMode) -> Result<SecularSolution> {
    let n = v.nrows();
    if v.ncols() != n || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "perturbation must be square with N >= 2, got {}x{}",
            n,
            v.ncols()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    let vnorm = spectral_norm(v)?;
    let strength = lambda * vnorm;
    let disk = 2.0 * (strength + lambda.powf(1.0 / n as f64));

    // Unperturbed limit: the N-fold degenerate root at the origin.
    if strength < 1e-300 {
        let system = assemble_system(v, Complex64::default(), lambda)?;
        let y = secular_value(&system, SecularMode::Direct)?;
        return Ok(SecularSolution {
            roots: vec![Complex64::default(); n],
            reality_flags: vec![true; n],
            y_vectors: vec![y; n],
            method: match mode {
                SecularMode::Series(order) => SecularMethod::Series { order },
                SecularMode::Direct => SecularMethod::Direct,
            },
        });
    }

    let roots = match mode {
        SecularMode::Direct => {
            let mut perturbed = jordan_block(n, Complex64::default());
            perturbed = perturbed + v.mapv(|x| x * Complex64::new(lambda, 0.0));
            let sd = eig_biorthogonal(&perturbed)?;
            sd.eigenvalues
                .iter()
                .map(|&seed| polish_direct(v, lambda, seed))
                .collect::<Result<Vec<_>>>()?
        }
        SecularMode::Series(order) => {
            let radius = strength.powf(1.0 / n as f64);
            let mut roots = Vec::new();
            for j in 0..n {
                let angle = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                let seed = Complex64::from_polar(radius, angle);
                let root = newton_series(v, lambda, order, seed, radius)?;
                roots.push(root);
            }
            dedupe(roots, 1e-7 * radius.max(1e-300))
        }
    };

    let mut kept = Vec::new();
    let mut flags = Vec::new();
    let mut ys = Vec::new();
    for &root in &roots {
        if root.norm() > disk {
            continue;
        }
        let system = assemble_system(v, root, lambda)?;
        let y = secular_value(&system, mode)?;
        let y_n = y[n - 1].norm();
        let r_norm = vec_norm(&system.r.view());
        if y_n > 1e-8 * r_norm + 1e-14 {
            return Err(Error::RootFindingFailure { seed: root });
        }
        kept.push(root);
        flags.push(reality_flag(root));
        ys.push(y);
    }
    Ok(SecularSolution {
        roots: kept,
        reality_flags: flags,
        y_vectors: ys,
        method: match mode {
            SecularMode::Series(order) => SecularMethod::Series { order },
            SecularMode::Direct => SecularMethod::Direct,
        },
    })
}

fn polish_direct(v: &CMatrix, lambda: f64, seed: Complex64) -> Result<Complex64> {
    let n = v.nrows();
    let mut eps = seed;
    for _ in 0..6 {
        let (y, dy) = secular_value_direct_with_derivative(v, eps, lambda)?;
        let y_n = y[n - 1];
        let dy_n = dy[n - 1];
        if dy_n.norm() < 1e-14 {
            break;
        }
        let step = y_n / dy_n;
        // A correct seed is already within eigensolver accuracy; a polish
        // step that jumps far means we sit near a multiple root where the
        // seed itself is the better answer.
        if step.norm() > 0.1 * (seed.norm() + 1.0) {
            break;
        }
        eps -= step;
        if step.norm() <= 1e-15 * eps.norm().max(1.0) {
            break;
        }
    }
    Ok(eps)
}

fn newton_series(
    v: &CMatrix,
    lambda: f64,
    order: usize,
    seed: Complex64,
    scale: f64,
) -> Result<Complex64> {
    let mut eps = seed;
    let h_base = 1e-7 * scale.max(1e-12);
    for _ in 0..60 {
        let y_n = series_y_n(v, lambda, order, eps)?;
        if y_n.norm() <= 1e-14 * scale.max(1.0) {
            return Ok(eps);
        }
        let h = Complex64::new(h_base.max(1e-9 * eps.norm()), 0.0);
        let plus = series_y_n(v, lambda, order, eps + h)?;
        let minus = series_y_n(v, lambda, order, eps - h)?;
        let deriv = (plus - minus) / (2.0 * h);
        if deriv.norm() < 1e-300 {
            return Err(Error::RootFindingFailure { seed });
        }
        let step = y_n / deriv;
        eps -= step;
        if step.norm() <= 1e-13 * eps.norm().max(scale) {
            return Ok(eps);
        }
    }
    Err(Error::RootFindingFailure { seed })
}

fn series_y_n(v: &CMatrix, lambda: f64, order: usize, eps: Complex64) -> Result<Complex64> {
    let system = assemble_system(v, eps, lambda)?;
    let y = secular_value(&system, SecularMode::Series(order))?;
    Ok(y[system.n - 1])
}

fn dedupe(mut roots: Vec<Complex64>, tol: f64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then_with(|| a.im.total_cmp(&b.im)));
    for root in roots {
        if out.iter().all(|r| (r - root).norm() > tol) {
            out.push(root);
        }
    }
    out
}

// ── Admissibility of perturbation families ──────────────────────────

/// A lambda-graded family `(lambda V)_{jk} = lambda^(e_{jk}) mu_{jk}` with
/// bounded coefficients.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub n: usize,
    pub mu: CMatrix,
    pub exponent: Array2<f64>,
    pub bound: f64,
}

impl PerturbationFamily {
    pub fn new(mu: CMatrix, exponent: Array2<f64>, bound: f64) -> Result<Self> {
        let n = mu.nrows();
        if mu.ncols() != n || exponent.dim() != (n, n) {
            return Err(Error::InvalidArgument(
                "mu and exponent must be square and conforming".into(),
            ));
        }
        if mu.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("perturbation coefficients"));
        }
        let max_mu = mu.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if max_mu > bound + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "coefficient magnitude {max_mu:.3} exceeds declared bound {bound}"
            )));
        }
        Ok(Self {
            n,
            mu,
            exponent,
            bound,
        })
    }

    /// Realize `lambda V` at the given scale.
    pub fn realize(&self, lambda: f64) -> CMatrix {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| {
            self.mu[(i, j)] * lambda.powf(self.exponent[(i, j)])
        })
    }

    pub fn max_mu(&self) -> f64 {
        self.mu.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// The admissible pattern itself: exponents exactly `(j-k+1)/2` on and
    /// below the diagonal with unit coefficients, zero above.
    pub fn admissible_pattern(n: usize) -> Self {
        let mut mu = Array2::<Complex64>::default((n, n));
        let mut exponent = Array2::<f64>::zeros((n, n));
        for j in 1..=n {
            for k in 1..=j {
                mu[(j - 1, k - 1)] = ONE;
                exponent[(j - 1, k - 1)] = (j - k + 1) as f64 / 2.0;
            }
        }
        Self {
            n,
            mu,
            exponent,
            bound: 1.0,
        }
    }

    /// Single unit entry in the lower-left corner with the given exponent.
    pub fn corner(n: usize, exponent_value: f64) -> Self {
        let mut mu = Array2::<Complex64>::default((n, n));
        let mut exponent = Array2::<f64>::zeros((n, n));
        mu[(n - 1, 0)] = ONE;
        exponent[(n - 1, 0)] = exponent_value;
        Self {
            n,
            mu,
            exponent,
            bound: 1.0,
        }
    }

    /// Diagonal family with exponent 1/2 per entry.
    pub fn diagonal(mus: &[Complex64]) -> Self {
        let n = mus.len();
        let mut mu = Array2::<Complex64>::default((n, n));
        let mut exponent = Array2::<f64>::zeros((n, n));
        for (i, &m) in mus.iter().enumerate() {
            mu[(i, i)] = m;
            exponent[(i, i)] = 0.5;
        }
        Self {
            n,
            mu,
            exponent,
            bound: mus.iter().fold(1.0f64, |acc, z| acc.max(z.norm())),
        }
    }

    /// Random benign family: every populated lower-triangular entry keeps at
    /// least the required exponent. `uniform` supplies numbers in [0, 1).
    pub fn random_benign(n: usize, uniform: &mut dyn FnMut() -> f64) -> Self {
        let mut mu = Array2::<Complex64>::default((n, n));
        let mut exponent = Array2::<f64>::zeros((n, n));
        for j in 1..=n {
            for k in 1..=n {
                let coeff = Complex64::new(2.0 * uniform() - 1.0, 0.0);
                mu[(j - 1, k - 1)] = coeff;
                if j >= k {
                    let slack = (uniform() * 3.0).floor() * 0.5;
                    exponent[(j - 1, k - 1)] = (j - k + 1) as f64 / 2.0 + slack;
                } else {
                    exponent[(j - 1, k - 1)] = 1.0;
                }
            }
        }
        Self {
            n,
            mu,
            exponent,
            bound: 1.0,
        }
    }

    /// Random malign family: one lower-triangular entry falls short of the
    /// required exponent by at least 1/2.
    pub fn random_malign(n: usize, uniform: &mut dyn FnMut() -> f64) -> Self {
        let mut family = Self::random_benign(n, uniform);
        let j = 1 + (uniform() * n as f64).floor() as usize % n;
        let k = 1 + (uniform() * j as f64).floor() as usize % j;
        let required = (j - k + 1) as f64 / 2.0;
        let deficit = 0.5 + (uniform() * 2.0).floor() * 0.5;
        family.exponent[(j - 1, k - 1)] = (required - deficit).max(0.0);
        if family.mu[(j - 1, k - 1)].norm() < 0.1 {
            family.mu[(j - 1, k - 1)] = Complex64::new(0.5 + 0.5 * uniform(), 0.0);
        }
        family
    }
}

/// Outcome of the admissibility test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Benign,
    /// First lower-triangular entry (1-based) violating the exponent bound.
    Malign { witness: (usize, usize) },
}

/// A family is benign iff every populated entry on or below the diagonal
/// carries exponent at least `(j-k+1)/2`; the upper triangle is free.
pub fn classify_perturbation(family: &PerturbationFamily) -> Classification {
    let n = family.n;
    for j in 1..=n {
        for k in 1..=j {
            if family.mu[(j - 1, k - 1)].norm() == 0.0 {
                continue;
            }
            let required = (j - k + 1) as f64 / 2.0;
            if family.exponent[(j - 1, k - 1)] < required - 1e-12 {
                return Classification::Malign { witness: (j, k) };
            }
        }
    }
    Classification::Benign
}

/// The graded rescaling `V_reduced = lambda^(-1/2) B^(-1) (lambda V) B` with
/// `B_jj = lambda^(j/2)`. Benign families keep every entry bounded as
/// lambda decreases; a violating entry grows like a negative power.
pub fn rescale_reduced(family: &PerturbationFamily, lambda: f64) -> Result<(CMatrix, f64)> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let n = family.n;
    let realized = family.realize(lambda);
    let mut reduced = Array2::<Complex64>::default((n, n));
    let mut max_abs = 0.0f64;
    for j in 1..=n {
        for k in 1..=n {
            let power = (k as f64 - j as f64 - 1.0) / 2.0;
            let val = realized[(j - 1, k - 1)] * lambda.powf(power);
            reduced[(j - 1, k - 1)] = val;
            max_abs = max_abs.max(val.norm());
        }
    }
    Ok((reduced, max_abs))
}

/// Result of a log-log fit of eigenvalue displacement against lambda.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub displacements: Vec<(f64, f64)>,
}

/// Least-squares exponent of the splitting law `max displacement ~ lambda^p`
/// for a perturbation realized by `perturbation(lambda)` applied to `h_ep`.
pub fn exponent_fit(
    h_ep: &CMatrix,
    perturbation: &dyn Fn(f64) -> CMatrix,
    lambda_grid: &[f64],
) -> Result<ExponentFit> {
    if lambda_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "lambda grid needs at least 3 points".into(),
        ));
    }
    if lambda_grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidArgument("lambda grid must be positive".into()));
    }
    let lo = lambda_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambda_grid.iter().cloned().fold(0.0f64, f64::max);
    if (hi / lo).log10() < 3.0 - 1e-9 {
        return Err(Error::InvalidArgument(
            "lambda grid must span at least 3 decades".into(),
        ));
    }
    let base = eig_biorthogonal(h_ep)?;
    let mut displacements = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let p = perturbation(lambda);
        let perturbed = h_ep + &p;
        let sd = eig_biorthogonal(&perturbed)?;
        let mut max_d = 0.0f64;
        for ev in &sd.eigenvalues {
            let nearest = base
                .eigenvalues
                .iter()
                .map(|b| (ev - b).norm())
                .fold(f64::INFINITY, f64::min);
            max_d = max_d.max(nearest);
        }
        if max_d >= 0.1 {
            return Err(Error::InvalidArgument(format!(
                "displacement {max_d:.3} at lambda = {lambda:.3e} is not small"
            )));
        }
        displacements.push((lambda, max_d));
    }
    let scale = fro_norm(h_ep).max(1.0);
    if displacements.iter().any(|&(_, d)| d < 1e-14 * scale) {
        return Err(Error::DegenerateData(
            "eigenvalue displacements vanish; no exponent to fit".into(),
        ));
    }
    let xs: Vec<f64> = displacements.iter().map(|&(l, _)| l.ln()).collect();
    let ys: Vec<f64> = displacements.iter().map(|&(_, d)| d.ln()).collect();
    let (slope, _, stderr) = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::DegenerateData("log-log fit is degenerate".into()))?;
    Ok(ExponentFit {
        slope,
        stderr,
        displacements,
    })
}

/// Splitting exponent for a fixed direction, `P(lambda) = lambda * direction`.
pub fn exponent_fit_direction(
    h_ep: &CMatrix,
    direction: &CMatrix,
    lambda_grid: &[f64],
) -> Result<ExponentFit> {
    let dir = direction.clone();
    exponent_fit(
        h_ep,
        &move |lambda| dir.mapv(|x| x * Complex64::new(lambda, 0.0)),
        lambda_grid,
    )
}

/// Splitting exponent for a graded family, `P(lambda) = family.realize(lambda)`.
pub fn exponent_fit_family(
    h_ep: &CMatrix,
    family: &PerturbationFamily,
    lambda_grid: &[f64],
) -> Result<ExponentFit> {
    let fam = family.clone();
    exponent_fit(h_ep, &move |lambda| fam.realize(lambda), lambda_grid)
}
