//! Dense complex linear algebra: LU solves, biorthogonal eigendecomposition,
//! singular values, conditioning. The universal carrier is `CMatrix`, a dense
//! row-major `Array2<Complex64>`.

use ndarray::{s, Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lapack;

pub type CMatrix = Array2<Complex64>;
pub type CVector = Array1<Complex64>;

/// Largest dimension accepted by `eig_biorthogonal`.
pub const MAX_EIG_DIM: usize = 512;

/// Relative pivot threshold below which an LU factorization is rejected.
pub const PIVOT_RTOL: f64 = 1e-13;

/// Relative gap below which eigenvalues are treated as one cluster, and
/// relative singular-value threshold for numerical rank.
pub const CLUSTER_RTOL: f64 = 1e-8;

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn vec_norm(v: &ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

// ── LU factorization ────────────────────────────────────────────────

/// LU factorization with partial pivoting of a square complex matrix.
pub struct Lu {
    lu: CMatrix,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &CMatrix) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        check_finite(m, "LU input")?;
        let threshold = PIVOT_RTOL * max_abs(m);
        let mut lu = m.clone();
        let mut piv = Vec::with_capacity(n);
        for col in 0..n {
            let mut p = col;
            let mut best = lu[(col, col)].norm();
            for row in col + 1..n {
                let mag = lu[(row, col)].norm();
                if mag > best {
                    best = mag;
                    p = row;
                }
            }
            if best <= threshold {
                return Err(Error::SingularMatrix {
                    pivot: best,
                    threshold,
                });
            }
            if p != col {
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            piv.push(p);
            let pivot = lu[(col, col)];
            for row in col + 1..n {
                let factor = lu[(row, col)] / pivot;
                lu[(row, col)] = factor;
                for j in col + 1..n {
                    let sub = factor * lu[(col, j)];
                    lu[(row, j)] -= sub;
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x = b.clone();
        // the factorization swaps whole rows, so all permutations must hit
        // the right-hand side before the triangular sweeps
        for col in 0..n {
            let p = self.piv[col];
            if p != col {
                x.swap(col, p);
            }
        }
        for col in 0..n {
            let xc = x[col];
            for row in col + 1..n {
                let sub = self.lu[(row, col)] * xc;
                x[row] -= sub;
            }
        }
        for row in (0..n).rev() {
            let mut acc = x[row];
            for j in row + 1..n {
                acc -= self.lu[(row, j)] * x[j];
            }
            x[row] = acc / self.lu[(row, row)];
        }
        x
    }

    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        let mut out = Array2::default((n, b.ncols()));
        for (j, col) in b.columns().into_iter().enumerate() {
            let x = self.solve(&col.to_owned());
            out.slice_mut(s![.., j]).assign(&x);
        }
        out
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve_mat(&identity(self.lu.nrows()))
    }
}

/// Solve `M x = b` by LU with partial pivoting.
pub fn solve_linear(m: &CMatrix, b: &CVector) -> Result<CVector> {
    if b.len() != m.nrows() {
        return Err(Error::InvalidArgument(format!(
            "rhs length {} does not match matrix dimension {}",
            b.len(),
            m.nrows()
        )));
    }
    Ok(Lu::factor(m)?.solve(b))
}

// ── Singular values, rank, least squares ────────────────────────────

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    check_finite(m, "SVD input")?;
    lapack::singular_values(m)
}

pub fn min_singular_value(m: &CMatrix) -> Result<f64> {
    Ok(*singular_values(m)?.last().expect("nonempty spectrum"))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    Ok(*singular_values(m)?.first().expect("nonempty spectrum"))
}

/// 2-norm condition number sigma_max / sigma_min (infinite when rank-deficient).
pub fn cond2(m: &CMatrix) -> Result<f64> {
    let s = singular_values(m)?;
    let (max, min) = (s[0], s[s.len() - 1]);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Number of singular values above `rtol * sigma_max`.
pub fn rank_with_rtol(m: &CMatrix, rtol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let cut = rtol * s[0];
    Ok(s.iter().filter(|&&x| x > cut).count())
}

/// Right-singular vector of the smallest singular value (unit norm).
pub fn nullspace_vector(m: &CMatrix) -> Result<CVector> {
    let (_, _, vt) = lapack::svd_economy(m)?;
    let last = vt.nrows() - 1;
    Ok(vt.row(last).mapv(|z| z.conj()))
}

/// Minimum-norm least-squares solution of `M x = b` via the SVD, discarding
/// singular values below `rtol * sigma_max`. Returns the solution and the
/// residual norm `|| M x - b ||`.
pub fn least_squares_min_norm(m: &CMatrix, b: &CVector, rtol: f64) -> Result<(CVector, f64)> {
    let (u, s, vt) = lapack::svd_economy(m)?;
    let cut = rtol * s[0];
    let mut x = Array1::<Complex64>::default(m.ncols());
    for (i, &sigma) in s.iter().enumerate() {
        if sigma <= cut {
            continue;
        }
        let coef = u.column(i).mapv(|z| z.conj()).dot(b) / sigma;
        let vi = vt.row(i).mapv(|z| z.conj());
        x = x + vi.mapv(|z| z * coef);
    }
    let residual = {
        let r = m.dot(&x) - b;
        vec_norm(&r.view())
    };
    Ok((x, residual))
}

/// Gelfand spectral-radius estimate via repeated squaring of the matrix
/// (rho = lim ||G^k||^{1/k}); scale-tracked to avoid overflow.
pub fn spectral_radius_estimate(g: &CMatrix) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut m = g.clone();
    let mut log_scale = 0.0f64;
    let mut power = 1.0f64;
    for _ in 0..12 {
        let norm = fro_norm(&m);
        if norm == 0.0 {
            return 0.0;
        }
        log_scale += norm.ln() / power;
        m.mapv_inplace(|z| z / norm);
        m = m.dot(&m);
        power *= 2.0;
    }
    let norm = fro_norm(&m).max(f64::MIN_POSITIVE);
    (log_scale + norm.ln() / power).exp()
}

// ── Biorthogonal eigendecomposition ─────────────────────────────────

/// Eigenvalues with paired right ("ket") and left ("ketket") eigenvectors.
///
/// Eigenvalues are sorted by ascending real part, ties by ascending
/// imaginary part. Right vectors are unit-norm columns; when the matrix is
/// not defective the left vectors are rescaled so `left_n^H right_n = 1`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<Complex64>,
    pub right_vectors: CMatrix,
    pub left_vectors: CMatrix,
    pub defect_flag: bool,
    pub biorthogonality_residual: f64,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn right(&self, n: usize) -> ArrayView1<'_, Complex64> {
        self.right_vectors.column(n)
    }

    pub fn left(&self, n: usize) -> ArrayView1<'_, Complex64> {
        self.left_vectors.column(n)
    }

    /// Projector norm kappa_n = ||psi_n|| * ||psi_n>>|| under the
    /// biorthonormal pairing.
    pub fn kappa(&self, n: usize) -> f64 {
        vec_norm(&self.right(n)) * vec_norm(&self.left(n))
    }
}

/// Full nonsymmetric eigendecomposition with left/right pairing,
/// biorthonormalization and defect detection.
pub fn eig_biorthogonal(m: &CMatrix) -> Result<SpectralData> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n > MAX_EIG_DIM {
        return Err(Error::InvalidArgument(format!(
            "dimension {n} exceeds maximum {MAX_EIG_DIM}"
        )));
    }
    check_finite(m, "eigendecomposition input")?;

    let (w, vl, vr) = lapack::zgeev(m)?;

    // Sort triplets by ascending (Re, Im).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        w[a].re
            .total_cmp(&w[b].re)
            .then_with(|| w[a].im.total_cmp(&w[b].im))
    });
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| w[i]).collect();
    let mut right = Array2::<Complex64>::default((n, n));
    let mut left = Array2::<Complex64>::default((n, n));
    for (j, &src) in order.iter().enumerate() {
        right.slice_mut(s![.., j]).assign(&vr.column(src));
        left.slice_mut(s![.., j]).assign(&vl.column(src));
    }

    // Deterministic phase: rotate each pair so the largest-modulus component
    // of the right vector is real positive.
    for j in 0..n {
        let col = right.column(j);
        let mut idx = 0;
        let mut best = 0.0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > best {
                best = z.norm();
                idx = i;
            }
        }
        if best > 0.0 {
            let phase = col[idx].conj() / best;
            right.column_mut(j).mapv_inplace(|z| z * phase);
            left.column_mut(j).mapv_inplace(|z| z * phase);
        }
    }

    let scale = fro_norm(m);
    let cluster_tol = CLUSTER_RTOL * scale;
    let (clusters, mut defect) = detect_defect(m, &eigenvalues, cluster_tol, scale)?;

    // Rescale left vectors to left^H right = 1; within non-defective repeated
    // clusters solve the cluster Gram system instead.
    for cluster in &clusters {
        if cluster.len() == 1 {
            let j = cluster[0];
            let s: Complex64 = left
                .column(j)
                .iter()
                .zip(right.column(j).iter())
                .map(|(l, r)| l.conj() * r)
                .sum();
            if s.norm() < 1e-12 {
                defect = true;
            } else {
                let c = (Complex64::new(1.0, 0.0) / s).conj();
                left.column_mut(j).mapv_inplace(|z| z * c);
            }
        } else if !defect {
            let k = cluster.len();
            let mut gram = Array2::<Complex64>::default((k, k));
            for (a, &ja) in cluster.iter().enumerate() {
                for (b, &jb) in cluster.iter().enumerate() {
                    gram[(a, b)] = left
                        .column(ja)
                        .iter()
                        .zip(right.column(jb).iter())
                        .map(|(l, r)| l.conj() * r)
                        .sum();
                }
            }
            match Lu::factor(&gram) {
                Ok(lu) => {
                    // L_new = L_old * inv(G)^H so that L_new^H R = I.
                    let ginv = lu.inverse();
                    let mut block = Array2::<Complex64>::default((n, k));
                    for (a, &ja) in cluster.iter().enumerate() {
                        block.slice_mut(s![.., a]).assign(&left.column(ja));
                    }
                    let ginv_h = ginv.t().mapv(|z| z.conj());
                    let corrected = block.dot(&ginv_h);
                    for (a, &ja) in cluster.iter().enumerate() {
                        left.slice_mut(s![.., ja]).assign(&corrected.column(a));
                    }
                }
                Err(_) => defect = true,
            }
        }
    }

    // Max-norm deviation of left^H right from the identity.
    let gram = left.t().mapv(|z| z.conj()).dot(&right);
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            };
            residual = residual.max((gram[(i, j)] - target).norm());
        }
    }

    Ok(SpectralData {
        eigenvalues,
        right_vectors: right,
        left_vectors: left,
        defect_flag: defect,
        biorthogonality_residual: residual,
    })
}

/// Cluster eigenvalues by the relative gap tolerance and compare geometric
/// against algebraic multiplicity per cluster.
fn detect_defect(
    m: &CMatrix,
    eigenvalues: &[Complex64],
    cluster_tol: f64,
    scale: f64,
) -> Result<(Vec<Vec<usize>>, bool)> {
    let n = eigenvalues.len();
    // Union-find over pairs closer than the tolerance.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if (eigenvalues[i] - eigenvalues[j]).norm() < cluster_tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }

    let mut defect = false;
    for cluster in &groups {
        if cluster.len() < 2 {
            continue;
        }
        let mean = cluster.iter().map(|&i| eigenvalues[i]).sum::<Complex64>()
            / Complex64::new(cluster.len() as f64, 0.0);
        let mut shifted = m.clone();
        for d in 0..n {
            shifted[(d, d)] -= mean;
        }
        let rank = rank_with_rtol_abs(&shifted, CLUSTER_RTOL * scale)?;
        let geometric = n - rank;
        if geometric < cluster.len() {
            defect = true;
        }
    }
    Ok((groups, defect))
}

fn rank_with_rtol_abs(m: &CMatrix, cut: f64) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(s.iter().filter(|&&x| x > cut).count())
}
