//! Shared oracles and generators for the integration suites. Everything in
//! here is deliberately independent of the library's own linear-algebra
//! path: the finite-difference oracle uses a banded factorization and
//! shift-inverse iteration only.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Ground-state energy of `-psi'' + i x^3 psi` on [-L, L] with Dirichlet
/// ends, by second-order finite differences and shift-inverse iteration
/// around `sigma`. Completely independent of the oscillator-basis route.
pub fn fd_cubic_ground_state(l: f64, n: usize, sigma: f64) -> Complex64 {
    let h = 2.0 * l / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<Complex64> = (1..=n)
        .map(|j| {
            let x = -l + j as f64 * h;
            c(2.0 * inv_h2 - sigma, x * x * x)
        })
        .collect();
    let off = c(-inv_h2, 0.0);

    let solver = TridiagLu::factor(&diag, off);
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| {
            let x = -l + (j + 1) as f64 * h;
            c((-x * x).exp(), 0.0)
        })
        .collect();
    normalize(&mut v);
    let mut last = c(f64::INFINITY, 0.0);
    for _ in 0..400 {
        let w = solver.solve(&v);
        v = w;
        normalize(&mut v);
        // complex-symmetric (transpose) Rayleigh quotient of the original
        // operator: diag includes the -sigma shift, so add it back
        let mut num = c(0.0, 0.0);
        let mut den = c(0.0, 0.0);
        for j in 0..n {
            let mut tv = diag[j] * v[j];
            if j > 0 {
                tv += off * v[j - 1];
            }
            if j + 1 < n {
                tv += off * v[j + 1];
            }
            num += v[j] * tv;
            den += v[j] * v[j];
        }
        let e = num / den + sigma;
        if (e - last).norm() <= 1e-13 * (1.0 + e.norm()) {
            return e;
        }
        last = e;
    }
    last
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
}

/// Banded LU with partial pivoting for a symmetric-profile tridiagonal
/// system (constant off-diagonal), with the single fill-in superdiagonal
/// that row swaps introduce.
struct TridiagLu {
    n: usize,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    dl: Vec<Complex64>,
    swap: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[Complex64], off: Complex64) -> Self {
        let n = diag.len();
        let mut d = diag.to_vec();
        let mut du = vec![off; n.saturating_sub(1)];
        let mut du2 = vec![Complex64::default(); n.saturating_sub(2)];
        let mut dl = vec![Complex64::default(); n.saturating_sub(1)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            let mut sub = off;
            if sub.norm() > d[i].norm() {
                swap[i] = true;
                std::mem::swap(&mut d[i], &mut sub);
                std::mem::swap(&mut d[i + 1], &mut du[i]);
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = Complex64::default();
                }
            }
            let factor = sub / d[i];
            dl[i] = factor;
            d[i + 1] -= factor * du[i];
            if i + 2 < n && swap[i] {
                du[i + 1] -= factor * du2[i];
            }
        }
        Self {
            n,
            d,
            du,
            du2,
            dl,
            swap,
        }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.swap[i] {
                x.swap(i, i + 1);
            }
            let update = self.dl[i] * x[i];
            x[i + 1] -= update;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            if i + 1 < n {
                acc -= self.du[i] * x[i + 1];
            }
            if i + 2 < n && self.swap[i] {
                acc -= self.du2[i] * x[i + 2];
            }
            x[i] = acc / self.d[i];
        }
        x
    }
}

/// Random complex matrix with entries uniform in the centered unit square.
pub fn random_cmatrix<R: Rng>(rng: &mut R, n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |_| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Random real matrix lifted to complex entries.
pub fn random_real_cmatrix<R: Rng>(rng: &mut R, n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |_| c(rng.gen_range(-1.0..1.0), 0.0))
}

/// Well-conditioned random similarity `S = I + 0.3 G`.
pub fn random_similarity<R: Rng>(rng: &mut R, n: usize) -> Array2<Complex64> {
    let mut s = random_cmatrix(rng, n);
    s.mapv_inplace(|z| z * 0.3);
    for i in 0..n {
        s[(i, i)] += 1.0;
    }
    s
}
