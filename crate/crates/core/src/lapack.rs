//! Thin safe wrappers over the system LAPACKE routines used by the kernels.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const LAPACK_ROW_MAJOR: i32 = 101;

#[rustfmt::skip]
extern "C" {
    // from /usr/include/lapacke.h
    fn LAPACKE_zgeev(matrix_layout: i32, jobvl: u8, jobvr: u8, n: i32, a: *mut Complex64, lda: i32, w: *mut Complex64, vl: *mut Complex64, ldvl: i32, vr: *mut Complex64, ldvr: i32) -> i32;
    fn LAPACKE_zgesvd(matrix_layout: i32, jobu: u8, jobvt: u8, m: i32, n: i32, a: *mut Complex64, lda: i32, s: *mut f64, u: *mut Complex64, ldu: i32, vt: *mut Complex64, ldvt: i32, superb: *mut f64) -> i32;
}

/// Eigenvalues plus unit-norm left and right eigenvectors of a general
/// complex matrix. Column `j` of each vector matrix belongs to `w[j]`;
/// left vectors satisfy `u^H A = w u^H`.
pub(crate) fn zgeev(a: &Array2<Complex64>) -> Result<(Vec<Complex64>, Array2<Complex64>, Array2<Complex64>)> {
    let n = a.nrows();
    let mut work = a
        .as_standard_layout()
        .iter()
        .copied()
        .collect::<Vec<Complex64>>();
    let mut w = vec![Complex64::default(); n];
    let mut vl = vec![Complex64::default(); n * n];
    let mut vr = vec![Complex64::default(); n * n];
    let info = unsafe {
        LAPACKE_zgeev(
            LAPACK_ROW_MAJOR,
            b'V',
            b'V',
            n as i32,
            work.as_mut_ptr(),
            n as i32,
            w.as_mut_ptr(),
            vl.as_mut_ptr(),
            n as i32,
            vr.as_mut_ptr(),
            n as i32,
        )
    };
    if info != 0 {
        return Err(Error::NoConvergence(info));
    }
    let vl = Array2::from_shape_vec((n, n), vl).expect("square shape");
    let vr = Array2::from_shape_vec((n, n), vr).expect("square shape");
    Ok((w, vl, vr))
}

/// Singular values in descending order.
pub(crate) fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut work = a
        .as_standard_layout()
        .iter()
        .copied()
        .collect::<Vec<Complex64>>();
    let mut s = vec![0.0f64; k];
    let mut superb = vec![0.0f64; k.saturating_sub(1).max(1)];
    let info = unsafe {
        LAPACKE_zgesvd(
            LAPACK_ROW_MAJOR,
            b'N',
            b'N',
            m as i32,
            n as i32,
            work.as_mut_ptr(),
            n as i32,
            s.as_mut_ptr(),
            std::ptr::null_mut(),
            m as i32,
            std::ptr::null_mut(),
            n as i32,
            superb.as_mut_ptr(),
        )
    };
    if info != 0 {
        return Err(Error::SvdFailed(info));
    }
    Ok(s)
}

/// Economy SVD `A = U diag(s) Vt` with `U: m x k`, `Vt: k x n`, `k = min(m, n)`.
pub(crate) fn svd_economy(
    a: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, Vec<f64>, Array2<Complex64>)> {
    let (m, n) = a.dim();
    let k = m.min(n);
    let mut work = a
        .as_standard_layout()
        .iter()
        .copied()
        .collect::<Vec<Complex64>>();
    let mut s = vec![0.0f64; k];
    let mut u = vec![Complex64::default(); m * k];
    let mut vt = vec![Complex64::default(); k * n];
    let mut superb = vec![0.0f64; k.saturating_sub(1).max(1)];
    let info = unsafe {
        LAPACKE_zgesvd(
            LAPACK_ROW_MAJOR,
            b'S',
            b'S',
            m as i32,
            n as i32,
            work.as_mut_ptr(),
            n as i32,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            k as i32,
            vt.as_mut_ptr(),
            n as i32,
            superb.as_mut_ptr(),
        )
    };
    if info != 0 {
        return Err(Error::SvdFailed(info));
    }
    let u = Array2::from_shape_vec((m, k), u).expect("u shape");
    let vt = Array2::from_shape_vec((k, n), vt).expect("vt shape");
    Ok((u, s, vt))
}
