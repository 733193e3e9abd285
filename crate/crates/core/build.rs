fn main() {
    // System LAPACKE (Debian liblapacke-dev) backs the dense eigen/SVD kernels.
    println!("cargo:rustc-link-lib=lapacke");
    println!("cargo:rustc-link-lib=lapack");
    println!("cargo:rustc-link-lib=blas");
}
