use num_complex::Complex64;
use thiserror::Error;

/// Errors surfaced by the numerical kernels and model constructors.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("singular matrix: pivot magnitude {pivot:.3e} below threshold {threshold:.3e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("eigensolver did not converge (backend info code {0})")]
    NoConvergence(i32),

    #[error("SVD did not converge (backend info code {0})")]
    SvdFailed(i32),

    #[error("no coalescence: max eigenvalue gap {gap:.3e} at t = {t} exceeds tolerance {tol:.3e}")]
    NoCoalescence { t: f64, gap: f64, tol: f64 },

    #[error("not an exceptional point: {reason}")]
    NotAnEp { reason: String },

    #[error("Jordan chain breakdown at column {column}: solve residual {residual:.3e}")]
    ChainBreakdown { column: usize, residual: f64 },

    #[error("resolvent series diverges: spectral radius estimate {0:.4}")]
    SeriesDiverges(f64),

    #[error("secular root search failed near seed {seed}")]
    RootFindingFailure { seed: Complex64 },

    #[error("degenerate spectrum: |E[{i}] - E[{j}]| = {gap:.3e} below gap tolerance")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },

    #[error("insufficient convergence: only {converged} stable levels")]
    InsufficientConvergence { converged: usize },

    #[error("degenerate closure: affine slope magnitude {slope:.3e} below 1e-14")]
    DegenerateClosure { slope: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
