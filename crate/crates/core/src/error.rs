use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid edge ({i}, {j}) for {n_sites} sites: {reason}")]
    InvalidEdge {
        i: usize,
        j: usize,
        n_sites: usize,
        reason: &'static str,
    },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coupling must be finite, got {0}")]
    InvalidCoupling(f64),

    #[error("matrix is not symmetric: |H[{i}][{j}] - H[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("symmetric eigensolver did not converge")]
    ConvergenceFailure,

    #[error("resolvent is singular at omega = {omega} (eigenvalue hit with gamma = eta = 0)")]
    SingularResolvent { omega: f64 },

    #[error("shifted matrix is singular at omega = {omega}")]
    SingularMatrix { omega: f64 },

    #[error("element ({i}, {j}) out of range for {n} sites")]
    ElementOutOfRange { i: usize, j: usize, n: usize },

    #[error("Green's function element ({i}, {j}) was not evaluated")]
    MissingElement { i: usize, j: usize },

    #[error("grid: {0}")]
    InvalidGrid(String),

    #[error("xs and ys differ in length ({xs} vs {ys})")]
    LengthMismatch { xs: usize, ys: usize },

    #[error("abscissae are not strictly increasing at index {0}")]
    NonMonotonicGrid(usize),

    #[error("no local maximum inside [{lo}, {hi}]")]
    PeakNotFound { lo: f64, hi: f64 },

    #[error("half-height crossing of the peak at {center} falls outside [{lo}, {hi}]")]
    UnresolvedWidth { center: f64, lo: f64, hi: f64 },

    #[error("absorption requires a transition dipole")]
    MissingDipole,

    #[error("cavity model requires the molecule count N")]
    MissingMoleculeCount,

    #[error("(N, V) and (number density, V~) disagree: N V^2 = {n_v2}, density V~^2 = {density_v2}")]
    InconsistentCoupling { n_v2: f64, density_v2: f64 },
}
