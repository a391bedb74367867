//! Small dense real-matrix kernel: solve, inverse, SVD pseudoinverses,
//! spectral norm, eigenvalues and finite-difference Jacobians.
//!
//! Every operation has a `*_with` form taking [`Tolerances`]; the plain form
//! uses the defaults.

// The kernels index several arrays in lockstep; iterator rewrites obscure them.
#![allow(clippy::needless_range_loop)]

mod eigen;
mod jacobian;
mod lu;
mod matrix;
mod svd;

pub use eigen::{eigenvalues_with, ComplexScalar};
pub use jacobian::{jacobian_fd, DEFAULT_FD_SCALE};
pub use lu::{inverse_with, solve_linear_with, solve_matrix_with};
pub use matrix::{vec_norm, RealMatrix};
pub use svd::{pinv_left_with, pinv_right_with, spectral_norm, svd, SvdFactors};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularMatrix { condition: f64 },
    #[error("matrix is rank deficient (sigma_min {sigma_min:.3e}, sigma_max {sigma_max:.3e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("{op} did not converge within {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },
    #[error("function returned non-finite values")]
    NonFiniteEvaluation,
    #[error("{op}: non-finite matrix entries")]
    NonFinite { op: &'static str },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
}

/// Numerical thresholds shared by the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest accepted 1-norm condition estimate for solves and inverses.
    pub condition_limit: f64,
    /// Pivots below `pivot_rel * ‖A‖` are treated as zero.
    pub pivot_rel: f64,
    /// Singular values below `rank_rel * σ_max` count as rank loss.
    pub rank_rel: f64,
    /// QR iteration budget per matrix dimension.
    pub qr_sweeps_per_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            condition_limit: 1e12,
            pivot_rel: 1e-14,
            rank_rel: 1e-12,
            qr_sweeps_per_dim: 100,
        }
    }
}

pub fn solve_linear(a: &RealMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    solve_linear_with(a, b, &Tolerances::default())
}

/// Solves `A X = B` for a matrix right-hand side.
pub fn solve_matrix(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    solve_matrix_with(a, b, &Tolerances::default())
}

pub fn inverse(a: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    inverse_with(a, &Tolerances::default())
}

/// Left pseudoinverse of a full-column-rank matrix, `B†_L B = I`.
pub fn pinv_left(b: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    pinv_left_with(b, &Tolerances::default())
}

/// Right pseudoinverse of a full-row-rank matrix, `B B†_R = I`.
pub fn pinv_right(b: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    pinv_right_with(b, &Tolerances::default())
}

pub fn eigenvalues(a: &RealMatrix) -> Result<Vec<ComplexScalar>, LinalgError> {
    eigenvalues_with(a, &Tolerances::default())
}
