//! Dense complex linear algebra at desk scale: Hermitian eigendecomposition,
//! SVD, PSD square root, Moore-Penrose pseudo-inverse, range projectors,
//! polar decomposition, and partial-isometry predicates.

mod eigen;
mod factor;
mod matrix;

pub use eigen::{eig_hermitian, svd, HermitianEigen, Svd};
pub use factor::{
    complete_to_unitary, exp_skew, is_partial_isometry, mp_pinv, mp_pinv_with_tol,
    numerical_rank, polar_left, polar_left_with_tol, projectors_equal, range_basis,
    range_projector, range_projector_with_tol, rank_tolerance, set_rank_tolerance,
    spectral_projector, sqrt_psd, sqrt_psd_with_tol, zero_cutoff, PolarFactors, DEFAULT_RANK_TOL,
};
pub use matrix::ComplexMatrix;

pub(crate) use eigen::complete_basis as complete_orthonormal_columns;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// The input was expected to be Hermitian within tolerance.
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    /// The input was expected to be positive semidefinite.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    /// An iterative factorization exceeded its sweep cap.
    #[error("{what} did not converge")]
    NoConvergence { what: &'static str },

    /// complete_to_unitary requires singular values 0 or 1.
    #[error("matrix is not a partial isometry")]
    NotPartialIsometry,
}

pub type LinalgResult<T> = Result<T, LinalgError>;
