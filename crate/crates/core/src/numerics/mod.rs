//! Dense linear algebra for small dimensions: symmetric matrices, Jacobi
//! eigen-decomposition, spectral square roots, and domain projections.

mod eigen;
mod project;
mod sym;
mod vector;

pub use eigen::{eigh, inv_sqrt, sqrt_psd, trace_sqrt, SymEigen};
pub use project::{project_ball, project_box, project_mahalanobis_ball};
pub use sym::SymMatrix;
pub use vector::*;

/// Default eigenvalue floor for preconditioner inverses.
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix has non-finite entries")]
    InvalidMatrix,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("projection root-finder did not converge after {iterations} iterations")]
    ProjectionFailure { iterations: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
