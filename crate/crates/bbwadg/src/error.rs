//! Crate error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("weight must be strictly positive at every quadrature point")]
    NonPositiveWeight,

    #[error("material is not positive definite at a sample point")]
    IndefiniteMaterial,

    #[error("quadrature point outside simplex: barycentric sum deviates by {0:e}")]
    BadBarycentric(f64),

    #[error("modal degree block has inconsistent diagonal values at degree {degree}: spread {spread:e}")]
    ModalOrdering { degree: usize, spread: f64 },

    #[error("singular pivot in triangular eigenvalue system at stage {0}")]
    SingularPivot(usize),

    #[error("operator sparsity bound violated: {nnz} nonzeros per row, limit {limit}")]
    SparsityViolation { nnz: usize, limit: usize },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("gmsh parse error: {0}")]
    Gmsh(String),

    #[error("non-finite field values detected at step {step}")]
    NonFinite { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
