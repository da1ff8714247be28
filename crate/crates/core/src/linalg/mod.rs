//! Dense linear algebra: the matrix type, Gram construction, power iteration
//! and the deflated eigen-oracle used as the centralized reference.

mod eigen;
mod matrix;

pub use eigen::{
    gram_matrix, power_iteration, rayleigh_quotient, sin_angle, top_k_eigen_oracle, EigenPair,
    PowerIterates, DEFAULT_TOL, ORACLE_MAX_ITERS, ORACLE_TOL,
};
pub use matrix::{canonicalize_sign, dot, norm, normalize, DenseMatrix};
