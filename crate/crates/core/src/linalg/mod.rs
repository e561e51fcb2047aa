//! Dense linear algebra primitives shared by every estimator.

pub mod cca;
pub mod cholesky;
pub mod eigen;
pub mod matrix;
pub mod stats;

pub use cca::{avg_sq_canonical_cor, canonical_correlations, canonical_correlations_cov, CanonicalCorrelations};
pub use cholesky::Cholesky;
pub use eigen::{sym_eigen, SymEigen};
pub use matrix::{dot, norm, quad_form, Matrix};
pub use stats::{mean, sample_mean_cov, standardize, variance, Standardized, Whitening};
