//! Optimal response transformations for dimension reduction.
//!
//! OLS and principal Hessian directions (PHD) recover effective dimension
//! reduction directions, but both can fail for responses whose dependence on
//! the index is symmetric or linear. This crate searches one-parameter
//! response transformations (Box-Cox and two mean-centered absolute value
//! families) and picks the parameter by leave-one-out influence, PHD
//! eigenvalue ratio, or PHD rank-test evidence. A second direction can be
//! sought iteratively on a deflated PHD matrix.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common case.

pub mod dr;
pub mod influence;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod selection;
pub mod sim;
pub mod transforms;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type DrFit64 = dr::DrFit<f64>;
pub type TransformSpec64 = transforms::TransformSpec<f64>;
