//! Curvature of (pseudo-)Riemannian metrics and the M-eigenvalue problem of
//! the Riemann curvature tensor.

// Index loops mirror the tensor notation; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod conformal;
pub mod curvature;
pub mod decomposition;
pub mod error;
pub mod expr;
pub mod input;
pub mod kaehler;
pub mod meigen;
pub mod metric;
pub mod tensor;

pub use error::{Error, ErrorClass, Result};
