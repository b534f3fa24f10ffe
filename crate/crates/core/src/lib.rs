// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compositions;
pub mod error;
pub mod exec;
pub mod gcp;
pub mod montecarlo;
pub mod presets;
pub mod quadrature;
pub mod shock;
pub mod special;
pub mod subordinator;
pub mod threshold;
pub mod timechanged;
pub mod verify;

pub use error::{MgcpError, Result};
pub use exec::Execution;
