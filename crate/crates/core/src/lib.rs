// `!(x > 0.0)` is deliberate throughout: NaN must fail validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod error;
pub mod linalg;
pub mod methods;
pub mod problem;
pub mod realization;
pub mod sdp;

pub use error::{Error, Result};
