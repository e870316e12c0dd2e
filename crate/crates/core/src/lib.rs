//! Integral-transformation solvers for linear-state optimal control and
//! differential games, with a two-country climate-economy model.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod climate;
pub mod error;
pub mod itm;
pub mod optim;
mod par;
pub mod quad;
pub mod regimes;
pub mod robust;
pub mod scenario;

pub use error::{Error, Result};
