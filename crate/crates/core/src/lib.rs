//! Truthful cardinal mechanisms for one-sided matching.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod analysis;
pub mod cli;
pub mod error;
pub(crate) mod lp;
pub mod instances;
pub mod io;
pub mod lottery;
pub mod mechanisms;
pub mod model;
pub mod nsw;

pub use error::{Error, Result};
pub use model::{utilities, validate_instance, DisagreementPoint, FractionalAssignment, Instance, Matrix, UtilityVector};
