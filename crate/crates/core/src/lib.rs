#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod database;
pub mod error;
pub mod eval;
pub mod forward;
pub mod geometry;
pub mod net;
pub mod noise;
pub mod pipeline;
pub mod seed;
pub mod smoother;

pub use error::{Error, Result};
