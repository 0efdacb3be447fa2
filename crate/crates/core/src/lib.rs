// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::wrong_self_convention)]

pub mod banded;
pub mod config;
pub mod continuation;
pub mod cross;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod limit;
pub mod linstab;
pub mod model;
pub mod noise;
pub mod output;
pub mod pipeline;
pub mod rd;

pub use error::{Error, Result};
