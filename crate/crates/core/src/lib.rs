// `!(x > 0.0)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analytic;
pub mod chanmodel;
pub mod error;
pub mod experiment;
pub mod params;
pub mod protosim;
pub mod queuedyn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use params::SystemParams;
