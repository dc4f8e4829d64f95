//! Tsallis q-triplet, generalized Hurst exponent and Q-metric analysis of
//! daily close price series.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ghe;
pub mod metrics;
pub mod multifractal;
pub mod pipeline;
pub mod presets;
pub mod reference;
pub mod relaxation;
pub mod seeds;
pub mod stats;
pub mod synthgen;
pub mod timeseries;
pub mod trends;
pub mod tsallis;
pub mod validate;

pub use error::{Error, Result};
