// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod atom;
pub mod config;
pub mod constants;
pub mod doppler;
pub mod error;
pub mod experiment;
pub mod floquet;
pub mod liouville;
pub mod oracle;
pub mod propagation;
pub mod signals;
pub mod svg;

pub use error::{Result, SimError};
