// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod chain;
pub mod dual;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod ssep;
pub mod stats;
pub mod thermo;
pub mod zero_range;

pub use error::{Error, Result};
