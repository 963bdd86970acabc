//! Track-before-detect multi-target filtering on intensity images.
//!
//! The main filter is a Poisson-histogram multi-hypothesis tracker with
//! integrated track existence (IE), updated by expectation-maximisation on
//! every scan. A threshold-based variant (TH) with a forgetting-factor rate
//! prior is provided for comparison, together with scenario simulators and
//! the GOSPA metric.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod em;
pub mod error;
pub mod existence;
pub mod gospa;
pub mod grid;
pub mod image;
pub mod prediction;
pub mod simulator;
pub mod special;

pub use error::{Error, Result};
