//! Certified computations for an equivalent renorming of `c0` and its dual.

pub mod construction;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod geometry;
pub mod lp;
pub mod norm;
pub mod renorm;

pub use error::{Error, Result};
