//! Block-based intra codec with a learned in-loop restoration filter and an
//! optional fully-connected intra prediction mode.

pub mod codec;
pub mod error;
pub mod eval;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
