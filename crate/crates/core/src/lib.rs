//! Multi-treebank dependency parsing with interpolated treebank vectors.

pub mod conllu;
pub mod error;
pub mod eval;
pub mod parser;
pub mod predict;
pub mod sentsim;
pub mod weights;

pub use error::{Error, Result};
