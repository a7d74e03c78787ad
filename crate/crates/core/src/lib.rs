//! Graph embedding as warped low-rank factorization of node-proximity
//! matrices, including the UltimateWalk pipeline and a node-classification
//! evaluation harness.

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod proximity;
pub mod solver;
pub mod sparse;
pub mod svd;
pub mod synth;
pub mod triple;
pub mod ultimatewalk;
pub mod warping;

pub use error::{Error, Result};
