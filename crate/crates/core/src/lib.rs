//! Text categorization with recursive neural networks over discourse
//! dependency trees.
//!
//! Documents arrive as EDUs (token lists) with an RST-derived dependency
//! tree. Each EDU is encoded by a bidirectional LSTM; the tree is then
//! folded bottom-up, weighting every child subtree by a sigmoid attention
//! gate, and the root representation is classified with a softmax layer.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod model;
pub mod numeric;
pub mod synthetic;
pub mod text;
pub mod train;
pub mod trees;

pub use error::{Error, Result};
