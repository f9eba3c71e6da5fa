//! Tensors, reverse-mode differentiation, optimizers and seeded randomness.

pub mod dropout;
pub mod graph;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;

pub use dropout::{dropout_mask, Mode};
pub use graph::{Activation, Gradients, Graph, Var};
pub use optim::{Method, Optimizer};
pub use params::{clip_gradient_norm, ParamId, ParameterStore};
pub use rng::{derive_seed, SeededRng, Stream};
pub use tensor::Tensor;
