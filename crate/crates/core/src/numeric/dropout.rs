use rand::Rng;

use super::graph::{Graph, Var};
use super::rng::SeededRng;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Whether a forward pass is training (dropout active) or evaluating.
#[derive(Debug)]
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut SeededRng },
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }

    /// Multiplies `x` by a fresh inverted-dropout mask in training mode;
    /// the identity otherwise.
    pub fn dropout(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Mode::Train { dropout, rng } if *dropout > 0.0 => {
                let mask = dropout_mask(rng, g.value(x).shape(), *dropout)?;
                let m = g.constant(mask);
                g.mul(x, m)
            }
            _ => Ok(x),
        }
    }
}

/// Inverted-dropout mask: each entry is `0` with probability `p`, otherwise
/// `1 / (1 - p)`, so the mask has expectation one.
pub fn dropout_mask(rng: &mut SeededRng, shape: &[usize], p: f64) -> Result<Tensor> {
    check_rate(p)?;
    let n: usize = shape.iter().product();
    if p == 0.0 {
        return Tensor::new(shape.to_vec(), vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - p);
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

pub fn check_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {p}")));
    }
    Ok(())
}
