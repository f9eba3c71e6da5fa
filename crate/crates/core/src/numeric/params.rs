use std::collections::HashMap;

use rand::Rng;

use super::rng::SeededRng;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor held by a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
    frozen: bool,
}

/// Named trainable tensors, each paired with a gradient accumulator of the
/// same shape. Insertion order is the iteration order.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter name {name:?}")));
        }
        let id = ParamId(self.entries.len());
        let grad = Tensor::zeros(value.shape());
        self.entries.push(Entry {
            name: name.clone(),
            value,
            grad,
            frozen: false,
        });
        self.by_name.insert(name, id);
        Ok(id)
    }

    /// Adds a `rows × cols` matrix drawn uniformly from `[-r, r]` with
    /// `r = sqrt(6 / (rows + cols))`.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut SeededRng,
    ) -> Result<ParamId> {
        let r = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-r..=r)).collect();
        self.add(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    /// Replaces a parameter's value; the shape must not change.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let entry = &mut self.entries[id.0];
        entry.value.check_same_shape(&value, "set_value")?;
        entry.value = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].grad
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.entries[id.0].frozen
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.entries[id.0].frozen = frozen;
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Global L2 norm over the gradients of every trainable parameter.
    /// Computed with max-abs scaling so that very large or very small
    /// entries neither overflow nor underflow.
    pub fn grad_norm(&self) -> f64 {
        let trainable = || self.entries.iter().filter(|e| !e.frozen).flat_map(|e| e.grad.data());
        let max = trainable().fold(0.0f64, |m, g| m.max(g.abs()));
        if max == 0.0 || !max.is_finite() {
            return max;
        }
        max * trainable().map(|g| (g / max) * (g / max)).sum::<f64>().sqrt()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, grad: &[f64]) {
        let g = self.entries[id.0].grad.data_mut();
        for (acc, v) in g.iter_mut().zip(grad) {
            *acc += v;
        }
    }

    pub(crate) fn accumulate_row(&mut self, id: ParamId, row: usize, grad: &[f64]) {
        let g = self.entries[id.0].grad.row_mut(row);
        for (acc, v) in g.iter_mut().zip(grad) {
            *acc += v;
        }
    }
}

/// Rescales every trainable gradient by `min(1, tau / ‖g‖)` where `‖g‖` is
/// the global norm, and returns the factor applied.
pub fn clip_gradient_norm(store: &mut ParameterStore, tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid(format!("clip threshold must be > 0, got {tau}")));
    }
    let norm = store.grad_norm();
    if !norm.is_finite() {
        return Err(Error::invalid(format!("gradient norm is {norm}")));
    }
    if norm <= tau {
        return Ok(1.0);
    }
    let factor = tau / norm;
    for e in store.entries.iter_mut().filter(|e| !e.frozen) {
        e.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
    }
    Ok(factor)
}
