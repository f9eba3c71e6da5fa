use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgd,
    Adam,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sgd => "sgd",
            Method::Adam => "adam",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Online optimizer. One call to [`Optimizer::step`] consumes the gradients
/// currently held by the store and zeroes them.
#[derive(Debug, Clone)]
pub struct Optimizer {
    method: Method,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(method: Method, lr: f64) -> Self {
        Optimizer {
            method,
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPSILON,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(Method::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(Method::Adam, lr)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParameterStore) {
        self.step += 1;
        match self.method {
            Method::Sgd => {
                for id in store.ids().collect::<Vec<_>>() {
                    if store.is_frozen(id) {
                        continue;
                    }
                    let grad = store.grad(id).data().to_vec();
                    for (w, g) in store.value_mut(id).data_mut().iter_mut().zip(grad) {
                        *w -= self.lr * g;
                    }
                }
            }
            Method::Adam => {
                if self.first.len() != store.len() {
                    self.first = store.ids().map(|id| Tensor::zeros(store.value(id).shape())).collect();
                    self.second = self.first.clone();
                }
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for id in store.ids().collect::<Vec<_>>() {
                    if store.is_frozen(id) {
                        continue;
                    }
                    let i = id.index();
                    let grad = store.grad(id).data().to_vec();
                    let m = self.first[i].data_mut();
                    let v = self.second[i].data_mut();
                    let w = store.value_mut(id).data_mut();
                    for k in 0..grad.len() {
                        let g = grad[k];
                        m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                        v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        w[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        store.zero_grads();
    }
}
