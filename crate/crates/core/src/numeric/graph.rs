//! Reverse-mode differentiation over tensors.
//!
//! A [`Graph`] is the tape: every forward operation appends one record
//! holding its result and the operands it read. Records only refer to
//! earlier records, so replaying them back to front in [`Graph::backward`]
//! visits every node after all of its consumers.

use std::collections::HashMap;

use super::params::{ParamId, ParameterStore};
use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Probabilities below this are clamped inside [`Graph::cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Reference to a record on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    MatVec(Var, Var),
    Add(Var, Var),
    Sum(Vec<Var>),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy { scalar: Var, x: Var },
    Act(Activation, Var),
    Concat(Vec<Var>),
    Dot(Var, Var),
    Softmax(Var),
    CrossEntropy { probs: Var, gold: usize },
    Select(Var, usize),
    SumAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if the loss depends on it.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of records on the tape.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    /// Leaf for one row of a stored matrix (embedding lookup). Only that
    /// row receives gradient.
    pub fn row(&mut self, store: &ParameterStore, id: ParamId, row: usize) -> Result<Var> {
        let table = store.value(id);
        if !table.is_matrix() || row >= table.rows() {
            return Err(Error::invalid(format!(
                "row {row} out of range for {:?} parameter {}",
                table.shape(),
                store.name(id)
            )));
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(value, Op::Row { param: id, row }))
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let value = tensor::matvec(self.value(w), self.value(x))?;
        Ok(self.push(value, Op::MatVec(w, x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.check_same_shape(tb, "add")?;
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Elementwise sum of one or more same-shaped tensors, in the given order.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms.first().ok_or(Error::Empty("sum"))?;
        let mut acc = self.value(first).clone();
        for &t in &terms[1..] {
            let tv = self.value(t);
            acc.check_same_shape(tv, "sum")?;
            for (a, b) in acc.data_mut().iter_mut().zip(tv.data()) {
                *a += b;
            }
        }
        Ok(self.push(acc, Op::Sum(terms.to_vec())))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.check_same_shape(tb, "mul")?;
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Multiplication by a fixed constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * c).collect())
            .expect("shape preserved");
        self.push(value, Op::Scale(x, c))
    }

    /// Multiplication of `x` by the scalar node `scalar`.
    pub fn scale_by(&mut self, scalar: Var, x: Var) -> Result<Var> {
        let s = self.value(scalar);
        if s.len() != 1 {
            return Err(shape_err("scale_by", s, self.value(x)));
        }
        let s = s.item();
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect())?;
        Ok(self.push(value, Op::ScaleBy { scalar, x }))
    }

    pub fn elementwise(&mut self, f: Activation, x: Var) -> Var {
        let t = self.value(x);
        let data = match f {
            Activation::Tanh => t.data().iter().map(|v| v.tanh()).collect(),
            Activation::Sigmoid => t.data().iter().map(|&v| tensor::sigmoid(v)).collect(),
        };
        let value = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        self.push(value, Op::Act(f, x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.elementwise(Activation::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.elementwise(Activation::Sigmoid, x)
    }

    /// Concatenates vectors (scalars count as length-1 vectors).
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() > 1 {
                return Err(Error::invalid(format!(
                    "concat expects vectors, got shape {:?}",
                    t.shape()
                )));
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Inner product of two equal-length vectors; result is a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.is_vector() || ta.shape() != tb.shape() {
            return Err(shape_err("dot", ta, tb));
        }
        let value = Tensor::scalar(tensor::dot(ta.data(), tb.data()));
        Ok(self.push(value, Op::Dot(a, b)))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if !t.is_vector() || t.is_empty() {
            return Err(Error::invalid(format!(
                "softmax expects a non-empty vector, got shape {:?}",
                t.shape()
            )));
        }
        let value = Tensor::vector(tensor::softmax(t.data()));
        Ok(self.push(value, Op::Softmax(x)))
    }

    /// `-ln(max(probs[gold], PROB_FLOOR))`.
    pub fn cross_entropy(&mut self, probs: Var, gold: usize) -> Result<Var> {
        let t = self.value(probs);
        if !t.is_vector() || gold >= t.len() {
            return Err(Error::invalid(format!(
                "gold class {gold} out of range for {} classes",
                t.len()
            )));
        }
        let p = t.data()[gold].max(PROB_FLOOR);
        Ok(self.push(Tensor::scalar(-p.ln()), Op::CrossEntropy { probs, gold }))
    }

    /// Element `i` of a vector as a scalar node.
    pub fn select(&mut self, x: Var, i: usize) -> Result<Var> {
        let t = self.value(x);
        if !t.is_vector() || i >= t.len() {
            return Err(Error::invalid(format!(
                "index {i} out of range for shape {:?}",
                t.shape()
            )));
        }
        let value = Tensor::scalar(t.data()[i]);
        Ok(self.push(value, Op::Select(x, i)))
    }

    /// Sum of all entries as a scalar node.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(total), Op::SumAll(x))
    }

    /// Propagates `d loss / d node` from `loss` back to every leaf and adds
    /// parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for k in (0..=loss.0).rev() {
            let Some(gy) = grads[k].take() else { continue };
            let node = &self.nodes[k];
            let y = node.value.data();
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.accumulate(*id, &gy),
                Op::Row { param, row } => store.accumulate_row(*param, *row, &gy),
                Op::MatVec(w, x) => {
                    let wt = self.value(*w);
                    let xt = self.value(*x);
                    let (rows, cols) = (wt.rows(), wt.cols());
                    let gw = acc(&mut grads, *w, rows * cols);
                    for i in 0..rows {
                        for c in 0..cols {
                            gw[i * cols + c] += gy[i] * xt.data()[c];
                        }
                    }
                    let gx = acc(&mut grads, *x, cols);
                    for (i, g) in gy.iter().enumerate() {
                        for (acc, w) in gx.iter_mut().zip(wt.row(i)) {
                            *acc += w * g;
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, gy.len()), &gy, 1.0);
                    add_into(acc(&mut grads, *b, gy.len()), &gy, 1.0);
                }
                Op::Sum(terms) => {
                    for t in terms {
                        add_into(acc(&mut grads, *t, gy.len()), &gy, 1.0);
                    }
                }
                Op::Mul(a, b) => {
                    let bv = self.value(*b).data();
                    let ga = acc(&mut grads, *a, gy.len());
                    for i in 0..gy.len() {
                        ga[i] += gy[i] * bv[i];
                    }
                    let av = self.value(*a).data();
                    let gb = acc(&mut grads, *b, gy.len());
                    for i in 0..gy.len() {
                        gb[i] += gy[i] * av[i];
                    }
                }
                Op::Scale(x, c) => add_into(acc(&mut grads, *x, gy.len()), &gy, *c),
                Op::ScaleBy { scalar, x } => {
                    let xv = self.value(*x).data();
                    let s = self.value(*scalar).item();
                    let gs: f64 = gy.iter().zip(xv).map(|(g, v)| g * v).sum();
                    acc(&mut grads, *scalar, 1)[0] += gs;
                    add_into(acc(&mut grads, *x, gy.len()), &gy, s);
                }
                Op::Act(f, x) => {
                    let gx = acc(&mut grads, *x, gy.len());
                    for i in 0..gy.len() {
                        let d = match f {
                            Activation::Tanh => 1.0 - y[i] * y[i],
                            Activation::Sigmoid => y[i] * (1.0 - y[i]),
                        };
                        gx[i] += gy[i] * d;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        add_into(acc(&mut grads, *p, n), &gy[offset..offset + n], 1.0);
                        offset += n;
                    }
                }
                Op::Dot(a, b) => {
                    let g = gy[0];
                    let bv = self.value(*b).data();
                    add_into(acc(&mut grads, *a, bv.len()), bv, g);
                    let av = self.value(*a).data();
                    add_into(acc(&mut grads, *b, av.len()), av, g);
                }
                Op::Softmax(x) => {
                    let inner: f64 = gy.iter().zip(y).map(|(g, p)| g * p).sum();
                    let gx = acc(&mut grads, *x, y.len());
                    for i in 0..y.len() {
                        gx[i] += y[i] * (gy[i] - inner);
                    }
                }
                Op::CrossEntropy { probs, gold } => {
                    let pv = self.value(*probs).data();
                    let p = pv[*gold];
                    let gp = acc(&mut grads, *probs, pv.len());
                    if p > PROB_FLOOR {
                        gp[*gold] -= gy[0] / p;
                    }
                }
                Op::Select(x, i) => {
                    let n = self.value(*x).len();
                    acc(&mut grads, *x, n)[*i] += gy[0];
                }
                Op::SumAll(x) => {
                    let n = self.value(*x).len();
                    acc(&mut grads, *x, n).iter_mut().for_each(|g| *g += gy[0]);
                }
            }
            grads[k] = Some(gy);
        }
        Ok(Gradients { grads })
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], var: Var, len: usize) -> &mut Vec<f64> {
    grads[var.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}
