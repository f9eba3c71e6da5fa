//! Bidirectional LSTM encoder for elementary discourse units.

use crate::error::Result;
use crate::numeric::{Graph, Mode, ParamId, ParameterStore, SeededRng, Tensor, Var};

/// Gate order used everywhere: input, forget, output, candidate.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "candidate"];
const FORGET: usize = 1;

/// Initial forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gate {
    /// `[h × d]`
    pub input: ParamId,
    /// `[h × h]`
    pub recurrent: ParamId,
    /// `[h]`
    pub bias: ParamId,
}

/// One direction of an LSTM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmParams {
    pub gates: [Gate; 4],
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    /// Registers weights named `{prefix}.{gate}.{w,u,b}`.
    pub fn init(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        for (k, gate) in GATE_NAMES.iter().enumerate() {
            store.add_glorot(format!("{prefix}.{gate}.w"), hidden_dim, input_dim, rng)?;
            store.add_glorot(format!("{prefix}.{gate}.u"), hidden_dim, hidden_dim, rng)?;
            let b = if k == FORGET { FORGET_BIAS } else { 0.0 };
            store.add(format!("{prefix}.{gate}.b"), Tensor::filled(&[hidden_dim], b))?;
        }
        Self::resolve(store, prefix)
    }

    /// Looks the weights up by name in an existing store.
    pub fn resolve(store: &ParameterStore, prefix: &str) -> Result<Self> {
        let find = |name: String| {
            store
                .id(&name)
                .ok_or_else(|| crate::Error::Checkpoint(format!("missing parameter {name}")))
        };
        let mut gates = Vec::with_capacity(4);
        for gate in GATE_NAMES {
            gates.push(Gate {
                input: find(format!("{prefix}.{gate}.w"))?,
                recurrent: find(format!("{prefix}.{gate}.u"))?,
                bias: find(format!("{prefix}.{gate}.b"))?,
            });
        }
        let first = store.value(gates[0].input);
        let (hidden_dim, input_dim) = (first.rows(), first.cols());
        Ok(LstmParams {
            gates: [gates[0], gates[1], gates[2], gates[3]],
            input_dim,
            hidden_dim,
        })
    }
}

/// One LSTM transition:
/// `c = f ⊙ c_prev + i ⊙ g`, `h = o ⊙ tanh(c)` with sigmoid `i, f, o` and
/// tanh candidate `g`.
pub fn lstm_step(
    g: &mut Graph,
    store: &ParameterStore,
    params: &LstmParams,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let mut acts = Vec::with_capacity(4);
    for (k, gate) in params.gates.iter().enumerate() {
        let w = g.param(store, gate.input);
        let u = g.param(store, gate.recurrent);
        let b = g.param(store, gate.bias);
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, h_prev)?;
        let pre = g.sum(&[wx, uh, b])?;
        acts.push(if k == 3 { g.tanh(pre) } else { g.sigmoid(pre) });
    }
    let (i, f, o, cand) = (acts[0], acts[1], acts[2], acts[3]);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

fn run(
    g: &mut Graph,
    store: &ParameterStore,
    params: &LstmParams,
    inputs: impl Iterator<Item = Var>,
) -> Result<Var> {
    let zeros = Tensor::zeros(&[params.hidden_dim]);
    let mut h = g.constant(zeros.clone());
    let mut c = g.constant(zeros);
    for x in inputs {
        (h, c) = lstm_step(g, store, params, x, h, c)?;
    }
    Ok(h)
}

/// EDU vector: last forward state concatenated with last backward state,
/// both directions starting from zero. Embedding inputs get dropout in
/// training mode, one mask per position. An empty EDU encodes to zeros.
pub fn encode_edu(
    g: &mut Graph,
    store: &ParameterStore,
    token_ids: &[usize],
    embeddings: ParamId,
    fwd: &LstmParams,
    bwd: &LstmParams,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    if token_ids.is_empty() {
        log::warn!("empty EDU encoded as a zero vector");
        let width = fwd.hidden_dim + bwd.hidden_dim;
        return Ok(g.constant(Tensor::zeros(&[width])));
    }
    let mut inputs = Vec::with_capacity(token_ids.len());
    for &id in token_ids {
        let x = g.row(store, embeddings, id)?;
        inputs.push(mode.dropout(g, x)?);
    }
    let hf = run(g, store, fwd, inputs.iter().copied())?;
    let hb = run(g, store, bwd, inputs.iter().rev().copied())?;
    g.concat(&[hf, hb])
}
