//! Tree composition primitives: attention gates, composition and the
//! softmax classifier. All of these record onto the caller's graph.

use crate::error::{Error, Result};
use crate::numeric::{Graph, Mode, Var};

/// `σ(e_iᵀ · W_α · t_j)`. Depends only on the parent's EDU vector and this
/// one child, never on its siblings.
pub fn attention_weight(g: &mut Graph, e_parent: Var, t_child: Var, w_attn: Var) -> Result<Var> {
    let projected = g.matvec(w_attn, t_child)?;
    let score = g.dot(e_parent, projected)?;
    Ok(g.sigmoid(score))
}

/// Softmax over children of `t_jᵀ · W_α · e_i`; one scalar node per child.
pub fn normalized_attention(
    g: &mut Graph,
    e_parent: Var,
    children: &[Var],
    w_attn: Var,
) -> Result<Vec<Var>> {
    if children.is_empty() {
        return Err(Error::Empty("child list for normalized attention"));
    }
    let projected = g.matvec(w_attn, e_parent)?;
    let scores = children
        .iter()
        .map(|&t| g.dot(t, projected))
        .collect::<Result<Vec<_>>>()?;
    let stacked = g.concat(&scores)?;
    let weights = g.softmax(stacked)?;
    (0..children.len()).map(|j| g.select(weights, j)).collect()
}

/// A child subtree as seen by its parent's composition.
#[derive(Debug, Clone, Copy)]
pub struct Child {
    pub t: Var,
    /// Relation-specific matrix; `None` composes with the identity.
    pub relation: Option<Var>,
    pub alpha: Var,
}

/// `tanh(e_i + Σ_j α_ij · W_{r_ij} · t_j)`, summed in the given child order.
/// With no children this is `tanh(e_i)`.
pub fn compose_full(g: &mut Graph, e: Var, children: &[Child]) -> Result<Var> {
    let mut terms = Vec::with_capacity(children.len() + 1);
    terms.push(e);
    for c in children {
        let moved = match c.relation {
            Some(w) => g.matvec(w, c.t)?,
            None => c.t,
        };
        terms.push(g.scale_by(c.alpha, moved)?);
    }
    let total = g.sum(&terms)?;
    Ok(g.tanh(total))
}

/// `tanh(e_i + Σ_j α_ij · t_j)`.
pub fn compose_unlabeled(g: &mut Graph, e: Var, children: &[(Var, Var)]) -> Result<Var> {
    let children: Vec<Child> = children
        .iter()
        .map(|&(t, alpha)| Child {
            t,
            relation: None,
            alpha,
        })
        .collect();
    compose_full(g, e, &children)
}

/// Logits and probabilities for `softmax(W_o · dropout(t) + b)`.
pub fn classify(
    g: &mut Graph,
    t_root: Var,
    w_out: Var,
    b_out: Var,
    mode: &mut Mode<'_>,
) -> Result<(Var, Var)> {
    let dropped = mode.dropout(g, t_root)?;
    let scores = g.matvec(w_out, dropped)?;
    let logits = g.add(scores, b_out)?;
    let probs = g.softmax(logits)?;
    Ok((logits, probs))
}
