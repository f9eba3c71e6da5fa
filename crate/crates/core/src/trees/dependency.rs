use std::fmt;

use super::rst::{Nuclearity, RstTree};

/// Discourse dependency tree over `n` EDUs. `heads[i]` is `None` for the
/// root; `relations[i]` labels the arc from `i` to its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    heads: Vec<Option<usize>>,
    relations: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    LengthMismatch { heads: usize, relations: usize },
    NoRoot,
    MultipleRoots(Vec<usize>),
    HeadOutOfRange { node: usize, head: usize },
    Cycle(Vec<usize>),
    Disconnected(Vec<usize>),
    MissingLabel(usize),
    LabelAtRoot(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "tree has no EDUs"),
            Violation::LengthMismatch { heads, relations } => {
                write!(f, "{heads} heads but {relations} relations")
            }
            Violation::NoRoot => write!(f, "no root"),
            Violation::MultipleRoots(r) => write!(f, "multiple roots: {r:?}"),
            Violation::HeadOutOfRange { node, head } => {
                write!(f, "node {node} has out-of-range head {head}")
            }
            Violation::Cycle(c) => write!(f, "cycle through nodes {c:?}"),
            Violation::Disconnected(n) => write!(f, "nodes {n:?} do not reach the root"),
            Violation::MissingLabel(n) => write!(f, "arc from node {n} has no relation"),
            Violation::LabelAtRoot(n) => write!(f, "root node {n} carries a relation"),
        }
    }
}

impl DependencyTree {
    /// Wraps arrays as given; call [`validate_dependency`] before relying on
    /// tree structure.
    pub fn new(heads: Vec<Option<usize>>, relations: Vec<Option<String>>) -> Self {
        DependencyTree { heads, relations }
    }

    /// Builds from the interchange form where `-1` marks the root.
    pub fn from_signed(heads: &[i64], relations: Vec<Option<String>>) -> Result<Self, String> {
        let heads = heads
            .iter()
            .map(|&h| match h {
                -1 => Ok(None),
                h if h >= 0 => Ok(Some(h as usize)),
                h => Err(format!("invalid head {h}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DependencyTree { heads, relations })
    }

    pub fn single() -> Self {
        DependencyTree {
            heads: vec![None],
            relations: vec![None],
        }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn relations(&self) -> &[Option<String>] {
        &self.relations
    }

    pub fn head(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    pub fn relation(&self, i: usize) -> Option<&str> {
        self.relations[i].as_deref()
    }

    pub fn signed_heads(&self) -> Vec<i64> {
        self.heads.iter().map(|h| h.map_or(-1, |h| h as i64)).collect()
    }

    pub fn root(&self) -> Option<usize> {
        self.heads.iter().position(Option::is_none)
    }

    /// Children of every node, each list in increasing index order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (i, h) in self.heads.iter().enumerate() {
            if let Some(h) = h {
                if *h < out.len() {
                    out[*h].push(i);
                }
            }
        }
        out
    }

    /// `(dependent, head, relation)` for every non-root node.
    pub fn arcs(&self) -> Vec<(usize, usize, Option<&str>)> {
        self.heads
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.map(|h| (i, h, self.relation(i))))
            .collect()
    }

    /// Nodes in post-order from the root (children before parents, siblings
    /// by increasing index). Requires a valid tree.
    pub fn post_order(&self) -> Vec<usize> {
        let Some(root) = self.root() else {
            return Vec::new();
        };
        let children = self.children();
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(root, 0usize)];
        while let Some((node, next)) = stack.pop() {
            if let Some(&c) = children[node].get(next) {
                stack.push((node, next + 1));
                stack.push((c, 0));
            } else {
                out.push(node);
            }
        }
        out
    }
}

/// Converts by head percolation: a leaf heads itself, an internal node is
/// headed by the head of its leftmost nucleus, and every other child's head
/// attaches to it with the node's relation label.
pub fn rst_to_dependency(tree: &RstTree) -> DependencyTree {
    let n = tree.edu_count();
    let mut heads = vec![None; n];
    let mut relations = vec![None; n];
    assign_heads(tree, &mut heads, &mut relations);
    DependencyTree { heads, relations }
}

fn assign_heads(
    node: &RstTree,
    heads: &mut [Option<usize>],
    relations: &mut [Option<String>],
) -> usize {
    match node {
        RstTree::Leaf(i) => *i,
        RstTree::Internal { relation, children } => {
            let child_heads: Vec<usize> = children
                .iter()
                .map(|(_, c)| assign_heads(c, heads, relations))
                .collect();
            let nucleus = children
                .iter()
                .position(|(n, _)| *n == Nuclearity::Nucleus)
                .expect("parsed trees always have a nucleus");
            let head = child_heads[nucleus];
            for (k, &h) in child_heads.iter().enumerate() {
                if k != nucleus {
                    heads[h] = Some(head);
                    relations[h] = Some(relation.clone());
                }
            }
            head
        }
    }
}

/// Lists every structural problem; an empty list means the tree is valid.
pub fn validate_dependency(tree: &DependencyTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = tree.heads.len();
    if n == 0 {
        out.push(Violation::Empty);
        return out;
    }
    if tree.relations.len() != n {
        out.push(Violation::LengthMismatch {
            heads: n,
            relations: tree.relations.len(),
        });
    }

    let roots: Vec<usize> = (0..n).filter(|&i| tree.heads[i].is_none()).collect();
    match roots.len() {
        0 => out.push(Violation::NoRoot),
        1 => {}
        _ => out.push(Violation::MultipleRoots(roots.clone())),
    }
    for (i, h) in tree.heads.iter().enumerate() {
        if let Some(h) = *h {
            if h >= n {
                out.push(Violation::HeadOutOfRange { node: i, head: h });
            }
        }
    }

    // 0 = unvisited, 1 = on current walk, 2 = reaches a root, 3 = does not
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        let outcome = loop {
            match state[cur] {
                2 | 3 => break state[cur],
                1 => {
                    let at = path.iter().position(|&p| p == cur).expect("on path");
                    let mut cycle = path[at..].to_vec();
                    cycle.sort_unstable();
                    out.push(Violation::Cycle(cycle));
                    break 3;
                }
                _ => {}
            }
            state[cur] = 1;
            path.push(cur);
            match tree.heads[cur] {
                None => break 2,
                Some(h) if h >= n => break 3,
                Some(h) => cur = h,
            }
        };
        for &p in &path {
            state[p] = outcome;
        }
    }
    let in_cycle: Vec<usize> = out
        .iter()
        .filter_map(|v| match v {
            Violation::Cycle(c) => Some(c.clone()),
            _ => None,
        })
        .flatten()
        .collect();
    let dangling: Vec<usize> = (0..n)
        .filter(|i| state[*i] == 3 && !in_cycle.contains(i))
        .collect();
    if !dangling.is_empty() && roots.len() == 1 {
        out.push(Violation::Disconnected(dangling));
    }

    for i in 0..n.min(tree.relations.len()) {
        match (tree.heads[i], &tree.relations[i]) {
            (Some(_), None) => out.push(Violation::MissingLabel(i)),
            (None, Some(_)) => out.push(Violation::LabelAtRoot(i)),
            _ => {}
        }
    }
    out
}
