//! Document model: EDU encoding, recursive composition over the dependency
//! tree and the softmax classifier, in four variants.
//!
//! | variant     | document vector                                   |
//! |-------------|---------------------------------------------------|
//! | `Full`      | composed root, relation matrices + attention      |
//! | `Unlabeled` | composed root, attention only                     |
//! | `Root`      | EDU vector of the root, no composition            |
//! | `Additive`  | mean of all EDU vectors, tree ignored             |

pub mod checkpoint;
pub mod compose;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use compose::{
    attention_weight, classify, compose_full, compose_unlabeled, normalized_attention, Child,
};

use crate::corpus::DocumentRecord;
use crate::encoder::{encode_edu, LstmParams};
use crate::error::{Error, Result};
use crate::numeric::{Graph, Mode, ParamId, ParameterStore, SeededRng, Stream, Tensor, Var};
use crate::text::{encode, EmbeddingTable, Vocabulary};
use crate::trees::{DependencyTree, RelationVocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Unlabeled,
    Root,
    Additive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Unlabeled, Variant::Root, Variant::Additive];

    pub fn has_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::Unlabeled)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    /// Independent sigmoid gate per arc.
    #[default]
    Unnormalized,
    /// Softmax across the children of each parent.
    Normalized,
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(Error::invalid(format!(
                        "unknown {} {s:?}", stringify!($ty).to_lowercase()
                    ))),
                }
            }
        }
    };
}

string_enum!(Variant {
    Variant::Full => "full",
    Variant::Unlabeled => "unlabeled",
    Variant::Root => "root",
    Variant::Additive => "additive",
});

string_enum!(AttentionMode {
    AttentionMode::Unnormalized => "unnormalized",
    AttentionMode::Normalized => "normalized",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub hidden_dim: usize,
    pub variant: Variant,
    pub attention: AttentionMode,
    /// Class labels; position is the class index.
    pub labels: Vec<String>,
}

impl ModelConfig {
    /// Width of EDU and node vectors (`2h`).
    pub fn width(&self) -> usize {
        2 * self.hidden_dim
    }
}

#[derive(Debug, Clone)]
struct ParamIds {
    embedding: ParamId,
    fwd: LstmParams,
    bwd: LstmParams,
    attention: Option<ParamId>,
    composition: Vec<ParamId>,
    out_w: ParamId,
    out_b: ParamId,
}

const EMBEDDING: &str = "embedding";
const LSTM_FWD: &str = "lstm.fwd";
const LSTM_BWD: &str = "lstm.bwd";
const ATTENTION: &str = "attention";
const OUTPUT_W: &str = "output.w";
const OUTPUT_B: &str = "output.b";

fn composition_name(relation: usize) -> String {
    format!("composition.{relation}")
}

/// A document with tokens and relations mapped to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDocument {
    pub id: String,
    pub label: Option<usize>,
    pub edus: Vec<Vec<usize>>,
    pub tree: DependencyTree,
    /// Relation index of each node's arc to its head (`None` at the root).
    pub relation_ids: Vec<Option<usize>>,
}

/// Attention on one arc, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub parent: usize,
    pub child: usize,
    pub relation: Option<String>,
    pub alpha: f64,
}

/// Nodes produced by [`Model::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    pub edus: Vec<Option<Var>>,
    pub t_root: Var,
    pub logits: Var,
    pub probs: Var,
    pub attention: Vec<AttentionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
    pub t_root: Vec<f64>,
    pub attention: Vec<AttentionRecord>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub relations: RelationVocabulary,
    pub store: ParameterStore,
    ids: ParamIds,
}

impl Model {
    /// Fresh model. Without `embeddings`, word vectors are drawn uniformly
    /// from `[-0.1, 0.1]`; all matrices use the fan-based uniform scheme.
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        relations: RelationVocabulary,
        embeddings: Option<EmbeddingTable>,
        seed: u64,
    ) -> Result<Self> {
        if config.word_dim == 0 || config.hidden_dim == 0 {
            return Err(Error::invalid("word_dim and hidden_dim must be positive"));
        }
        if config.labels.is_empty() {
            return Err(Error::Empty("label set"));
        }
        let embeddings = match embeddings {
            Some(e) => e,
            None => {
                let mut rng = SeededRng::stream(seed, Stream::Embeddings);
                EmbeddingTable::random(vocab.len(), config.word_dim, &mut rng)
            }
        };
        if embeddings.table.shape() != [vocab.len(), config.word_dim] {
            return Err(Error::Shape {
                op: "embedding table",
                left: embeddings.table.shape().to_vec(),
                right: vec![vocab.len(), config.word_dim],
            });
        }

        let mut rng = SeededRng::stream(seed, Stream::Init);
        let mut store = ParameterStore::new();
        let (d, h, w, c) = (config.word_dim, config.hidden_dim, config.width(), config.labels.len());
        let emb = store.add(EMBEDDING, embeddings.table)?;
        store.set_frozen(emb, embeddings.frozen);
        LstmParams::init(&mut store, LSTM_FWD, d, h, &mut rng)?;
        LstmParams::init(&mut store, LSTM_BWD, d, h, &mut rng)?;
        if config.variant.has_attention() {
            store.add_glorot(ATTENTION, w, w, &mut rng)?;
        }
        if config.variant == Variant::Full {
            for r in 0..relations.len() {
                store.add_glorot(composition_name(r), w, w, &mut rng)?;
            }
        }
        store.add_glorot(OUTPUT_W, c, w, &mut rng)?;
        store.add(OUTPUT_B, Tensor::zeros(&[c]))?;
        Self::from_parts(config, vocab, relations, store)
    }

    /// Reassembles a model around an existing parameter store, checking that
    /// every expected tensor is present with the right shape.
    pub fn from_parts(
        config: ModelConfig,
        vocab: Vocabulary,
        relations: RelationVocabulary,
        store: ParameterStore,
    ) -> Result<Self> {
        let (d, h, w, c) = (config.word_dim, config.hidden_dim, config.width(), config.labels.len());
        let find = |name: &str, shape: &[usize]| -> Result<ParamId> {
            let id = store
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if store.value(id).shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    store.value(id).shape()
                )));
            }
            Ok(id)
        };
        let embedding = find(EMBEDDING, &[vocab.len(), d])?;
        let fwd = LstmParams::resolve(&store, LSTM_FWD)?;
        let bwd = LstmParams::resolve(&store, LSTM_BWD)?;
        for lstm in [&fwd, &bwd] {
            for gate in &lstm.gates {
                find(store.name(gate.input), &[h, d])?;
                find(store.name(gate.recurrent), &[h, h])?;
                find(store.name(gate.bias), &[h])?;
            }
        }
        let attention = if config.variant.has_attention() {
            Some(find(ATTENTION, &[w, w])?)
        } else {
            None
        };
        let composition = if config.variant == Variant::Full {
            (0..relations.len())
                .map(|r| find(&composition_name(r), &[w, w]))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let out_w = find(OUTPUT_W, &[c, w])?;
        let out_b = find(OUTPUT_B, &[c])?;
        let expected = 1 + 24 + attention.iter().count() + composition.len() + 2;
        if store.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters for a {} model, found {}",
                config.variant,
                store.len()
            )));
        }
        Ok(Model {
            config,
            vocab,
            relations,
            store,
            ids: ParamIds {
                embedding,
                fwd,
                bwd,
                attention,
                composition,
                out_w,
                out_b,
            },
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn attention_param(&self) -> Option<ParamId> {
        self.ids.attention
    }

    /// Relation matrices indexed like [`Model::relations`] (Full only).
    pub fn composition_params(&self) -> &[ParamId] {
        &self.ids.composition
    }

    pub fn embedding_param(&self) -> ParamId {
        self.ids.embedding
    }

    pub fn output_params(&self) -> (ParamId, ParamId) {
        (self.ids.out_w, self.ids.out_b)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.config.labels.iter().position(|l| l == label)
    }

    /// Copies every parameter of `other` whose name and shape match one of
    /// ours; returns how many were copied.
    pub fn transfer_from(&mut self, other: &Model) -> usize {
        let mut copied = 0;
        for id in other.store.ids() {
            if let Some(mine) = self.store.id(other.store.name(id)) {
                let value = other.store.value(id).clone();
                if self.store.set_value(mine, value).is_ok() {
                    copied += 1;
                }
            }
        }
        copied
    }

    /// Validates the tree and maps tokens, relations and label to ids.
    pub fn prepare(&self, doc: &DocumentRecord) -> Result<EncodedDocument> {
        prepare_document(doc, &self.vocab, &self.relations, &self.config.labels)
    }

    /// Encodes the EDUs, builds the document vector for the configured
    /// variant and classifies it, all on `g`.
    pub fn forward(&self, g: &mut Graph, doc: &EncodedDocument, mode: &mut Mode<'_>) -> Result<Forward> {
        let root = doc
            .tree
            .root()
            .ok_or_else(|| Error::Dependency(format!("document {}: no root", doc.id)))?;
        let mut edus = vec![None; doc.edus.len()];
        for (i, ids) in doc.edus.iter().enumerate() {
            if self.config.variant == Variant::Root && i != root {
                continue;
            }
            edus[i] = Some(encode_edu(
                g,
                &self.store,
                ids,
                self.ids.embedding,
                &self.ids.fwd,
                &self.ids.bwd,
                mode,
            )?);
        }
        let (t_root, attention) = self.document_representation(g, doc, &edus)?;
        let w_out = g.param(&self.store, self.ids.out_w);
        let b_out = g.param(&self.store, self.ids.out_b);
        let (logits, probs) = classify(g, t_root, w_out, b_out, mode)?;
        Ok(Forward {
            edus,
            t_root,
            logits,
            probs,
            attention,
        })
    }

    /// Document vector from already-encoded EDU vectors.
    pub fn document_representation(
        &self,
        g: &mut Graph,
        doc: &EncodedDocument,
        edus: &[Option<Var>],
    ) -> Result<(Var, Vec<AttentionRecord>)> {
        let root = doc
            .tree
            .root()
            .ok_or_else(|| Error::Dependency(format!("document {}: no root", doc.id)))?;
        let edu = |i: usize| edus[i].ok_or_else(|| Error::invalid(format!("EDU {i} not encoded")));
        match self.config.variant {
            Variant::Root => Ok((edu(root)?, Vec::new())),
            Variant::Additive => {
                let all = (0..edus.len()).map(edu).collect::<Result<Vec<_>>>()?;
                let total = g.sum(&all)?;
                Ok((g.scale(total, 1.0 / all.len() as f64), Vec::new()))
            }
            Variant::Full | Variant::Unlabeled => self.compose_tree(g, doc, edus),
        }
    }

    fn compose_tree(
        &self,
        g: &mut Graph,
        doc: &EncodedDocument,
        edus: &[Option<Var>],
    ) -> Result<(Var, Vec<AttentionRecord>)> {
        let w_attn = g.param(
            &self.store,
            self.ids.attention.expect("attention variants own W_attn"),
        );
        let children = doc.tree.children();
        let mut subtree: Vec<Option<Var>> = vec![None; edus.len()];
        let mut records = Vec::new();
        for node in doc.tree.post_order() {
            let e = edus[node].ok_or_else(|| Error::invalid(format!("EDU {node} not encoded")))?;
            let kids: Vec<Var> = children[node]
                .iter()
                .map(|&c| subtree[c].expect("post-order visits children first"))
                .collect();
            let alphas = if kids.is_empty() {
                Vec::new()
            } else {
                match self.config.attention {
                    AttentionMode::Unnormalized => kids
                        .iter()
                        .map(|&t| attention_weight(g, e, t, w_attn))
                        .collect::<Result<Vec<_>>>()?,
                    AttentionMode::Normalized => normalized_attention(g, e, &kids, w_attn)?,
                }
            };
            let mut composed = Vec::with_capacity(kids.len());
            for ((&child, &t), &alpha) in children[node].iter().zip(&kids).zip(&alphas) {
                let relation = match self.config.variant {
                    Variant::Full => {
                        let r = doc.relation_ids[child].unwrap_or(crate::trees::UNK_RELATION_ID);
                        let id = *self.ids.composition.get(r).ok_or_else(|| {
                            Error::invalid(format!("no composition matrix for relation {r}"))
                        })?;
                        Some(g.param(&self.store, id))
                    }
                    _ => None,
                };
                composed.push(Child { t, relation, alpha });
                records.push(AttentionRecord {
                    parent: node,
                    child,
                    relation: doc.tree.relation(child).map(str::to_string),
                    alpha: g.value(alpha).item(),
                });
            }
            subtree[node] = Some(compose_full(g, e, &composed)?);
        }
        let root = doc.tree.root().expect("checked by caller");
        Ok((subtree[root].expect("root composed last"), records))
    }

    /// Forward pass plus cross-entropy against the document's gold label.
    pub fn loss(&self, g: &mut Graph, doc: &EncodedDocument, mode: &mut Mode<'_>) -> Result<(Var, Forward)> {
        let gold = doc
            .label
            .ok_or_else(|| Error::invalid(format!("document {} has no label", doc.id)))?;
        let fwd = self.forward(g, doc, mode)?;
        let loss = g.cross_entropy(fwd.probs, gold)?;
        Ok((loss, fwd))
    }

    /// Evaluation-mode prediction on a fresh graph.
    pub fn predict(&self, doc: &EncodedDocument) -> Result<Prediction> {
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, doc, &mut Mode::Eval)?;
        let probs = g.value(fwd.probs).data().to_vec();
        Ok(Prediction {
            label: argmax(&probs),
            probs,
            t_root: g.value(fwd.t_root).data().to_vec(),
            attention: fwd.attention,
        })
    }
}

/// Maps a record onto vocabulary, relation and label ids after validating
/// its tree.
pub fn prepare_document(
    doc: &DocumentRecord,
    vocab: &Vocabulary,
    relations: &RelationVocabulary,
    labels: &[String],
) -> Result<EncodedDocument> {
    let tree = doc.dependency_tree()?;
    let label = match &doc.label {
        Some(l) => Some(labels.iter().position(|x| x == l).ok_or_else(|| {
            Error::invalid(format!("document {}: unknown label {l:?}", doc.id))
        })?),
        None => None,
    };
    let relation_ids = tree
        .relations()
        .iter()
        .map(|r| r.as_deref().map(|l| relations.index(l)))
        .collect();
    Ok(EncodedDocument {
        id: doc.id.clone(),
        label,
        edus: doc.edus.iter().map(|e| encode(e, vocab)).collect(),
        tree,
        relation_ids,
    })
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best })
}

#[cfg(test)]
mod tests;
