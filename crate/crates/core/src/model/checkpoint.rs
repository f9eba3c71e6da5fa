//! JSON checkpoint container.
//!
//! ```json
//! {
//!   "format": "discocat-checkpoint",
//!   "version": 1,
//!   "config": {"word_dim": 32, "hidden_dim": 32, "variant": "full",
//!              "attention": "unnormalized", "labels": ["neg", "pos"]},
//!   "vocab": {"tokens": ["<unk>", "<num>", ...], "counts": [...]},
//!   "relations": {"labels": ["<unk-rel>", ...], "counts": [...]},
//!   "parameters": [{"name": "embedding", "shape": [V, d], "data": [...],
//!                   "frozen": false}, ...]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so loading reproduces
//! every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::numeric::{ParameterStore, Tensor};
use crate::text::Vocabulary;
use crate::trees::RelationVocabulary;

pub const FORMAT: &str = "discocat-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vocabulary,
    relations: RelationVocabulary,
    parameters: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(default)]
    frozen: bool,
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let parameters = self
            .store
            .ids()
            .map(|id| NamedTensor {
                name: self.store.name(id).to_string(),
                shape: self.store.value(id).shape().to_vec(),
                data: self.store.value(id).data().to_vec(),
                frozen: self.store.is_frozen(id),
            })
            .collect();
        let file = CheckpointFile {
            format: FORMAT.to_string(),
            version: VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            relations: self.relations.clone(),
            parameters,
        };
        serde_json::to_string(&file).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format {:?})", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        let mut store = ParameterStore::new();
        for p in file.parameters {
            let id = store.add(p.name, Tensor::new(p.shape, p.data)?)?;
            store.set_frozen(id, p.frozen);
        }
        Model::from_parts(file.config, file.vocab, file.relations, store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}
