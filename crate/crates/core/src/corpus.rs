//! JSON-lines document records.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_tokens;
use crate::trees::{parse_rst, rst_to_dependency, validate_dependency, DependencyTree};

/// One document: EDU token lists plus its discourse dependency tree.
///
/// ```json
/// {"id": "d1", "label": "pos", "edus": [["great", "film"], ["really"]],
///  "heads": [-1, 0], "relations": [null, "Elaboration"]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub edus: Vec<Vec<String>>,
    #[serde(default)]
    pub heads: Vec<i64>,
    #[serde(default)]
    pub relations: Vec<Option<String>>,
    /// Bracketed RST source; used when `heads` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rst: Option<String>,
}

impl DocumentRecord {
    /// Validated dependency tree whose size matches the EDU count.
    pub fn dependency_tree(&self) -> Result<DependencyTree> {
        let tree = if !self.heads.is_empty() || self.rst.is_none() {
            DependencyTree::from_signed(&self.heads, self.relations.clone())
                .map_err(|e| Error::Dependency(format!("document {}: {e}", self.id)))?
        } else {
            rst_to_dependency(&parse_rst(self.rst.as_deref().unwrap_or_default())?)
        };
        let violations = validate_dependency(&tree);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Dependency(format!(
                "document {}: {}",
                self.id,
                msgs.join("; ")
            )));
        }
        if tree.len() != self.edus.len() {
            return Err(Error::Dependency(format!(
                "document {}: tree has {} nodes but there are {} EDUs",
                self.id,
                tree.len(),
                self.edus.len()
            )));
        }
        Ok(tree)
    }

    /// Fills `heads`/`relations` from the tree form.
    pub fn set_tree(&mut self, tree: &DependencyTree) {
        self.heads = tree.signed_heads();
        self.relations = tree.relations().to_vec();
    }

    pub fn normalize(&mut self) {
        for edu in &mut self.edus {
            *edu = normalize_tokens(edu);
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.edus.iter().flatten().map(String::as_str)
    }
}

pub fn parse_corpus(reader: impl BufRead, path: &Path) -> Result<Vec<DocumentRecord>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<DocumentRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), path)
}

pub fn write_corpus(mut out: impl Write, docs: &[DocumentRecord]) -> std::io::Result<()> {
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
