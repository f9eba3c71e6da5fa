use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK_RELATION: &str = "<unk-rel>";
pub const UNK_RELATION_ID: usize = 0;

/// Optional relation label rewriting applied before lookup. Off by default:
/// labels are opaque strings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelationNormalizer {
    pub case_fold: bool,
    /// Drops nuclearity suffixes such as `-NS`, `_SN` or `[N][S]`.
    pub strip_nuclearity: bool,
}

impl RelationNormalizer {
    pub fn apply<'a>(&self, label: &'a str) -> std::borrow::Cow<'a, str> {
        if !self.case_fold && !self.strip_nuclearity {
            return label.into();
        }
        let mut s = label.to_string();
        if self.strip_nuclearity {
            for suffix in ["[N][S]", "[S][N]", "[N][N]"] {
                if let Some(stripped) = s.strip_suffix(suffix) {
                    s = stripped.to_string();
                }
            }
            for suffix in ["NS", "SN", "NN"] {
                for sep in ['-', '_'] {
                    let full = format!("{sep}{suffix}");
                    if let Some(stripped) = s.strip_suffix(full.as_str()) {
                        s = stripped.to_string();
                    }
                }
            }
        }
        if self.case_fold {
            s = s.to_lowercase();
        }
        s.into()
    }
}

/// Relation label → dense index. Index 0 is reserved for labels not seen
/// when the vocabulary was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RelationRepr", into = "RelationRepr")]
pub struct RelationVocabulary {
    labels: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    normalizer: RelationNormalizer,
}

#[derive(Serialize, Deserialize)]
struct RelationRepr {
    labels: Vec<String>,
    counts: Vec<u64>,
    #[serde(default)]
    normalizer: RelationNormalizer,
}

impl TryFrom<RelationRepr> for RelationVocabulary {
    type Error = Error;

    fn try_from(r: RelationRepr) -> Result<Self> {
        if r.labels.len() != r.counts.len() {
            return Err(Error::invalid("relation labels and counts differ in length"));
        }
        RelationVocabulary::from_entries(r.labels.into_iter().zip(r.counts).collect(), r.normalizer)
    }
}

impl From<RelationVocabulary> for RelationRepr {
    fn from(v: RelationVocabulary) -> Self {
        RelationRepr {
            labels: v.labels,
            counts: v.counts,
            normalizer: v.normalizer,
        }
    }
}

impl RelationVocabulary {
    /// Counts labels (after normalization) and orders them by decreasing
    /// count, then alphabetically.
    pub fn build<I, S>(labels: I, normalizer: RelationNormalizer) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for l in labels {
            let l = normalizer.apply(l.as_ref()).into_owned();
            if l != UNK_RELATION {
                *counts.entry(l).or_default() += 1;
            }
        }
        let mut sorted: Vec<(String, u64)> = counts.into_iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut entries = vec![(UNK_RELATION.to_string(), 0)];
        entries.extend(sorted);
        Self::from_entries(entries, normalizer).expect("labels are unique")
    }

    pub fn from_entries(entries: Vec<(String, u64)>, normalizer: RelationNormalizer) -> Result<Self> {
        if entries.first().map(|e| e.0.as_str()) != Some(UNK_RELATION) {
            return Err(Error::invalid(format!(
                "relation vocabulary must start with {UNK_RELATION}"
            )));
        }
        let mut index = HashMap::new();
        let mut labels = Vec::new();
        let mut counts = Vec::new();
        for (i, (l, c)) in entries.into_iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate relation {l:?}")));
            }
            labels.push(l);
            counts.push(c);
        }
        Ok(RelationVocabulary {
            labels,
            counts,
            index,
            normalizer,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    /// Index of `label`, or [`UNK_RELATION_ID`] for unseen labels.
    pub fn index(&self, label: &str) -> usize {
        let l = self.normalizer.apply(label);
        self.index.get(l.as_ref()).copied().unwrap_or(UNK_RELATION_ID)
    }

    /// `label<TAB>count` lines in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (l, c) in self.labels.iter().zip(&self.counts) {
            let _ = writeln!(out, "{l}\t{c}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (l, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("relation line {}: expected label<TAB>count", i + 1)))?;
            let c = c
                .trim()
                .parse()
                .map_err(|e| Error::invalid(format!("relation line {}: {e}", i + 1)))?;
            entries.push((l.to_string(), c));
        }
        Self::from_entries(entries, RelationNormalizer::default())
    }
}

pub fn relation_index(label: &str, vocab: &RelationVocabulary) -> usize {
    vocab.index(label)
}
