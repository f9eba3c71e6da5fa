use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const NUM: &str = "<num>";
pub const UNK_ID: usize = 0;
pub const NUM_ID: usize = 1;

/// Token ↔ id mapping. Ids are dense; `UNK_ID` and `NUM_ID` are always
/// present and come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabRepr) -> Result<Self> {
        if r.tokens.len() != r.counts.len() {
            return Err(Error::invalid("vocabulary tokens and counts differ in length"));
        }
        Vocabulary::from_entries(r.tokens.into_iter().zip(r.counts).collect())
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            tokens: v.tokens,
            counts: v.counts,
        }
    }
}

/// Result of [`build_vocabulary`].
#[derive(Debug, Clone)]
pub struct VocabBuild {
    pub vocab: Vocabulary,
    /// Smallest frequency a retained type has (`None` when nothing is kept).
    pub min_count: Option<u64>,
    pub unk_rate: f64,
    pub total_tokens: u64,
}

impl Vocabulary {
    /// Builds from `(token, count)` pairs whose first two entries are the
    /// reserved tokens.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.len() < 2 || entries[UNK_ID].0 != UNK || entries[NUM_ID].0 != NUM {
            return Err(Error::invalid(format!(
                "vocabulary must start with {UNK} and {NUM}"
            )));
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (id, (tok, count)) in entries.into_iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
            tokens.push(tok);
            counts.push(count);
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `token<TAB>count` lines in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            let _ = writeln!(out, "{t}\t{c}");
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected token<TAB>frequency".into()))?;
            let count = count
                .trim()
                .parse::<u64>()
                .map_err(|e| bad(format!("bad frequency: {e}")))?;
            entries.push((tok.to_string(), count));
        }
        Vocabulary::from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_text(&text, path)
    }
}

/// Builds a vocabulary by frequency cutoff. Every cutoff that keeps the
/// types with count ≥ c is considered; the one whose UNK rate is closest to
/// `target_unk_rate` wins, preferring the larger vocabulary on ties.
pub fn build_vocabulary<I, S>(tokens: I, target_unk_rate: f64) -> Result<VocabBuild>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if !(0.0..=1.0).contains(&target_unk_rate) {
        return Err(Error::invalid(format!(
            "target UNK rate must lie in [0, 1], got {target_unk_rate}"
        )));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let (mut total, mut forced_unk, mut num) = (0u64, 0u64, 0u64);
    for tok in tokens {
        let tok = tok.as_ref();
        total += 1;
        match tok {
            UNK => forced_unk += 1,
            NUM => num += 1,
            _ => *counts.entry(tok.to_string()).or_default() += 1,
        }
    }
    if total == 0 {
        return Err(Error::Empty("corpus"));
    }

    let mut types: Vec<(String, u64)> = counts.into_iter().collect();
    types.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    // Walk from "keep nothing" to "keep everything", one distinct count at a time.
    let target = target_unk_rate * total as f64;
    let mut unk: u64 = forced_unk + types.iter().map(|t| t.1).sum::<u64>();
    let mut best = (0usize, unk, (unk as f64 - target).abs());
    let mut kept = 0;
    while kept < types.len() {
        let c = types[kept].1;
        while kept < types.len() && types[kept].1 == c {
            unk -= types[kept].1;
            kept += 1;
        }
        let dist = (unk as f64 - target).abs();
        if dist <= best.2 + 1e-9 {
            best = (kept, unk, dist.min(best.2));
        }
    }
    let (kept, unk, _) = best;

    let mut entries = vec![(UNK.to_string(), unk), (NUM.to_string(), num)];
    entries.extend(types[..kept].iter().cloned());
    let min_count = kept.checked_sub(1).map(|i| types[i].1);
    Ok(VocabBuild {
        vocab: Vocabulary::from_entries(entries)?,
        min_count,
        unk_rate: unk as f64 / total as f64,
        total_tokens: total,
    })
}

/// Maps tokens to ids; unknown tokens become `UNK_ID`.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.id(t.as_ref()).unwrap_or(UNK_ID))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(spec: &[(&str, usize)]) -> Vec<String> {
        spec.iter()
            .flat_map(|(t, n)| std::iter::repeat_n(t.to_string(), *n))
            .collect()
    }

    #[test]
    fn dominant_type_with_singletons() {
        let mut spec = vec![("the".to_string(), 960)];
        spec.extend((0..40).map(|i| (format!("w{i}"), 1)));
        let toks: Vec<String> = spec
            .iter()
            .flat_map(|(t, n)| std::iter::repeat_n(t.clone(), *n))
            .collect();
        let b = build_vocabulary(&toks, 0.05).unwrap();
        assert_eq!(b.unk_rate, 0.04);
        assert_eq!(b.vocab.len(), 3);
        assert_eq!(b.vocab.id("the"), Some(2));
        assert_eq!(b.min_count, Some(960));
    }

    #[test]
    fn zero_target_keeps_everything() {
        let toks = corpus(&[("a", 5), ("b", 2), ("c", 1)]);
        let b = build_vocabulary(&toks, 0.0).unwrap();
        assert_eq!(b.unk_rate, 0.0);
        assert_eq!(b.vocab.len(), 5);
    }

    #[test]
    fn uniform_frequencies_all_or_nothing() {
        // Cutoffs: keep all (rate 0, distance .05) or keep none (rate 1).
        let toks = corpus(&[("a", 3), ("b", 3), ("c", 3)]);
        let b = build_vocabulary(&toks, 0.05).unwrap();
        assert_eq!(b.unk_rate, 0.0);
        assert_eq!(b.vocab.len(), 5);
        // And with a target above one half the empty vocabulary is closer.
        let b = build_vocabulary(&toks, 0.9).unwrap();
        assert_eq!(b.unk_rate, 1.0);
        assert_eq!(b.vocab.len(), 2);
    }

    #[test]
    fn ties_prefer_larger_vocabulary() {
        // keep {a}: rate 0.1; keep {a, b}: rate 0.0; target 0.05 is equidistant.
        let toks = corpus(&[("a", 18), ("b", 2)]);
        let b = build_vocabulary(&toks, 0.05).unwrap();
        assert_eq!(b.unk_rate, 0.0);
        assert_eq!(b.vocab.len(), 4);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_vocabulary(Vec::<String>::new(), 0.05).is_err());
    }

    #[test]
    fn encode_known_and_unknown() {
        let toks = corpus(&[("good", 3), ("bad", 2)]);
        let v = build_vocabulary(&toks, 0.0).unwrap().vocab;
        assert_eq!(encode(&["good", "bad", "good"], &v), vec![2, 3, 2]);
        assert_eq!(encode(&["zzz", "qqq"], &v), vec![UNK_ID, UNK_ID]);
        assert_eq!(encode(&[NUM], &v), vec![NUM_ID]);
        for id in 2..v.len() {
            let tok = v.token(id).unwrap();
            assert_eq!(encode(&[tok], &v), vec![id]);
        }
    }

    #[test]
    fn text_round_trip() {
        let toks = corpus(&[("x", 4), ("y", 1), (NUM, 2)]);
        let v = build_vocabulary(&toks, 0.0).unwrap().vocab;
        let back = Vocabulary::from_text(&v.to_text(), Path::new("v.txt")).unwrap();
        assert_eq!(v, back);
        assert!(v.to_text().starts_with("<unk>\t0\n<num>\t2\n"));
    }

    #[test]
    fn from_text_reports_line() {
        let err = Vocabulary::from_text("<unk>\t0\n<num>\t0\nbad line\n", Path::new("v.txt"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("v.txt:3"), "{err}");
    }
}
