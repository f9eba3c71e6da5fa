//! Synthetic corpora whose label is carried by a cue word in the root EDU.
//! Useful for smoke tests and for checking that a trained model actually
//! uses discourse structure.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::numeric::SeededRng;
use crate::trees::DependencyTree;

pub const RELATIONS: [&str; 4] = ["Elaboration", "Justify", "Contrast", "Concession"];

/// What non-root EDUs contain besides filler words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonRootCues {
    /// Filler words only.
    None,
    /// Each non-root EDU holds a uniformly random class cue.
    Random,
    /// Each non-root EDU holds a cue of a class other than the gold one.
    Contradict,
}

#[derive(Debug, Clone)]
pub struct CueCorpus {
    pub docs: usize,
    pub min_edus: usize,
    pub max_edus: usize,
    pub min_edu_len: usize,
    pub max_edu_len: usize,
    /// `(label, cue word)` per class.
    pub classes: Vec<(String, String)>,
    pub fillers: Vec<String>,
    pub non_root: NonRootCues,
}

impl Default for CueCorpus {
    fn default() -> Self {
        CueCorpus {
            docs: 40,
            min_edus: 3,
            max_edus: 6,
            min_edu_len: 2,
            max_edu_len: 5,
            classes: vec![
                ("neg".into(), "awful".into()),
                ("pos".into(), "wonderful".into()),
            ],
            fillers: ["the", "movie", "plot", "was", "and", "actors", "it", "scenes", "a", "story", "this", "really"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            non_root: NonRootCues::None,
        }
    }
}

impl CueCorpus {
    /// Documents `0..docs`, labels cycling through the classes.
    pub fn generate(&self, seed: u64, id_prefix: &str) -> Vec<DocumentRecord> {
        let mut rng = SeededRng::new(seed);
        (0..self.docs)
            .map(|i| {
                let class = i % self.classes.len();
                self.document(&mut rng, format!("{id_prefix}{i}"), class)
            })
            .collect()
    }

    fn document(&self, rng: &mut SeededRng, id: String, class: usize) -> DocumentRecord {
        let n = rng.gen_range(self.min_edus..=self.max_edus);
        let tree = random_tree(rng, n, &RELATIONS);
        let root = tree.root().expect("random trees have a root");
        let edus = (0..n)
            .map(|i| {
                let len = rng.gen_range(self.min_edu_len..=self.max_edu_len);
                let mut words: Vec<String> =
                    (0..len).map(|_| self.fillers.choose(rng).unwrap().clone()).collect();
                let cue = if i == root {
                    Some(class)
                } else {
                    match self.non_root {
                        NonRootCues::None => None,
                        NonRootCues::Random => Some(rng.gen_range(0..self.classes.len())),
                        NonRootCues::Contradict => {
                            let others: Vec<usize> =
                                (0..self.classes.len()).filter(|&c| c != class).collect();
                            others.choose(rng).copied()
                        }
                    }
                };
                if let Some(c) = cue {
                    let at = rng.gen_range(0..=words.len());
                    words.insert(at, self.classes[c].1.clone());
                }
                words
            })
            .collect();
        let mut doc = DocumentRecord {
            id,
            label: Some(self.classes[class].0.clone()),
            edus,
            heads: Vec::new(),
            relations: Vec::new(),
            rst: None,
        };
        doc.set_tree(&tree);
        doc
    }
}

/// Uniform random recursive tree over `n` nodes in shuffled order, with arc
/// labels drawn from `relations`.
pub fn random_tree(rng: &mut SeededRng, n: usize, relations: &[&str]) -> DependencyTree {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![None; n];
    let mut labels = vec![None; n];
    for k in 1..n {
        let head = order[rng.gen_range(0..k)];
        heads[order[k]] = Some(head);
        labels[order[k]] = Some(relations.choose(rng).unwrap().to_string());
    }
    DependencyTree::new(heads, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::validate_dependency;

    #[test]
    fn trees_are_valid() {
        let mut rng = SeededRng::new(5);
        for n in 1..12 {
            let t = random_tree(&mut rng, n, &RELATIONS);
            assert!(validate_dependency(&t).is_empty());
        }
    }

    #[test]
    fn root_carries_the_cue() {
        let spec = CueCorpus {
            non_root: NonRootCues::Contradict,
            ..CueCorpus::default()
        };
        let docs = spec.generate(1, "d");
        assert_eq!(docs.len(), 40);
        for d in &docs {
            let tree = d.dependency_tree().unwrap();
            let root = tree.root().unwrap();
            let label = d.label.as_deref().unwrap();
            let (cue, other) = if label == "pos" { ("wonderful", "awful") } else { ("awful", "wonderful") };
            assert!(d.edus[root].iter().any(|w| w == cue));
            for (i, e) in d.edus.iter().enumerate().filter(|(i, _)| *i != root) {
                assert!(e.iter().any(|w| w == other), "edu {i} of {}", d.id);
                assert!(!e.iter().any(|w| w == cue));
            }
            assert!((3..=6).contains(&d.edus.len()));
        }
        assert_eq!(spec.generate(1, "d"), docs);
    }
}
