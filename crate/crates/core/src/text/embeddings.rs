use std::path::Path;

use rand::Rng;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::numeric::{SeededRng, Tensor};

/// Range of the uniform initializer for rows not found in a pretrained file.
pub const INIT_RANGE: f64 = 0.1;

/// `V × d` word vectors aligned with a [`Vocabulary`].
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub table: Tensor,
    pub frozen: bool,
    /// Rows copied from a pretrained file.
    pub pretrained_rows: usize,
}

impl EmbeddingTable {
    pub fn random(vocab_size: usize, dim: usize, rng: &mut SeededRng) -> Self {
        let data = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        EmbeddingTable {
            table: Tensor::matrix(vocab_size, dim, data).expect("consistent shape"),
            frozen: false,
            pretrained_rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }
}

/// Reads `word v1 … vd` lines; words in `vocab` get their vectors copied and
/// every other row is drawn uniformly from `[-0.1, 0.1]`.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, path, vocab, dim, rng)
}

pub fn parse_embeddings(
    text: &str,
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable> {
    let mut emb = EmbeddingTable::random(vocab.len(), dim, rng);
    let mut seen = vec![false; vocab.len()];
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if values.len() != dim {
            return Err(bad(format!(
                "expected {dim} values for {word:?}, found {}",
                values.len()
            )));
        }
        let Some(id) = vocab.id(word) else { continue };
        let mut row = Vec::with_capacity(dim);
        for v in values {
            let x: f64 = v.parse().map_err(|e| bad(format!("bad value {v:?}: {e}")))?;
            if !x.is_finite() {
                return Err(bad(format!("non-finite value {v:?}")));
            }
            row.push(x);
        }
        emb.table.row_mut(id).copy_from_slice(&row);
        if !seen[id] {
            seen[id] = true;
            emb.pretrained_rows += 1;
        }
    }
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::vocab::build_vocabulary;

    fn vocab() -> Vocabulary {
        build_vocabulary(["good", "good", "bad"], 0.0).unwrap().vocab
    }

    #[test]
    fn full_coverage() {
        let v = vocab();
        let text = "<unk> 0 0\n<num> 1 1\ngood 0.5 -0.5\nbad 2 3\nextra 9 9\n";
        let e = parse_embeddings(text, Path::new("e.txt"), &v, 2, &mut SeededRng::new(0)).unwrap();
        assert_eq!(e.pretrained_rows, v.len());
        assert_eq!(e.table.row(v.id("good").unwrap()), &[0.5, -0.5]);
        assert_eq!(e.table.row(v.id("bad").unwrap()), &[2.0, 3.0]);
    }

    #[test]
    fn empty_file_is_all_random() {
        let v = vocab();
        let e = parse_embeddings("", Path::new("e.txt"), &v, 50, &mut SeededRng::new(1)).unwrap();
        assert_eq!(e.pretrained_rows, 0);
        assert_eq!(e.table.shape(), &[v.len(), 50]);
        assert!(e.table.data().iter().all(|x| (-0.1..=0.1).contains(x)));
    }

    #[test]
    fn wrong_arity_names_line() {
        let v = vocab();
        let text = format!("good {}\nbad 1 2 3\n", vec!["0.1"; 50].join(" "));
        let err = parse_embeddings(&text, Path::new("e.txt"), &v, 50, &mut SeededRng::new(1))
            .unwrap_err()
            .to_string();
        assert!(err.contains("e.txt:2"), "{err}");
    }

    #[test]
    fn missing_file_is_an_error() {
        let v = vocab();
        assert!(load_embeddings(Path::new("/nonexistent/x.txt"), &v, 3, &mut SeededRng::new(0)).is_err());
    }
}
