//! Token normalization, vocabulary construction and word vectors.

pub mod embeddings;
pub mod normalize;
pub mod vocab;

pub use embeddings::{load_embeddings, EmbeddingTable};
pub use normalize::{normalize_token, normalize_tokens};
pub use vocab::{build_vocabulary, encode, VocabBuild, Vocabulary, NUM, NUM_ID, UNK, UNK_ID};
