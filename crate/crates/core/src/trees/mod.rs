//! RST constituency trees, their dependency form and relation labels.

pub mod dependency;
pub mod relations;
pub mod rst;

pub use dependency::{rst_to_dependency, validate_dependency, DependencyTree, Violation};
pub use relations::{
    relation_index, RelationNormalizer, RelationVocabulary, UNK_RELATION, UNK_RELATION_ID,
};
pub use rst::{parse_rst, Nuclearity, RstTree, TreeError};
