//! Concept-aware biomedical embeddings: PubTator normalization, vocabulary
//! building, four embedding trainers, an embedding store and intrinsic and
//! downstream evaluation.

pub mod corpus;
pub mod downstream;
pub mod embedding;
pub mod intrinsic;
pub mod synth;
pub mod train;
pub mod vocab;

pub use corpus::{
    normalize_document, parse_pubtator, tokenize, ConceptAnnotation, ConceptType, CorpusError, ErrorPolicy,
    NormalizedDocument, ParseReport, RawDocument,
};
pub use embedding::{cosine, nearest_neighbors, CoverageReport, Embedding, EmbeddingError};
pub use intrinsic::{group_similarity_difference, ConceptGroup, GroupDataset, IntrinsicError, IntrinsicResult};
pub use train::{
    export, train, EmbeddingMatrix, FastTextConfig, FullConfig, GloveConfig, ModelKind, TrainError, TrainReport,
    TrainingConfig,
};
pub use vocab::{NegativeTable, Vocabulary, VocabError};
