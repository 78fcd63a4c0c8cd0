//! Crosswalk from grade-4 mathematics standards to assessment item specifications.
//!
//! The pipeline embeds both corpora, treats embedding dimensions as cases,
//! ranks specifications for each standard by random-forest permutation
//! importance, fits the top candidates in a hierarchical zero-intercept
//! regression, and aggregates the unique variance explained by domain.

pub mod corpus;
pub mod embed;
pub mod forest;
pub mod regress;
pub mod report;
pub mod similarity;

pub use corpus::{load_corpus, Corpus, Domain, DomainScheme, Side, Statement};
pub use embed::{
    fetch_embeddings, fetch_embeddings_with, load_matrix, load_matrix_for, save_matrix,
    EmbedError, EmbeddingConfig, EmbeddingMatrix, EmbeddingProvider, HttpProvider,
};
pub use forest::{select_top_k, ForestConfig, ForestError, ImportanceRanking, ImportanceScore};
pub use regress::{hierarchical_fit, ols_no_intercept, RegressError, StepwiseResult};
pub use report::{
    aggregate_spec_side, aggregate_standard_side, count_occurrences, emit_report,
    CrosswalkReport, CrosswalkTable, DomainAggregate, OccurrenceCount, ReportFormat,
};
pub use similarity::{
    cosine, make_dataset, pearson, similarity_matrix, RegressionDataset, SimilarityKind,
    SimilarityMatrix,
};
