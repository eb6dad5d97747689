//! Taxonomy-driven user-interest profiling.
//!
//! Per-image top-k classifier labels are mapped through a concept taxonomy
//! onto 24 interest topics, scored per image, aggregated per user, and
//! evaluated against self-assessed topics.

pub mod analytics;
pub mod ingest;
pub mod metrics;
pub mod profiling;
pub mod report;
pub mod scoring;
pub mod taxonomy;
pub mod topics;

pub use ingest::{LoadOptions, Prediction, PredictionRecord, ProfileDataset};
pub use profiling::{Mechanism, UserProfile};
pub use scoring::TopicDistribution;
pub use taxonomy::{Taxonomy, TaxonomyError};
pub use topics::{Topic, TOPIC_COUNT};
