//! Correlation analysis, evaluation harness and synthetic fixtures.

pub mod correlation;
pub mod evaluation;
pub mod fixture;

pub use correlation::{co_interest_matrix, pearson_matrix, Band, CorrelationError, CorrelationMatrix, TopicMatrix};
pub use evaluation::{evaluate, label_rank, EvalError, EvalReport};
pub use fixture::{generate_fixture, labels_csv, FixtureError, FixtureSpec};
