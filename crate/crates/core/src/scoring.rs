//! Image-level topic scoring.
//!
//! Each image's top-k labels are mapped to topics through the taxonomy and
//! scored two ways: by summing label probabilities per topic (matrix G) and by
//! counting labels per topic over k (matrix G').

use serde::Serialize;
use thiserror::Error;

use crate::ingest::PredictionRecord;
use crate::taxonomy::Taxonomy;
use crate::topics::{Topic, TOPIC_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoringError {
    #[error("records belong to more than one user ('{first}' and '{other}')")]
    MixedUsers { first: String, other: String },
    #[error("image '{image_id}' has {len} predictions but top-k is {k}")]
    RecordExceedsTopK { image_id: String, len: usize, k: usize },
    #[error("top-k must be at least 1")]
    ZeroTopK,
}

/// Scores over the 24 topics plus the mass that no topic claimed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TopicDistribution {
    pub scores: [f64; TOPIC_COUNT],
    pub unmapped: f64,
}

impl Default for TopicDistribution {
    fn default() -> Self {
        TopicDistribution {
            scores: [0.0; TOPIC_COUNT],
            unmapped: 0.0,
        }
    }
}

impl TopicDistribution {
    pub fn score(&self, topic: Topic) -> f64 {
        self.scores[topic.index()]
    }

    /// Sum of topic scores and unmapped mass.
    pub fn total(&self) -> f64 {
        self.scores.iter().sum::<f64>() + self.unmapped
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    /// Topics with a nonzero score, in canonical order.
    pub fn nonzero(&self) -> impl Iterator<Item = (Topic, f64)> + '_ {
        Topic::all()
            .map(|t| (t, self.score(t)))
            .filter(|(_, s)| *s != 0.0)
    }
}

/// Probability-based score: each topic receives the summed probability of the
/// labels that roll up to it.
pub fn score_image_prob(record: &PredictionRecord, taxonomy: &Taxonomy) -> TopicDistribution {
    let mut dist = TopicDistribution::default();
    for p in &record.predictions {
        match taxonomy.topic_of_instance(&p.label) {
            Some(topic) => dist.scores[topic.index()] += p.prob,
            None => dist.unmapped += p.prob,
        }
    }
    dist
}

/// Occurrence-based score: each topic receives the number of labels rolling
/// up to it, divided by `k`. Slots missing from a short record count as
/// unmapped. Requires `k >= record.predictions.len()`.
pub fn score_image_occ(record: &PredictionRecord, taxonomy: &Taxonomy, k: usize) -> TopicDistribution {
    debug_assert!(k >= record.predictions.len() && k > 0);
    let mut counts = [0usize; TOPIC_COUNT];
    let mut unmapped = k.saturating_sub(record.predictions.len());
    for p in &record.predictions {
        match taxonomy.topic_of_instance(&p.label) {
            Some(topic) => counts[topic.index()] += 1,
            None => unmapped += 1,
        }
    }
    let k = k as f64;
    TopicDistribution {
        scores: counts.map(|c| c as f64 / k),
        unmapped: unmapped as f64 / k,
    }
}

/// G and G' for one user's images, rows aligned with `image_ids`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageLevelMatrices {
    pub user_id: String,
    pub image_ids: Vec<String>,
    pub g: Vec<TopicDistribution>,
    pub g_occ: Vec<TopicDistribution>,
}

impl ImageLevelMatrices {
    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }
}

pub fn build_matrices(
    records: &[PredictionRecord],
    taxonomy: &Taxonomy,
    k: usize,
) -> Result<ImageLevelMatrices, ScoringError> {
    if k == 0 {
        return Err(ScoringError::ZeroTopK);
    }
    let mut m = ImageLevelMatrices {
        user_id: records.first().map(|r| r.user_id.clone()).unwrap_or_default(),
        ..Default::default()
    };
    for record in records {
        if record.user_id != m.user_id {
            return Err(ScoringError::MixedUsers {
                first: m.user_id,
                other: record.user_id.clone(),
            });
        }
        if record.predictions.len() > k {
            return Err(ScoringError::RecordExceedsTopK {
                image_id: record.image_id.clone(),
                len: record.predictions.len(),
                k,
            });
        }
        m.image_ids.push(record.image_id.clone());
        m.g.push(score_image_prob(record, taxonomy));
        m.g_occ.push(score_image_occ(record, taxonomy, k));
    }
    Ok(m)
}
