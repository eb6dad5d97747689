//! Seeded synthetic datasets with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{Prediction, PredictionRecord, ProfileDataset, DEFAULT_TOP_K};
use crate::report::csv_text;
use crate::taxonomy::Taxonomy;
use crate::topics::{Topic, TOPIC_COUNT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("topic {0} has no instances in the taxonomy")]
    TopicWithoutInstances(Topic),
    #[error("purity must lie in [0, 1], got {0}")]
    InvalidPurity(f64),
    #[error("top-k must be at least 1")]
    ZeroTopK,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub users_per_topic: [usize; TOPIC_COUNT],
    pub images_per_user: usize,
    /// Probability that a label is drawn from the user's own topic.
    pub purity: f64,
    pub seed: u64,
    pub k: usize,
}

impl FixtureSpec {
    pub fn uniform(users_per_topic: usize, images_per_user: usize, purity: f64, seed: u64) -> Self {
        FixtureSpec {
            users_per_topic: [users_per_topic; TOPIC_COUNT],
            images_per_user,
            purity,
            seed,
            k: DEFAULT_TOP_K,
        }
    }
}

/// Builds a labeled dataset: each user belongs to one topic, and every label
/// slot of every image comes from that topic's instances with probability
/// `purity`, otherwise from a uniformly chosen other topic. Probabilities are
/// uniform draws in (0, 1) sorted descending. Output depends only on the spec.
pub fn generate_fixture(taxonomy: &Taxonomy, spec: &FixtureSpec) -> Result<ProfileDataset, FixtureError> {
    if !(0.0..=1.0).contains(&spec.purity) {
        return Err(FixtureError::InvalidPurity(spec.purity));
    }
    if spec.k == 0 {
        return Err(FixtureError::ZeroTopK);
    }
    let pools: Vec<Vec<&str>> = Topic::all().map(|t| taxonomy.instances_of_topic(t)).collect();
    if let Some(empty) = Topic::all().find(|t| pools[t.index()].is_empty()) {
        return Err(FixtureError::TopicWithoutInstances(empty));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dataset = ProfileDataset::new();
    let mut labels = std::collections::BTreeMap::new();
    for topic in Topic::all() {
        for u in 0..spec.users_per_topic[topic.index()] {
            let user_id = format!("{}-{u:03}", topic.name());
            for i in 0..spec.images_per_user {
                let mut probs: Vec<f64> = (0..spec.k).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
                probs.sort_by(|a, b| b.total_cmp(a));
                let predictions = probs
                    .into_iter()
                    .map(|prob| {
                        let source = if rng.gen_bool(spec.purity) {
                            topic.index()
                        } else {
                            // uniform over the other 23 topics
                            let other = rng.gen_range(0..TOPIC_COUNT - 1);
                            if other >= topic.index() {
                                other + 1
                            } else {
                                other
                            }
                        };
                        let pool = &pools[source];
                        Prediction::new(pool[rng.gen_range(0..pool.len())], prob)
                    })
                    .collect();
                dataset
                    .push(PredictionRecord {
                        user_id: user_id.clone(),
                        image_id: format!("img{i:04}"),
                        predictions,
                    })
                    .expect("generated ids are unique");
            }
            labels.insert(user_id, topic);
        }
    }
    dataset.set_labels(labels);
    Ok(dataset)
}

/// `user_id,topic` CSV for the dataset's labels.
pub fn labels_csv(dataset: &ProfileDataset) -> String {
    csv_text(
        &["user_id", "topic"],
        dataset
            .labels()
            .iter()
            .map(|(u, t)| vec![u.clone(), t.name().to_string()]),
    )
}
