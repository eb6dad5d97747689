//! User-level interest distributions aggregated from image-level matrices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::{PredictionRecord, ProfileDataset};
use crate::scoring::{build_matrices, ImageLevelMatrices, ScoringError, TopicDistribution};
use crate::taxonomy::Taxonomy;
use crate::topics::{Topic, TOPIC_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfilingError {
    #[error("cannot aggregate an empty image set")]
    EmptyMatrices,
    #[error("no topic has a positive score")]
    NoPrediction,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Which image-level matrix drives the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// Summed label probabilities (G, V).
    Prob,
    /// Label occurrence counts (G', V').
    Occ,
}

impl Mechanism {
    pub const ALL: [Mechanism; 2] = [Mechanism::Prob, Mechanism::Occ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Prob => "prob",
            Mechanism::Occ => "occ",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "prob" => Ok(Mechanism::Prob),
            "occ" => Ok(Mechanism::Occ),
            other => Err(format!("unknown mechanism '{other}' (expected prob or occ)")),
        }
    }
}

/// Column sums of G, normalized by the grand total so the result sums to 1.
/// A user whose images carry no probability mass at all gets everything in
/// `unmapped`.
pub fn aggregate_prob(m: &ImageLevelMatrices) -> Result<TopicDistribution, ProfilingError> {
    if m.g.is_empty() {
        return Err(ProfilingError::EmptyMatrices);
    }
    let mut sum = TopicDistribution::default();
    for row in &m.g {
        for (acc, s) in sum.scores.iter_mut().zip(&row.scores) {
            *acc += s;
        }
        sum.unmapped += row.unmapped;
    }
    let total = sum.total();
    if total <= 0.0 {
        return Ok(TopicDistribution {
            scores: [0.0; TOPIC_COUNT],
            unmapped: 1.0,
        });
    }
    sum.scores.iter_mut().for_each(|s| *s /= total);
    sum.unmapped /= total;
    Ok(sum)
}

/// Fraction of images whose G' row peaks at each topic. A row tied across
/// several topics splits its credit evenly; an all-zero row counts as
/// unmapped.
pub fn aggregate_occ(m: &ImageLevelMatrices) -> Result<TopicDistribution, ProfilingError> {
    if m.g_occ.is_empty() {
        return Err(ProfilingError::EmptyMatrices);
    }
    let mut credit = [0.0f64; TOPIC_COUNT];
    let mut unmapped = 0.0;
    for row in &m.g_occ {
        let max = row.max_score();
        if max <= 0.0 {
            unmapped += 1.0;
            continue;
        }
        let ties = row.scores.iter().filter(|&&s| s == max).count();
        let share = 1.0 / ties as f64;
        for (c, &s) in credit.iter_mut().zip(&row.scores) {
            if s == max {
                *c += share;
            }
        }
    }
    let n = m.g_occ.len() as f64;
    Ok(TopicDistribution {
        scores: credit.map(|c| c / n),
        unmapped: unmapped / n,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPrediction {
    pub topic: Topic,
    /// Every topic sharing the maximum score when there is more than one.
    pub ties: Vec<Topic>,
}

/// Argmax over topic scores; ties go to the lowest canonical index.
pub fn predict_topic(v: &TopicDistribution) -> Result<TopicPrediction, ProfilingError> {
    let max = v.max_score();
    if max <= 0.0 {
        return Err(ProfilingError::NoPrediction);
    }
    let tied: Vec<Topic> = Topic::all().filter(|&t| v.score(t) == max).collect();
    Ok(TopicPrediction {
        topic: tied[0],
        ties: if tied.len() > 1 { tied } else { Vec::new() },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    pub n_images: usize,
    pub v_prob: TopicDistribution,
    pub v_occ: TopicDistribution,
    pub mechanism: Mechanism,
    /// `None` when the selected vector has no positive topic score.
    pub predicted_topic: Option<Topic>,
    pub ties: Vec<Topic>,
}

impl UserProfile {
    pub fn vector(&self, mechanism: Mechanism) -> &TopicDistribution {
        match mechanism {
            Mechanism::Prob => &self.v_prob,
            Mechanism::Occ => &self.v_occ,
        }
    }

    pub fn selected(&self) -> &TopicDistribution {
        self.vector(self.mechanism)
    }

    /// Same vectors, prediction recomputed under another mechanism.
    pub fn with_mechanism(&self, mechanism: Mechanism) -> UserProfile {
        let prediction = predict_topic(self.vector(mechanism)).ok();
        UserProfile {
            mechanism,
            predicted_topic: prediction.as_ref().map(|p| p.topic),
            ties: prediction.map(|p| p.ties).unwrap_or_default(),
            ..self.clone()
        }
    }
}

struct NonzeroScores<'a>(&'a TopicDistribution);

impl Serialize for NonzeroScores<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.nonzero().map(|(t, s)| (t.name(), s)))
    }
}

impl Serialize for UserProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("UserProfile", 9)?;
        s.serialize_field("user_id", &self.user_id)?;
        s.serialize_field("n_images", &self.n_images)?;
        s.serialize_field("mechanism", &self.mechanism)?;
        s.serialize_field("v_prob", &NonzeroScores(&self.v_prob))?;
        s.serialize_field("unmapped_prob", &self.v_prob.unmapped)?;
        s.serialize_field("v_occ", &NonzeroScores(&self.v_occ))?;
        s.serialize_field("unmapped_occ", &self.v_occ.unmapped)?;
        s.serialize_field("predicted_topic", &self.predicted_topic)?;
        s.serialize_field("ties", &self.ties)?;
        s.end()
    }
}

pub fn profile_matrices(m: &ImageLevelMatrices, mechanism: Mechanism) -> Result<UserProfile, ProfilingError> {
    let v_prob = aggregate_prob(m)?;
    let v_occ = aggregate_occ(m)?;
    let selected = match mechanism {
        Mechanism::Prob => &v_prob,
        Mechanism::Occ => &v_occ,
    };
    let prediction = predict_topic(selected).ok();
    Ok(UserProfile {
        user_id: m.user_id.clone(),
        n_images: m.len(),
        predicted_topic: prediction.as_ref().map(|p| p.topic),
        ties: prediction.map(|p| p.ties).unwrap_or_default(),
        v_prob,
        v_occ,
        mechanism,
    })
}

/// Scores and aggregates one user's images.
pub fn profile_user(
    records: &[PredictionRecord],
    taxonomy: &Taxonomy,
    k: usize,
    mechanism: Mechanism,
) -> Result<UserProfile, ProfilingError> {
    if records.is_empty() {
        return Err(ProfilingError::EmptyMatrices);
    }
    profile_matrices(&build_matrices(records, taxonomy, k)?, mechanism)
}

/// One profile per sweep size, each built from the first `n` images in file
/// order (all images when the user has fewer than `n`).
pub fn profile_user_sweep(
    records: &[PredictionRecord],
    taxonomy: &Taxonomy,
    k: usize,
    mechanism: Mechanism,
    sweep: &[usize],
) -> Result<Vec<(usize, UserProfile)>, ProfilingError> {
    sweep
        .iter()
        .map(|&n| {
            let prefix = &records[..n.min(records.len())];
            profile_user(prefix, taxonomy, k, mechanism).map(|p| (n, p))
        })
        .collect()
}

/// Profiles for every user of a sweep point, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepProfiles {
    pub images: usize,
    pub profiles: Vec<UserProfile>,
}

/// Profiles every user on all of their images. Users are processed in
/// parallel on the current rayon pool; output order follows the dataset.
pub fn profile_dataset(
    dataset: &ProfileDataset,
    taxonomy: &Taxonomy,
    k: usize,
    mechanism: Mechanism,
) -> Result<Vec<UserProfile>, ProfilingError> {
    let users: Vec<(&str, &[PredictionRecord])> = dataset.users().collect();
    users
        .par_iter()
        .map(|(_, records)| profile_user(records, taxonomy, k, mechanism))
        .collect()
}

/// [`profile_user_sweep`] over every user, regrouped by sweep size.
pub fn profile_dataset_sweep(
    dataset: &ProfileDataset,
    taxonomy: &Taxonomy,
    k: usize,
    mechanism: Mechanism,
    sweep: &[usize],
) -> Result<Vec<SweepProfiles>, ProfilingError> {
    let users: Vec<(&str, &[PredictionRecord])> = dataset.users().collect();
    let per_user: Vec<Vec<(usize, UserProfile)>> = users
        .par_iter()
        .map(|(_, records)| profile_user_sweep(records, taxonomy, k, mechanism, sweep))
        .collect::<Result<_, _>>()?;
    let mut points: Vec<SweepProfiles> = sweep
        .iter()
        .map(|&images| SweepProfiles {
            images,
            profiles: Vec::with_capacity(users.len()),
        })
        .collect();
    for user in per_user {
        for (point, (_, profile)) in points.iter_mut().zip(user) {
            point.profiles.push(profile);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Prediction;
    use proptest::prelude::*;

    fn topic(name: &str) -> Topic {
        Topic::from_name(name).unwrap()
    }

    fn starter() -> Taxonomy {
        Taxonomy::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/uio-starter.taxonomy")).unwrap()
    }

    fn dist(entries: &[(&str, f64)], unmapped: f64) -> TopicDistribution {
        let mut d = TopicDistribution { unmapped, ..Default::default() };
        for &(name, s) in entries {
            d.scores[topic(name).index()] = s;
        }
        d
    }

    fn matrices(g: Vec<TopicDistribution>, g_occ: Vec<TopicDistribution>) -> ImageLevelMatrices {
        ImageLevelMatrices {
            user_id: "u".into(),
            image_ids: (0..g.len().max(g_occ.len())).map(|i| format!("i{i}")).collect(),
            g,
            g_occ,
        }
    }

    /// Independent reading of the occurrence aggregation: for each topic,
    /// walk every image and ask whether that topic is in the row's argmax set.
    fn occ_oracle(rows: &[TopicDistribution]) -> TopicDistribution {
        let n = rows.len() as f64;
        let mut out = TopicDistribution::default();
        for row in rows {
            let argmax: Vec<usize> = (0..TOPIC_COUNT)
                .filter(|&i| row.scores[i] > 0.0 && (0..TOPIC_COUNT).all(|j| row.scores[j] <= row.scores[i]))
                .collect();
            if argmax.is_empty() {
                out.unmapped += 1.0 / n;
            }
            for &i in &argmax {
                out.scores[i] += 1.0 / (argmax.len() as f64 * n);
            }
        }
        out
    }

    fn image(user: &str, id: usize, term: &str) -> PredictionRecord {
        PredictionRecord {
            user_id: user.into(),
            image_id: format!("img{id}"),
            predictions: (0..5).map(|_| Prediction::new(term, 0.1)).collect(),
        }
    }

    #[test]
    fn single_topic_mass_normalizes_to_one() {
        let m = matrices(vec![dist(&[("Drink", 0.3)], 0.0), dist(&[("Drink", 0.1)], 0.0)], vec![]);
        let v = aggregate_prob(&m).unwrap();
        assert_eq!(v.score(topic("Drink")), 1.0);
    }

    #[test]
    fn uniform_rows_stay_uniform() {
        let row = TopicDistribution { scores: [0.25; TOPIC_COUNT], unmapped: 0.0 };
        let v = aggregate_prob(&matrices(vec![row; 3], vec![])).unwrap();
        for s in v.scores {
            assert!((s - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mass_user_is_all_unmapped() {
        let v = aggregate_prob(&matrices(vec![TopicDistribution::default()], vec![])).unwrap();
        assert_eq!(v.unmapped, 1.0);
        assert!(predict_topic(&v).is_err());
    }

    #[test]
    fn four_outdoors_one_places() {
        let t = starter();
        let mut records: Vec<PredictionRecord> = (0..4).map(|i| image("U1", i, "alp")).collect();
        records.push(image("U1", 4, "palace"));
        let m = build_matrices(&records, &t, 5).unwrap();
        let occ = aggregate_occ(&m).unwrap();
        assert!((occ.score(topic("Outdoors")) - 0.8).abs() < 1e-12);
        assert!((occ.score(topic("Places")) - 0.2).abs() < 1e-12);
        let prob = aggregate_prob(&m).unwrap();
        assert!((prob.score(topic("Outdoors")) - 0.8).abs() < 1e-12);
        assert!((prob.score(topic("Places")) - 0.2).abs() < 1e-12);
        let profile = profile_user(&records, &t, 5, Mechanism::Occ).unwrap();
        assert_eq!(profile.predicted_topic, Some(topic("Outdoors")));
        assert!(profile.ties.is_empty());
    }

    #[test]
    fn tied_row_splits_credit() {
        let rows = vec![dist(&[("Drink", 0.4), ("Food", 0.4)], 0.2), dist(&[("Drink", 1.0)], 0.0)];
        let expected = occ_oracle(&rows);
        assert!((expected.score(topic("Drink")) - 0.75).abs() < 1e-15);
        assert!((expected.score(topic("Food")) - 0.25).abs() < 1e-15);
        let v = aggregate_occ(&matrices(vec![], rows)).unwrap();
        assert!((v.score(topic("Drink")) - 0.75).abs() < 1e-12);
        assert!((v.score(topic("Food")) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn all_food_argmax() {
        let rows = vec![dist(&[("Food", 0.6), ("Drink", 0.2)], 0.2); 7];
        let v = aggregate_occ(&matrices(vec![], rows)).unwrap();
        assert_eq!(v.score(topic("Food")), 1.0);
    }

    #[test]
    fn empty_matrices_error() {
        assert_eq!(aggregate_prob(&matrices(vec![], vec![])), Err(ProfilingError::EmptyMatrices));
        assert_eq!(aggregate_occ(&matrices(vec![], vec![])), Err(ProfilingError::EmptyMatrices));
        assert_eq!(profile_user(&[], &starter(), 5, Mechanism::Occ), Err(ProfilingError::EmptyMatrices));
    }

    #[test]
    fn predictions_and_ties() {
        let p = predict_topic(&dist(&[("Outdoors", 0.8), ("Places", 0.2)], 0.0)).unwrap();
        assert_eq!((p.topic, p.ties.len()), (topic("Outdoors"), 0));
        let p = predict_topic(&dist(&[("Food", 0.5), ("Drink", 0.5)], 0.0)).unwrap();
        assert_eq!(p.topic, topic("Drink"));
        assert_eq!(p.ties, vec![topic("Drink"), topic("Food")]);
        assert_eq!(predict_topic(&TopicDistribution::default()), Err(ProfilingError::NoPrediction));
    }

    #[test]
    fn worked_example_user() {
        let t = starter();
        let r = PredictionRecord {
            user_id: "u1".into(),
            image_id: "img1".into(),
            predictions: [("espresso", 0.08), ("cup", 0.07), ("dough", 0.06), ("ladle", 0.05), ("sandal", 0.04)]
                .iter()
                .map(|&(l, p)| Prediction::new(l, p))
                .collect(),
        };
        let p = profile_user(&[r], &t, 5, Mechanism::Occ).unwrap();
        // V' counts argmax images, so the single image goes entirely to Drink.
        assert_eq!(p.predicted_topic, Some(topic("Drink")));
        assert_eq!(p.n_images, 1);
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["predicted_topic"], "Drink");
        assert_eq!(json["v_occ"]["Drink"], 1.0);
    }

    #[test]
    fn sweep_uses_prefixes() {
        let t = starter();
        let records: Vec<PredictionRecord> = (0..120)
            .map(|i| image("u", i, if i < 5 { "pizza" } else { "alp" }))
            .collect();
        let sweep = profile_user_sweep(&records, &t, 5, Mechanism::Occ, &[5, 10, 50, 75, 100]).unwrap();
        assert_eq!(sweep.iter().map(|(k, p)| (*k, p.n_images)).collect::<Vec<_>>(), vec![(5, 5), (10, 10), (50, 50), (75, 75), (100, 100)]);
        assert_eq!(sweep[0].1.predicted_topic, Some(topic("Food")));
        assert!((sweep[1].1.v_occ.score(topic("Food")) - 0.5).abs() < 1e-12);
        assert_eq!(sweep[4].1.predicted_topic, Some(topic("Outdoors")));

        let short = profile_user_sweep(&records[..3], &t, 5, Mechanism::Occ, &[5, 10]).unwrap();
        assert!(short.iter().all(|(_, p)| p.n_images == 3));
    }

    #[test]
    fn dataset_sweep_regroups_by_size() {
        let t = starter();
        let mut dataset = ProfileDataset::new();
        for i in 0..6 {
            dataset.push(image("a", i, "pizza")).unwrap();
            dataset.push(image("b", i, "alp")).unwrap();
        }
        let points = profile_dataset_sweep(&dataset, &t, 5, Mechanism::Prob, &[2, 4]).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].images, 4);
        assert_eq!(points[1].profiles.iter().map(|p| p.user_id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(profile_dataset(&dataset, &t, 5, Mechanism::Prob).unwrap().len(), 2);
    }

    fn row_strategy() -> impl Strategy<Value = TopicDistribution> {
        // Counts over k=5 so ties occur often.
        proptest::collection::vec(0usize..=2, TOPIC_COUNT).prop_map(|counts| {
            let mut d = TopicDistribution::default();
            let mut used = 0;
            for (i, c) in counts.into_iter().enumerate() {
                let c = c.min(5 - used);
                used += c;
                d.scores[i] = c as f64 / 5.0;
            }
            d.unmapped = (5 - used) as f64 / 5.0;
            d
        })
    }

    proptest! {
        #[test]
        fn occ_matches_oracle(rows in proptest::collection::vec(row_strategy(), 1..=10)) {
            let v = aggregate_occ(&matrices(vec![], rows.clone())).unwrap();
            let o = occ_oracle(&rows);
            for i in 0..TOPIC_COUNT {
                prop_assert!((v.scores[i] - o.scores[i]).abs() <= 1e-12);
            }
            prop_assert!((v.unmapped - o.unmapped).abs() <= 1e-12);
            prop_assert!((v.total() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn user_vectors_ignore_image_order(rows in proptest::collection::vec(row_strategy(), 1..=10), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate_prob(&matrices(rows.clone(), rows.clone())).unwrap();
            let b = aggregate_prob(&matrices(shuffled.clone(), shuffled.clone())).unwrap();
            for i in 0..TOPIC_COUNT {
                prop_assert!((a.scores[i] - b.scores[i]).abs() <= 1e-12);
            }
            prop_assert!((a.total() - 1.0).abs() <= 1e-9);
            let a = aggregate_occ(&matrices(vec![], rows)).unwrap();
            let b = aggregate_occ(&matrices(vec![], shuffled)).unwrap();
            for i in 0..TOPIC_COUNT {
                prop_assert!((a.scores[i] - b.scores[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn adding_a_pure_image_raises_its_topic(rows in proptest::collection::vec(row_strategy(), 1..=10), t in 0usize..TOPIC_COUNT) {
            let before = aggregate_occ(&matrices(vec![], rows.clone())).unwrap().scores[t];
            let mut pure = TopicDistribution::default();
            pure.scores[t] = 1.0;
            let mut more = rows;
            more.push(pure);
            let after = aggregate_occ(&matrices(vec![], more)).unwrap().scores[t];
            if before < 1.0 {
                prop_assert!(after > before);
            } else {
                prop_assert!((after - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn argmax_is_scale_invariant(row in row_strategy(), c in 1e-3f64..1e3) {
            prop_assume!(row.max_score() > 0.0);
            let mut scaled = row;
            scaled.scores.iter_mut().for_each(|s| *s *= c);
            prop_assert_eq!(predict_topic(&row).unwrap().topic, predict_topic(&scaled).unwrap().topic);
        }
    }
}
