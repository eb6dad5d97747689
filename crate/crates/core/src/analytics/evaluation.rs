//! Evaluation of predicted topics against self-assessed labels.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytics::correlation::TopicMatrix;
use crate::profiling::{predict_topic, Mechanism, SweepProfiles, UserProfile};
use crate::report::{csv_text, fmt_num, fmt_opt, line_chart_svg, Series};
use crate::topics::{Topic, TOPIC_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no labeled users among the profiles")]
    NoLabeledUsers,
    #[error("no sweep points to evaluate")]
    EmptySweep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicAccuracy {
    pub topic: Topic,
    pub labeled_users: usize,
    /// One entry per sweep point; `None` when the topic has no labeled users.
    pub accuracy: Vec<Option<f64>>,
}

/// A precision or recall value; `defined` is false when the ratio was 0/0
/// and `value` was set to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub topic: Topic,
    pub value: f64,
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub topic: Topic,
    /// (false-positive rate, true-positive rate), thresholds descending.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mechanism: Mechanism,
    pub sweep: Vec<usize>,
    pub labeled_users: usize,
    pub unlabeled_users: usize,
    pub per_topic_accuracy: Vec<TopicAccuracy>,
    pub overall_accuracy: Vec<f64>,
    /// Images per user at which the single-point statistics below were taken.
    pub reference_images: usize,
    /// Rows are self-assessed topics, columns predicted topics.
    pub confusion: TopicMatrix<usize>,
    /// Labeled users per topic that received no prediction.
    pub no_prediction: [usize; TOPIC_COUNT],
    pub precision: Vec<Rate>,
    pub recall: Vec<Rate>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    /// (rank, fraction of users whose label ranks at or above it), rank 1..=24.
    pub cmc: Vec<(usize, f64)>,
    pub roc: Vec<RocCurve>,
    /// Overall accuracy against images per user.
    pub sweep_curve: Vec<(usize, f64)>,
}

/// 1-based rank of `topic` in `scores`; tied topics share the best rank.
pub fn label_rank(scores: &[f64; TOPIC_COUNT], topic: Topic) -> usize {
    let own = scores[topic.index()];
    1 + scores.iter().filter(|&&s| s > own).count()
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

fn prediction(profile: &UserProfile, mechanism: Mechanism) -> Option<Topic> {
    predict_topic(profile.vector(mechanism)).ok().map(|p| p.topic)
}

fn roc_curve(topic: Topic, scored: &[(f64, bool)]) -> RocCurve {
    let positives = scored.iter().filter(|(_, p)| *p).count();
    let negatives = scored.len() - positives;
    let mut thresholds: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![(0.0, 0.0)];
    for theta in thresholds {
        let tp = scored.iter().filter(|(s, p)| *p && *s >= theta).count();
        let fp = scored.iter().filter(|(s, p)| !*p && *s >= theta).count();
        points.push((ratio(fp, negatives).0, ratio(tp, positives).0));
    }
    RocCurve { topic, points }
}

/// Scores every sweep point against `labels`. Predictions are taken from the
/// `mechanism` vector of each profile; the confusion matrix, precision,
/// recall, CMC and ROC data come from the largest sweep point.
pub fn evaluate(
    sweep: &[SweepProfiles],
    labels: &BTreeMap<String, Topic>,
    mechanism: Mechanism,
) -> Result<EvalReport, EvalError> {
    let reference = sweep
        .iter()
        .max_by_key(|p| p.images)
        .ok_or(EvalError::EmptySweep)?;
    let labeled: Vec<(&UserProfile, Topic)> = reference
        .profiles
        .iter()
        .filter_map(|p| labels.get(&p.user_id).map(|&t| (p, t)))
        .collect();
    if labeled.is_empty() {
        return Err(EvalError::NoLabeledUsers);
    }
    let n = labeled.len();

    let mut topic_users = [0usize; TOPIC_COUNT];
    for (_, t) in &labeled {
        topic_users[t.index()] += 1;
    }

    let mut per_topic: Vec<TopicAccuracy> = Topic::all()
        .map(|topic| TopicAccuracy {
            topic,
            labeled_users: topic_users[topic.index()],
            accuracy: Vec::with_capacity(sweep.len()),
        })
        .collect();
    let mut overall = Vec::with_capacity(sweep.len());
    for point in sweep {
        let mut correct = [0usize; TOPIC_COUNT];
        let mut total = [0usize; TOPIC_COUNT];
        for p in &point.profiles {
            if let Some(&label) = labels.get(&p.user_id) {
                total[label.index()] += 1;
                if prediction(p, mechanism) == Some(label) {
                    correct[label.index()] += 1;
                }
            }
        }
        for row in per_topic.iter_mut() {
            let i = row.topic.index();
            row.accuracy
                .push((total[i] > 0).then(|| correct[i] as f64 / total[i] as f64));
        }
        let all: usize = total.iter().sum();
        overall.push(ratio(correct.iter().sum(), all).0);
    }

    let mut confusion = [[0usize; TOPIC_COUNT]; TOPIC_COUNT];
    let mut no_prediction = [0usize; TOPIC_COUNT];
    let mut ranks = Vec::with_capacity(n);
    for (p, label) in &labeled {
        match prediction(p, mechanism) {
            Some(pred) => confusion[label.index()][pred.index()] += 1,
            None => no_prediction[label.index()] += 1,
        }
        ranks.push(label_rank(&p.vector(mechanism).scores, *label));
    }

    let mut precision = Vec::with_capacity(TOPIC_COUNT);
    let mut recall = Vec::with_capacity(TOPIC_COUNT);
    let (mut tp_sum, mut predicted_sum) = (0, 0);
    for topic in Topic::all() {
        let i = topic.index();
        let tp = confusion[i][i];
        let predicted: usize = (0..TOPIC_COUNT).map(|r| confusion[r][i]).sum();
        let (value, defined) = ratio(tp, predicted);
        precision.push(Rate { topic, value, defined });
        let (value, defined) = ratio(tp, topic_users[i]);
        recall.push(Rate { topic, value, defined });
        tp_sum += tp;
        predicted_sum += predicted;
    }

    let cmc = (1..=TOPIC_COUNT)
        .map(|r| (r, ranks.iter().filter(|&&rank| rank <= r).count() as f64 / n as f64))
        .collect();

    let roc = Topic::all()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&topic| {
            let scored: Vec<(f64, bool)> = labeled
                .iter()
                .map(|(p, label)| (p.vector(mechanism).score(topic), *label == topic))
                .collect();
            roc_curve(topic, &scored)
        })
        .collect();

    Ok(EvalReport {
        mechanism,
        sweep: sweep.iter().map(|p| p.images).collect(),
        labeled_users: n,
        unlabeled_users: reference.profiles.len() - n,
        per_topic_accuracy: per_topic,
        sweep_curve: sweep.iter().map(|p| p.images).zip(overall.iter().copied()).collect(),
        overall_accuracy: overall,
        reference_images: reference.images,
        confusion,
        no_prediction,
        precision,
        recall,
        micro_precision: ratio(tp_sum, predicted_sum).0,
        micro_recall: tp_sum as f64 / n as f64,
        cmc,
        roc,
    })
}

impl EvalReport {
    /// Topic rows by sweep columns, closed by an overall row.
    pub fn accuracy_csv(&self) -> String {
        let mut header = vec!["topic".to_string()];
        header.extend(self.sweep.iter().map(|k| format!("k={k}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut rows: Vec<Vec<String>> = self
            .per_topic_accuracy
            .iter()
            .map(|row| {
                std::iter::once(row.topic.name().to_string())
                    .chain(row.accuracy.iter().map(|a| fmt_opt(*a)))
                    .collect()
            })
            .collect();
        rows.push(
            std::iter::once("overall".to_string())
                .chain(self.overall_accuracy.iter().map(|a| fmt_num(*a)))
                .collect(),
        );
        csv_text(&header, rows)
    }

    pub fn confusion_csv(&self) -> String {
        let mut header = vec!["self_assessed"];
        header.extend(Topic::all().map(Topic::name));
        header.push("no_prediction");
        let rows = Topic::all().map(|t| {
            std::iter::once(t.name().to_string())
                .chain(self.confusion[t.index()].iter().map(usize::to_string))
                .chain(std::iter::once(self.no_prediction[t.index()].to_string()))
                .collect::<Vec<_>>()
        });
        csv_text(&header, rows)
    }

    pub fn precision_recall_csv(&self) -> String {
        let rows = self.precision.iter().zip(&self.recall).map(|(p, r)| {
            vec![
                p.topic.name().to_string(),
                fmt_num(p.value),
                fmt_num(r.value),
                p.defined.to_string(),
                r.defined.to_string(),
            ]
        });
        csv_text(
            &["topic", "precision", "recall", "precision_defined", "recall_defined"],
            rows,
        )
    }

    pub fn cmc_csv(&self) -> String {
        csv_text(
            &["rank", "fraction"],
            self.cmc.iter().map(|(r, f)| vec![r.to_string(), fmt_num(*f)]),
        )
    }

    pub fn sweep_csv(&self) -> String {
        csv_text(
            &["images", "accuracy"],
            self.sweep_curve.iter().map(|(k, a)| vec![k.to_string(), fmt_num(*a)]),
        )
    }

    pub fn roc_csv(&self) -> String {
        let rows = self.roc.iter().flat_map(|curve| {
            curve
                .points
                .iter()
                .map(move |(fpr, tpr)| vec![curve.topic.name().to_string(), fmt_num(*fpr), fmt_num(*tpr)])
        });
        csv_text(&["topic", "fpr", "tpr"], rows)
    }

    pub fn cmc_svg(&self) -> String {
        line_chart_svg(
            &format!("CMC ({} mechanism, {} images/user)", self.mechanism, self.reference_images),
            "rank",
            "identification rate",
            &[Series {
                name: self.mechanism.to_string(),
                points: self.cmc.iter().map(|&(r, f)| (r as f64, f)).collect(),
            }],
        )
    }

    pub fn sweep_svg(&self) -> String {
        line_chart_svg(
            &format!("Accuracy vs shared images ({} mechanism)", self.mechanism),
            "images per user",
            "accuracy",
            &[Series {
                name: "overall".into(),
                points: self.sweep_curve.iter().map(|&(k, a)| (k as f64, a)).collect(),
            }],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::TopicDistribution;

    fn topic(name: &str) -> Topic {
        Topic::from_name(name).unwrap()
    }

    fn profile(user: &str, entries: &[(&str, f64)]) -> UserProfile {
        let mut v = TopicDistribution::default();
        for &(name, s) in entries {
            v.scores[topic(name).index()] = s;
        }
        v.unmapped = 1.0 - v.scores.iter().sum::<f64>();
        UserProfile {
            user_id: user.into(),
            n_images: 5,
            v_prob: v,
            v_occ: v,
            mechanism: Mechanism::Occ,
            predicted_topic: None,
            ties: vec![],
        }
    }

    fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, Topic> {
        pairs.iter().map(|&(u, t)| (u.to_string(), topic(t))).collect()
    }

    fn single_point(profiles: Vec<UserProfile>) -> Vec<SweepProfiles> {
        vec![SweepProfiles { images: 5, profiles }]
    }

    #[test]
    fn wrong_single_prediction() {
        let report = evaluate(
            &single_point(vec![profile("u1", &[("Drink", 0.9), ("Sport", 0.1)])]),
            &labels(&[("u1", "Sport")]),
            Mechanism::Occ,
        )
        .unwrap();
        assert_eq!(report.overall_accuracy, vec![0.0]);
        let drink = &report.precision[topic("Drink").index()];
        assert_eq!((drink.value, drink.defined), (0.0, true));
        let sport = &report.recall[topic("Sport").index()];
        assert_eq!((sport.value, sport.defined), (0.0, true));
        assert!(!report.precision[topic("Sport").index()].defined);
        assert_eq!(report.confusion[topic("Sport").index()][topic("Drink").index()], 1);
        assert_eq!(report.cmc[0], (1, 0.0));
        assert_eq!(report.cmc[1], (2, 1.0));
    }

    #[test]
    fn no_labeled_users_is_an_error() {
        let sweep = single_point(vec![profile("u1", &[("Drink", 1.0)])]);
        assert_eq!(evaluate(&sweep, &labels(&[("u9", "Drink")]), Mechanism::Occ), Err(EvalError::NoLabeledUsers));
        assert_eq!(evaluate(&[], &labels(&[]), Mechanism::Occ), Err(EvalError::EmptySweep));
    }

    #[test]
    fn per_topic_accuracy_by_sweep() {
        let sweep = vec![
            SweepProfiles {
                images: 5,
                profiles: vec![profile("a", &[("Food", 1.0)]), profile("b", &[("Food", 1.0)]), profile("c", &[("Sport", 1.0)])],
            },
            SweepProfiles {
                images: 10,
                profiles: vec![profile("a", &[("Food", 1.0)]), profile("b", &[("Drink", 1.0)]), profile("c", &[("Food", 1.0)])],
            },
        ];
        let l = labels(&[("a", "Food"), ("b", "Drink"), ("c", "Sport"), ("zz", "News")]);
        let r = evaluate(&sweep, &l, Mechanism::Occ).unwrap();
        let row = |n: &str| r.per_topic_accuracy[topic(n).index()].accuracy.clone();
        assert_eq!(row("Food"), vec![Some(1.0), Some(1.0)]);
        assert_eq!(row("Drink"), vec![Some(0.0), Some(1.0)]);
        assert_eq!(row("Sport"), vec![Some(1.0), Some(0.0)]);
        assert_eq!(row("News"), vec![None, None]);
        assert!((r.overall_accuracy[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.reference_images, 10);
        assert_eq!(r.sweep_curve.len(), 2);
        let csv = r.accuracy_csv();
        assert!(csv.starts_with("topic,k=5,k=10\n"));
        assert!(csv.contains("Drink,0,1\n"));
        assert!(csv.contains("News,,\n"));
        assert!(csv.ends_with("overall,0.666666667,0.666666667\n"));
    }

    #[test]
    fn ranks_share_ties() {
        let mut s = [0.0; TOPIC_COUNT];
        s[3] = 0.5;
        s[4] = 0.5;
        s[5] = 0.2;
        assert_eq!(label_rank(&s, Topic::from_index(4).unwrap()), 1);
        assert_eq!(label_rank(&s, Topic::from_index(5).unwrap()), 3);
        assert_eq!(label_rank(&s, Topic::from_index(0).unwrap()), 4);
    }

    #[test]
    fn roc_sweeps_thresholds() {
        let curve = roc_curve(topic("Food"), &[(0.9, true), (0.4, false), (0.4, true), (0.1, false)]);
        assert_eq!(curve.points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn unpredicted_users_stay_out_of_confusion() {
        let r = evaluate(
            &single_point(vec![profile("a", &[]), profile("b", &[("Food", 1.0)])]),
            &labels(&[("a", "Food"), ("b", "Food")]),
            Mechanism::Occ,
        )
        .unwrap();
        assert_eq!(r.no_prediction[topic("Food").index()], 1);
        assert_eq!(r.confusion[topic("Food").index()][topic("Food").index()], 1);
        assert_eq!(r.overall_accuracy, vec![0.5]);
        assert_eq!(r.micro_precision, 1.0);
        assert_eq!(r.micro_recall, 0.5);
    }
}
