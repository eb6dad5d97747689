//! Loading classifier predictions and self-assessed labels.
//!
//! Predictions arrive as JSON lines, one image per line:
//!
//! ```text
//! {"user_id": "u1", "image_id": "img1", "predictions": [{"label": "espresso", "prob": 0.08}, ...]}
//! ```
//!
//! Labels are a CSV file with header `user_id,topic`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::Command;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topics::{compound_alias, Topic};

pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("field '{0}' must not be empty")]
    EmptyField(&'static str),
    #[error("record has no predictions")]
    NoPredictions,
    #[error("record has {len} predictions, more than the top-k limit of {k_max}")]
    TooManyPredictions { len: usize, k_max: usize },
    #[error("probability {prob} for '{label}' is outside [0, 1]")]
    ProbOutOfRange { label: String, prob: f64 },
    #[error("predictions are not sorted by descending probability at position {0}")]
    NotSorted(usize),
    #[error("duplicate record for user '{user_id}', image '{image_id}'")]
    Duplicate { user_id: String, image_id: String },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {kind}")]
    Record { line: usize, kind: RecordError },
    #[error("labels line {line}: {message}")]
    LabelFormat { line: usize, message: String },
    #[error("labels line {line}: unknown topic '{topic}'")]
    UnknownLabelTopic { line: usize, topic: String },
    #[error("labels line {line}: '{topic}' is a compound topic; use {hint}")]
    CompoundLabelTopic {
        line: usize,
        topic: String,
        hint: String,
    },
    #[error("labels line {line}: duplicate label for user '{user_id}'")]
    DuplicateLabel { line: usize, user_id: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("classifier command template is missing the {0} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("classifier exited with {}: {stderr}", .code.map_or("a signal".to_string(), |c| format!("status {c}")))]
    ClassifierFailed { code: Option<i32>, stderr: String },
    #[error("classifier output rejected: {0}")]
    ClassifierOutput(Box<IngestError>),
}

impl IngestError {
    /// True when the input was readable but violated the data contract.
    pub fn is_validation(&self) -> bool {
        !matches!(self, IngestError::Io(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub label: String,
    pub prob: f64,
}

impl Prediction {
    pub fn new(label: impl Into<String>, prob: f64) -> Self {
        Prediction {
            label: label.into(),
            prob,
        }
    }
}

/// Top-k classifier output for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub user_id: String,
    pub image_id: String,
    pub predictions: Vec<Prediction>,
}

impl PredictionRecord {
    pub fn validate(&self, k_max: usize) -> Result<(), RecordError> {
        if self.user_id.is_empty() {
            return Err(RecordError::EmptyField("user_id"));
        }
        if self.image_id.is_empty() {
            return Err(RecordError::EmptyField("image_id"));
        }
        if self.predictions.is_empty() {
            return Err(RecordError::NoPredictions);
        }
        if self.predictions.len() > k_max {
            return Err(RecordError::TooManyPredictions {
                len: self.predictions.len(),
                k_max,
            });
        }
        for (i, p) in self.predictions.iter().enumerate() {
            if p.label.trim().is_empty() {
                return Err(RecordError::EmptyField("label"));
            }
            if !(0.0..=1.0).contains(&p.prob) {
                return Err(RecordError::ProbOutOfRange {
                    label: p.label.clone(),
                    prob: p.prob,
                });
            }
            if i > 0 && p.prob > self.predictions[i - 1].prob {
                return Err(RecordError::NotSorted(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub k_max: usize,
    /// Drop invalid lines instead of aborting.
    pub skip_bad: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            k_max: DEFAULT_TOP_K,
            skip_bad: false,
        }
    }
}

/// Per-user image records plus optional self-assessed labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileDataset {
    users: IndexMap<String, Vec<PredictionRecord>>,
    labels: BTreeMap<String, Topic>,
}

impl ProfileDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record, keeping users in first-seen order.
    pub fn push(&mut self, record: PredictionRecord) -> Result<(), RecordError> {
        let records = self.users.entry(record.user_id.clone()).or_default();
        if records.iter().any(|r| r.image_id == record.image_id) {
            return Err(RecordError::Duplicate {
                user_id: record.user_id,
                image_id: record.image_id,
            });
        }
        records.push(record);
        Ok(())
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn record_count(&self) -> usize {
        self.users.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> impl ExactSizeIterator<Item = (&str, &[PredictionRecord])> {
        self.users.iter().map(|(u, r)| (u.as_str(), r.as_slice()))
    }

    pub fn user_records(&self, user_id: &str) -> Option<&[PredictionRecord]> {
        self.users.get(user_id).map(Vec::as_slice)
    }

    pub fn labels(&self) -> &BTreeMap<String, Topic> {
        &self.labels
    }

    pub fn label(&self, user_id: &str) -> Option<Topic> {
        self.labels.get(user_id).copied()
    }

    /// Attaches labels; returns the labeled user ids that have no records.
    pub fn set_labels(&mut self, labels: BTreeMap<String, Topic>) -> Vec<String> {
        let orphans = labels
            .keys()
            .filter(|u| !self.users.contains_key(*u))
            .cloned()
            .collect();
        self.labels = labels;
        orphans
    }

    /// Prediction lines in dataset order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in self.users.values().flatten() {
            let line = serde_json::to_string(record).expect("records serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Result of reading prediction lines.
#[derive(Debug)]
pub struct Loaded {
    pub dataset: ProfileDataset,
    /// Lines dropped under `skip_bad`, with the reason.
    pub skipped: Vec<(usize, RecordError)>,
}

pub fn load_predictions<R: Read>(source: R, options: &LoadOptions) -> Result<Loaded, IngestError> {
    let mut dataset = ProfileDataset::new();
    let mut skipped = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<PredictionRecord>(&line)
            .map_err(|e| RecordError::InvalidJson(e.to_string()))
            .and_then(|record| {
                record.validate(options.k_max)?;
                dataset.push(record)
            });
        if let Err(kind) = outcome {
            if options.skip_bad {
                skipped.push((line_no, kind));
            } else {
                return Err(IngestError::Record {
                    line: line_no,
                    kind,
                });
            }
        }
    }
    Ok(Loaded { dataset, skipped })
}

pub fn load_predictions_path(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Loaded, IngestError> {
    load_predictions(std::fs::File::open(path)?, options)
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), String> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found == expected {
        Ok(())
    } else {
        Err(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        ))
    }
}

/// Reads `user_id,topic` rows into a label table.
pub fn load_labels<R: Read>(source: R) -> Result<BTreeMap<String, Topic>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| IngestError::LabelFormat {
        line: 1,
        message: e.to_string(),
    })?;
    check_header(headers, &["user_id", "topic"]).map_err(|message| IngestError::LabelFormat { line: 1, message })?;

    let mut labels = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::LabelFormat {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let (user_id, topic_name) = match (row.get(0), row.get(1)) {
            (Some(u), Some(t)) if !u.is_empty() && row.len() == 2 => (u, t),
            _ => {
                return Err(IngestError::LabelFormat {
                    line,
                    message: "expected `user_id,topic`".into(),
                })
            }
        };
        let topic = Topic::parse_loose(topic_name).map_err(|_| match compound_alias(topic_name) {
            Some(members) => IngestError::CompoundLabelTopic {
                line,
                topic: topic_name.to_string(),
                hint: members.iter().map(|t| t.name()).collect::<Vec<_>>().join(" or "),
            },
            None => IngestError::UnknownLabelTopic {
                line,
                topic: topic_name.to_string(),
            },
        })?;
        if labels.insert(user_id.to_string(), topic).is_some() {
            return Err(IngestError::DuplicateLabel {
                line,
                user_id: user_id.to_string(),
            });
        }
    }
    Ok(labels)
}

pub fn load_labels_path(path: impl AsRef<Path>) -> Result<BTreeMap<String, Topic>, IngestError> {
    load_labels(std::fs::File::open(path)?)
}

/// One image handed to an external classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub user_id: String,
    pub image_id: String,
    pub image_path: PathBuf,
}

/// Reads a `user_id,image_id,image_path` CSV.
pub fn load_manifest<R: Read>(source: R) -> Result<Vec<ManifestEntry>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| IngestError::Manifest {
        line: 1,
        message: e.to_string(),
    })?;
    check_header(headers, &["user_id", "image_id", "image_path"])
        .map_err(|message| IngestError::Manifest { line: 1, message })?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| IngestError::Manifest {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}

fn manifest_csv(entries: &[ManifestEntry]) -> Result<Vec<u8>, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for entry in entries {
        writer.serialize(entry)?;
    }
    writer.into_inner().map_err(|e| e.into_error().into())
}

fn shell_quote(path: &Path) -> String {
    let text = path.to_string_lossy();
    format!("'{}'", text.replace('\'', r"'\''"))
}

/// Runs an external classifier once over the whole manifest.
///
/// `{input}` in the template is replaced by the path of a manifest CSV and
/// `{output}` by the path the program must write prediction lines to. The
/// command runs under `sh -c`.
pub fn run_external_classifier(
    manifest: &[ManifestEntry],
    command_template: &str,
    options: &LoadOptions,
) -> Result<Loaded, IngestError> {
    for placeholder in ["{input}", "{output}"] {
        if !command_template.contains(placeholder) {
            return Err(IngestError::MissingPlaceholder(placeholder));
        }
    }
    if manifest.is_empty() {
        return Ok(Loaded {
            dataset: ProfileDataset::new(),
            skipped: Vec::new(),
        });
    }

    let workdir = tempfile::tempdir()?;
    let input = workdir.path().join("manifest.csv");
    let output = workdir.path().join("predictions.jsonl");
    let csv = manifest_csv(manifest).map_err(|e| io::Error::other(e.to_string()))?;
    std::fs::write(&input, csv)?;

    let command = command_template
        .replace("{input}", &shell_quote(&input))
        .replace("{output}", &shell_quote(&output));
    let result = Command::new("sh").arg("-c").arg(&command).output()?;
    if !result.status.success() {
        return Err(IngestError::ClassifierFailed {
            code: result.status.code(),
            stderr: String::from_utf8_lossy(&result.stderr).trim().to_string(),
        });
    }
    let file = std::fs::File::open(&output).map_err(|e| {
        IngestError::ClassifierOutput(Box::new(IngestError::Io(io::Error::new(
            e.kind(),
            format!("{}: {e}", output.display()),
        ))))
    })?;
    load_predictions(file, options).map_err(|e| IngestError::ClassifierOutput(Box::new(e)))
}
