//! Run configuration: command-line flags (or `VISINTEREST_*` environment
//! variables) over a flat `key = value` config file over built-in defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use visinterest::analytics::FixtureSpec;
use visinterest::ingest::DEFAULT_TOP_K;
use visinterest::{Mechanism, TOPIC_COUNT};

use crate::CliError;

pub const DEFAULT_SWEEP: [usize; 5] = [5, 10, 50, 75, 100];
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value config file; flags and environment override it.
    #[arg(long, env = "VISINTEREST_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Taxonomy file.
    #[arg(long, env = "VISINTEREST_TAXONOMY", global = true)]
    pub taxonomy: Option<PathBuf>,
    /// Prediction lines (JSONL).
    #[arg(long, env = "VISINTEREST_PREDICTIONS", global = true)]
    pub predictions: Option<PathBuf>,
    /// External classifier command template with {input} and {output} placeholders.
    #[arg(long, env = "VISINTEREST_CLASSIFIER", global = true)]
    pub classifier: Option<String>,
    /// Image manifest CSV (user_id,image_id,image_path) for --classifier.
    #[arg(long, env = "VISINTEREST_MANIFEST", global = true)]
    pub manifest: Option<PathBuf>,
    /// Self-assessed labels CSV (user_id,topic).
    #[arg(long, env = "VISINTEREST_LABELS", global = true)]
    pub labels: Option<PathBuf>,
    /// Labels per image (top-k).
    #[arg(long, env = "VISINTEREST_TOPK", global = true)]
    pub topk: Option<usize>,
    /// Scoring mechanism used for predictions: prob or occ.
    #[arg(long, env = "VISINTEREST_MECHANISM", global = true)]
    pub mechanism: Option<String>,
    /// Images-per-user sweep, e.g. 5,10,50,75,100.
    #[arg(long, env = "VISINTEREST_SWEEP", global = true)]
    pub sweep: Option<String>,
    /// Interest threshold for the co-interest matrix.
    #[arg(long, env = "VISINTEREST_TAU", global = true)]
    pub tau: Option<f64>,
    /// Output directory.
    #[arg(long, env = "VISINTEREST_OUT", global = true)]
    pub out: Option<PathBuf>,
    /// Allow writing into an existing, non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Skip invalid prediction lines instead of failing.
    #[arg(long, global = true)]
    pub skip_bad: bool,
    /// Seed for synthetic fixtures.
    #[arg(long, env = "VISINTEREST_SEED", global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, env = "VISINTEREST_JOBS", global = true)]
    pub jobs: Option<usize>,
    /// Record the ontology content as attested accurate in the metrics report.
    #[arg(long, global = true)]
    pub accuracy_attested: bool,
    /// Fixture: users generated per topic.
    #[arg(long, env = "VISINTEREST_USERS_PER_TOPIC", global = true)]
    pub users_per_topic: Option<usize>,
    /// Fixture: images generated per user.
    #[arg(long, env = "VISINTEREST_IMAGES_PER_USER", global = true)]
    pub images_per_user: Option<usize>,
    /// Fixture: probability that a label comes from the user's own topic.
    #[arg(long, env = "VISINTEREST_PURITY", global = true)]
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub taxonomy: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub classifier: Option<String>,
    pub manifest: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub topk: usize,
    pub mechanism: Mechanism,
    pub sweep: Vec<usize>,
    pub tau: f64,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub skip_bad: bool,
    pub seed: u64,
    pub jobs: usize,
    pub accuracy_attested: bool,
    pub users_per_topic: usize,
    pub images_per_user: usize,
    pub purity: f64,
}

const KNOWN_KEYS: &[&str] = &[
    "taxonomy",
    "predictions",
    "classifier",
    "manifest",
    "labels",
    "topk",
    "mechanism",
    "sweep",
    "tau",
    "out",
    "force",
    "skip_bad",
    "seed",
    "jobs",
    "accuracy_attested",
    "users_per_topic",
    "images_per_user",
    "purity",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut values = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        values.insert(key, value.trim().to_string());
    }
    Ok(values)
}

pub fn parse_sweep(text: &str) -> Result<Vec<usize>, CliError> {
    let sweep = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("invalid sweep value '{}'", s.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sweep.is_empty() || sweep[0] == 0 || sweep.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!(
            "sweep must be positive and strictly increasing, got '{text}'"
        )));
    }
    Ok(sweep)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn env_bool(name: &str) -> Result<Option<bool>, CliError> {
    std::env::var(name).ok().map(|v| parse_bool(name, &v)).transpose()
}

struct FileValues {
    values: HashMap<String, String>,
    base: PathBuf,
}

impl FileValues {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("config key {key}: invalid value '{v}'")))
            })
            .transpose()
    }

    /// Relative paths resolve against the config file's directory.
    fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(|v| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base.join(p)
            }
        })
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        self.values
            .get(key)
            .map_or(Ok(false), |v| parse_bool(key, v))
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                FileValues {
                    values: parse_config_file(&text)?,
                    base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
                }
            }
            None => FileValues {
                values: HashMap::new(),
                base: PathBuf::new(),
            },
        };

        let mechanism = match self.mechanism.clone().or_else(|| file.values.get("mechanism").cloned()) {
            Some(m) => m.parse::<Mechanism>().map_err(CliError::Config)?,
            None => Mechanism::Occ,
        };
        let sweep = match self.sweep.clone().or_else(|| file.values.get("sweep").cloned()) {
            Some(s) => parse_sweep(&s)?,
            None => DEFAULT_SWEEP.to_vec(),
        };
        let topk = self.topk.or(file.get("topk")?).unwrap_or(DEFAULT_TOP_K);
        if topk == 0 {
            return Err(CliError::Config("topk must be at least 1".into()));
        }
        let tau = self.tau.or(file.get("tau")?).unwrap_or(DEFAULT_TAU);
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(CliError::Config(format!("tau must lie in (0, 1], got {tau}")));
        }
        let purity = self.purity.or(file.get("purity")?).unwrap_or(1.0);
        if !(0.0..=1.0).contains(&purity) {
            return Err(CliError::Config(format!("purity must lie in [0, 1], got {purity}")));
        }

        Ok(RunConfig {
            taxonomy: self.taxonomy.clone().or_else(|| file.path("taxonomy")),
            predictions: self.predictions.clone().or_else(|| file.path("predictions")),
            classifier: self.classifier.clone().or_else(|| file.values.get("classifier").cloned()),
            manifest: self.manifest.clone().or_else(|| file.path("manifest")),
            labels: self.labels.clone().or_else(|| file.path("labels")),
            topk,
            mechanism,
            sweep,
            tau,
            out: self.out.clone().or_else(|| file.path("out")),
            force: self.force || env_bool("VISINTEREST_FORCE")?.unwrap_or(false) || file.flag("force")?,
            skip_bad: self.skip_bad || env_bool("VISINTEREST_SKIP_BAD")?.unwrap_or(false) || file.flag("skip_bad")?,
            seed: self.seed.or(file.get("seed")?).unwrap_or(0),
            jobs: self.jobs.or(file.get("jobs")?).unwrap_or(0),
            accuracy_attested: self.accuracy_attested
                || env_bool("VISINTEREST_ACCURACY_ATTESTED")?.unwrap_or(false)
                || file.flag("accuracy_attested")?,
            users_per_topic: self.users_per_topic.or(file.get("users_per_topic")?).unwrap_or(10),
            images_per_user: self.images_per_user.or(file.get("images_per_user")?).unwrap_or(100),
            purity,
        })
    }
}

impl RunConfig {
    pub fn fixture_spec(&self) -> FixtureSpec {
        FixtureSpec {
            users_per_topic: [self.users_per_topic; TOPIC_COUNT],
            images_per_user: self.images_per_user,
            purity: self.purity,
            seed: self.seed,
            k: self.topk,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let values = parse_config_file("# defaults\ntopk = 7\nskip-bad=true # inline\n\n").unwrap();
        assert_eq!(values["topk"], "7");
        assert_eq!(values["skip_bad"], "true");
        assert!(matches!(parse_config_file("bogus = 1\n"), Err(CliError::Config(_))));
        assert!(matches!(parse_config_file("topk\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_validation() {
        assert_eq!(parse_sweep("5, 10,50").unwrap(), vec![5, 10, 50]);
        assert!(parse_sweep("10,5").is_err());
        assert!(parse_sweep("0,5").is_err());
        assert!(parse_sweep("5,5").is_err());
        assert!(parse_sweep("").is_err());
    }

    #[test]
    fn flags_override_file_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "topk = 7\nmechanism = prob\ntaxonomy = data/t.taxonomy\nsweep = 1,2\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            topk: Some(3),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.topk, 3);
        assert_eq!(cfg.mechanism, Mechanism::Prob);
        assert_eq!(cfg.sweep, vec![1, 2]);
        assert_eq!(cfg.taxonomy, Some(dir.path().join("data/t.taxonomy")));
        assert_eq!(cfg.tau, DEFAULT_TAU);
    }

    #[test]
    fn defaults() {
        let cfg = ConfigArgs::default().resolve().unwrap();
        assert_eq!(cfg.topk, 5);
        assert_eq!(cfg.mechanism, Mechanism::Occ);
        assert_eq!(cfg.sweep, DEFAULT_SWEEP.to_vec());
        assert!(ConfigArgs { tau: Some(0.0), ..Default::default() }.resolve().is_err());
        assert!(ConfigArgs { mechanism: Some("blend".into()), ..Default::default() }.resolve().is_err());
    }
}
