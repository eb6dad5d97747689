use std::fs;
use std::path::{Path, PathBuf};

use visinterest::analytics::{
    co_interest_matrix, correlation::matrix_rows, evaluate, generate_fixture, labels_csv, pearson_matrix,
    EvalReport,
};
use visinterest::ingest::{self, load_labels_path, load_manifest, load_predictions_path, run_external_classifier};
use visinterest::metrics::ontology_metrics;
use visinterest::profiling::{profile_dataset, profile_dataset_sweep, SweepProfiles};
use visinterest::report::{csv_text, fmt_num, fmt_opt, heatmap_svg, to_json};
use visinterest::scoring::{build_matrices, TopicDistribution};
use visinterest::topics::TOPIC_NAMES;
use visinterest::{LoadOptions, Mechanism, ProfileDataset, Taxonomy, TaxonomyError, UserProfile};

use crate::config::RunConfig;
use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load_taxonomy(cfg: &RunConfig) -> Result<Taxonomy, CliError> {
    let path = cfg
        .taxonomy
        .as_ref()
        .ok_or_else(|| CliError::Config("no taxonomy given (--taxonomy)".into()))?;
    let taxonomy = Taxonomy::from_path(path).map_err(|e| match e {
        TaxonomyError::Io(e) => io_error(path, e),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })?;
    for warning in taxonomy.warnings() {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(taxonomy)
}

fn ingest_error(path: &Path, e: ingest::IngestError) -> CliError {
    if e.is_validation() {
        CliError::Validation(format!("{}: {e}", path.display()))
    } else {
        io_error(path, e)
    }
}

fn load_dataset(cfg: &RunConfig, with_labels: bool) -> Result<ProfileDataset, CliError> {
    let options = LoadOptions {
        k_max: cfg.topk,
        skip_bad: cfg.skip_bad,
    };
    let (loaded, source) = match (&cfg.predictions, &cfg.classifier) {
        (Some(path), _) => (load_predictions_path(path, &options).map_err(|e| ingest_error(path, e))?, path.clone()),
        (None, Some(template)) => {
            let manifest_path = cfg
                .manifest
                .as_ref()
                .ok_or_else(|| CliError::Config("--classifier needs --manifest".into()))?;
            let file = fs::File::open(manifest_path).map_err(|e| io_error(manifest_path, e))?;
            let manifest = load_manifest(file).map_err(|e| ingest_error(manifest_path, e))?;
            let loaded = run_external_classifier(&manifest, template, &options).map_err(|e| match e {
                ingest::IngestError::Io(e) => CliError::Io(format!("classifier: {e}")),
                other => CliError::Validation(format!("classifier: {other}")),
            })?;
            (loaded, PathBuf::from("classifier output"))
        }
        (None, None) => {
            return Err(CliError::Config(
                "no predictions given (--predictions or --classifier with --manifest)".into(),
            ))
        }
    };
    for (line, reason) in &loaded.skipped {
        eprintln!("warning: {}: skipped line {line}: {reason}", source.display());
    }
    let mut dataset = loaded.dataset;
    if with_labels {
        if let Some(path) = &cfg.labels {
            let labels = load_labels_path(path).map_err(|e| ingest_error(path, e))?;
            for orphan in dataset.set_labels(labels) {
                eprintln!("warning: labeled user '{orphan}' has no images");
            }
        }
    }
    Ok(dataset)
}

/// Prepares the output directory, refusing to reuse a non-empty one unless
/// forced.
fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory given (--out)".into()))?;
    if out.exists() {
        let mut entries = fs::read_dir(&out).map_err(|e| io_error(&out, e))?;
        if entries.next().is_some() && !cfg.force {
            return Err(CliError::Config(format!(
                "{} exists and is not empty; pass --force to overwrite",
                out.display()
            )));
        }
    } else {
        fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    }
    Ok(out)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| CliError::Io(format!("serializing JSON: {e}")))
}

pub fn validate_ontology(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    println!(
        "ok: {} concepts, {} topics, {} instances, {} attributes, {} relations",
        t.concepts().len(),
        t.topic_concepts().count(),
        t.instances().len(),
        t.attributes().len(),
        t.relations().len()
    );
    Ok(())
}

fn write_metrics(cfg: &RunConfig, t: &Taxonomy, out: &Path) -> Result<String, CliError> {
    let metrics = ontology_metrics(t, cfg.accuracy_attested);
    let table = metrics.to_table();
    write(out, "metrics.json", &json(&metrics)?)?;
    write(out, "metrics.txt", &table)?;
    Ok(table)
}

pub fn metrics(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let out = output_dir(cfg)?;
    print!("{}", write_metrics(cfg, &t, &out)?);
    Ok(())
}

fn score_csv(rows: &[(String, String, TopicDistribution)]) -> String {
    let mut header = vec!["user_id", "image_id"];
    header.extend(TOPIC_NAMES);
    header.push("unmapped");
    csv_text(
        &header,
        rows.iter().map(|(u, i, d)| {
            [u.clone(), i.clone()]
                .into_iter()
                .chain(d.scores.iter().map(|s| fmt_num(*s)))
                .chain(std::iter::once(fmt_num(d.unmapped)))
                .collect::<Vec<_>>()
        }),
    )
}

fn write_scores(cfg: &RunConfig, t: &Taxonomy, dataset: &ProfileDataset, out: &Path) -> Result<(), CliError> {
    use rayon::prelude::*;
    let users: Vec<(&str, &[visinterest::PredictionRecord])> = dataset.users().collect();
    let matrices = users
        .par_iter()
        .map(|(_, records)| build_matrices(records, t, cfg.topk))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut prob_rows = Vec::new();
    let mut occ_rows = Vec::new();
    for m in &matrices {
        for (i, image) in m.image_ids.iter().enumerate() {
            prob_rows.push((m.user_id.clone(), image.clone(), m.g[i]));
            occ_rows.push((m.user_id.clone(), image.clone(), m.g_occ[i]));
        }
    }
    write(out, "g_prob.csv", &score_csv(&prob_rows))?;
    write(out, "g_occ.csv", &score_csv(&occ_rows))
}

pub fn score(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let dataset = load_dataset(cfg, false)?;
    let out = output_dir(cfg)?;
    write_scores(cfg, &t, &dataset, &out)?;
    println!("scored {} images of {} users", dataset.record_count(), dataset.user_count());
    Ok(())
}

struct Profiles {
    full: Vec<UserProfile>,
    sweep: Vec<SweepProfiles>,
}

fn build_profiles(cfg: &RunConfig, t: &Taxonomy, dataset: &ProfileDataset) -> Result<Profiles, CliError> {
    let to_cli = |e: visinterest::profiling::ProfilingError| CliError::Validation(e.to_string());
    Ok(Profiles {
        full: profile_dataset(dataset, t, cfg.topk, cfg.mechanism).map_err(to_cli)?,
        sweep: profile_dataset_sweep(dataset, t, cfg.topk, cfg.mechanism, &cfg.sweep).map_err(to_cli)?,
    })
}

fn write_profiles(cfg: &RunConfig, profiles: &Profiles, out: &Path) -> Result<(), CliError> {
    #[derive(serde::Serialize)]
    struct Document<'a> {
        mechanism: Mechanism,
        topk: usize,
        users: &'a [UserProfile],
        sweep: &'a [SweepProfiles],
    }
    write(
        out,
        "profiles.json",
        &json(&Document {
            mechanism: cfg.mechanism,
            topk: cfg.topk,
            users: &profiles.full,
            sweep: &profiles.sweep,
        })?,
    )
}

pub fn profile(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let dataset = load_dataset(cfg, false)?;
    let out = output_dir(cfg)?;
    let profiles = build_profiles(cfg, &t, &dataset)?;
    write_profiles(cfg, &profiles, &out)?;
    println!("profiled {} users", profiles.full.len());
    Ok(())
}

fn write_correlation(cfg: &RunConfig, profiles: &[UserProfile], out: &Path) -> Result<(), CliError> {
    let mech = cfg.mechanism;
    let corr = pearson_matrix(profiles, mech).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut header = vec!["topic"];
    header.extend(TOPIC_NAMES);
    write(
        out,
        &format!("correlation_rho_{mech}.csv"),
        &csv_text(&header, matrix_rows(&corr.rho, |v| fmt_opt(*v))),
    )?;
    write(
        out,
        &format!("correlation_bands_{mech}.csv"),
        &csv_text(&header, matrix_rows(&corr.bands, |b| b.as_str().to_string())),
    )?;
    let co = co_interest_matrix(profiles, mech, cfg.tau);
    write(
        out,
        &format!("co_interest_{mech}.csv"),
        &csv_text(&header, matrix_rows(&co, |v| fmt_num(*v))),
    )?;
    let cells: Vec<Vec<Option<f64>>> = corr.rho.iter().map(|r| r.to_vec()).collect();
    write(
        out,
        &format!("correlation_{mech}.svg"),
        &heatmap_svg(&format!("Pearson correlation between topics ({mech})"), &TOPIC_NAMES, &cells),
    )
}

pub fn correlate(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let dataset = load_dataset(cfg, false)?;
    let out = output_dir(cfg)?;
    let profiles = profile_dataset(&dataset, &t, cfg.topk, cfg.mechanism)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_correlation(cfg, &profiles, &out)?;
    println!("correlated {} topics over {} users", TOPIC_NAMES.len(), profiles.len());
    Ok(())
}

fn write_evaluation(dataset: &ProfileDataset, sweep: &[SweepProfiles], out: &Path) -> Result<Vec<EvalReport>, CliError> {
    let mut reports = Vec::new();
    for mech in Mechanism::ALL {
        let report = evaluate(sweep, dataset.labels(), mech).map_err(|e| CliError::Validation(e.to_string()))?;
        write(out, &format!("eval_{mech}.json"), &json(&report)?)?;
        write(out, &format!("accuracy_{mech}.csv"), &report.accuracy_csv())?;
        write(out, &format!("confusion_{mech}.csv"), &report.confusion_csv())?;
        write(out, &format!("precision_recall_{mech}.csv"), &report.precision_recall_csv())?;
        write(out, &format!("cmc_{mech}.csv"), &report.cmc_csv())?;
        write(out, &format!("roc_{mech}.csv"), &report.roc_csv())?;
        write(out, &format!("sweep_{mech}.csv"), &report.sweep_csv())?;
        write(out, &format!("cmc_{mech}.svg"), &report.cmc_svg())?;
        write(out, &format!("sweep_{mech}.svg"), &report.sweep_svg())?;
        reports.push(report);
    }
    Ok(reports)
}

fn print_accuracy(reports: &[EvalReport]) {
    for r in reports {
        let cells: Vec<String> = r
            .sweep
            .iter()
            .zip(&r.overall_accuracy)
            .map(|(k, a)| format!("k={k}: {}", fmt_num(*a)))
            .collect();
        println!("{} accuracy ({} labeled users): {}", r.mechanism, r.labeled_users, cells.join(", "));
    }
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.labels.is_none() {
        return Err(CliError::Config("evaluate needs --labels".into()));
    }
    let t = load_taxonomy(cfg)?;
    let dataset = load_dataset(cfg, true)?;
    let out = output_dir(cfg)?;
    let sweep = profile_dataset_sweep(&dataset, &t, cfg.topk, cfg.mechanism, &cfg.sweep)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    print_accuracy(&write_evaluation(&dataset, &sweep, &out)?);
    Ok(())
}

pub fn fixture(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let out = output_dir(cfg)?;
    let dataset = generate_fixture(&t, &cfg.fixture_spec()).map_err(|e| CliError::Validation(e.to_string()))?;
    write(&out, "predictions.jsonl", &dataset.to_jsonl())?;
    write(&out, "labels.csv", &labels_csv(&dataset))?;
    println!(
        "wrote {} images for {} users (seed {})",
        dataset.record_count(),
        dataset.user_count(),
        cfg.seed
    );
    Ok(())
}

pub fn pipeline(cfg: &RunConfig) -> Result<(), CliError> {
    let t = load_taxonomy(cfg)?;
    let dataset = load_dataset(cfg, true)?;
    let out = output_dir(cfg)?;
    write_metrics(cfg, &t, &out)?;
    write_scores(cfg, &t, &dataset, &out)?;
    let profiles = build_profiles(cfg, &t, &dataset)?;
    write_profiles(cfg, &profiles, &out)?;
    if profiles.full.len() >= 2 {
        write_correlation(cfg, &profiles.full, &out)?;
    } else {
        eprintln!("note: correlation skipped, it needs at least 2 users");
    }
    if dataset.labels().is_empty() {
        eprintln!("note: evaluation skipped, no labels given");
    } else {
        print_accuracy(&write_evaluation(&dataset, &profiles.sweep, &out)?);
    }
    println!("pipeline finished: {} users, output in {}", profiles.full.len(), out.display());
    Ok(())
}
