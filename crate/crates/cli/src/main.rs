//! Command-line driver for the well-being estimation pipeline: corpus
//! synthesis, feature extraction, correlation-based selection, training,
//! cross-validated evaluation, and density scatter plots.

mod extract;
mod plot;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voicewell_core::data::synth::{generate_synthetic, SynthSpec};
use voicewell_core::data::{load_manifest, Dataset, Measurement, Source};
use voicewell_core::eval::{self, evaluate_cell, CvConfig};
use voicewell_core::features::{read_csv, FeatureTable};
use voicewell_core::linguistic::LexiconSet;
use voicewell_core::model::{self, Hyperparams};
use voicewell_core::selection::{self, SelectionMask, DEFAULT_N_SELECT};
use voicewell_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "voicewell",
    version,
    about = "Estimate well-being questionnaire scores from voice recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic speech corpus with planted trait-score links.
    Synth(SynthArgs),
    /// Extract per-question and concatenated feature caches from a corpus.
    Extract(ExtractArgs),
    /// Rank features against a measurement and save the top-n mask.
    Select(SelectArgs),
    /// Train a regressor on one feature cache and save the model.
    Train(TrainArgs),
    /// Cross-validated evaluation grid with permutation significance.
    Cv(CvArgs),
    /// Density scatter SVGs from predictions saved by `cv`.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    subjects: usize,
    #[arg(long, default_value_t = 5)]
    sessions: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Score noise in [0, 1]; 0 makes scores exact functions of the traits.
    #[arg(long, default_value_t = 0.2)]
    noise_level: f64,
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Lexicon directory; defaults to `lexicons/` next to the manifest.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Cache output directory.
    #[arg(long)]
    out: PathBuf,
    /// Re-extract everything, ignoring cached results.
    #[arg(long)]
    force: bool,
    /// Worker threads; overrides VOICEWELL_WORKERS (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Feature cache CSV for a single source.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_parser = parse_measurement)]
    measurement: Measurement,
    #[arg(long, default_value_t = DEFAULT_N_SELECT)]
    n_select: usize,
    /// Selection mask output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Feature cache CSV for a single source.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_parser = parse_measurement)]
    measurement: Measurement,
    /// Selection mask JSON; computed fresh from this data when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_SELECT)]
    n_select: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding the features_*.csv caches written by `extract`.
    #[arg(long)]
    features_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Restrict to these measurements (repeatable; default: all four).
    #[arg(long = "measurement", value_parser = parse_measurement)]
    measurements: Vec<Measurement>,
    /// Restrict to these sources (repeatable; default: Q1..Q7 + concatenated).
    #[arg(long = "source", value_parser = parse_source)]
    sources: Vec<Source>,
    #[arg(long, default_value_t = DEFAULT_N_SELECT)]
    n_select: usize,
    #[arg(long, default_value_t = eval::DEFAULT_K_FOLDS)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Permutations for the significance test; 0 disables it.
    #[arg(long, default_value_t = eval::DEFAULT_N_PERMUTATIONS)]
    n_perm: usize,
    /// Clamp predictions into the measurement's valid range.
    #[arg(long)]
    clip_predictions: bool,
    /// Report the mean of per-fold CCCs instead of pooling held-out pairs.
    #[arg(long)]
    fold_averaged_metrics: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// predictions.csv written by `cv`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Restrict to these measurements (repeatable; default: all present).
    #[arg(long = "measurement", value_parser = parse_measurement)]
    measurements: Vec<Measurement>,
    /// Source lane to plot (default: concatenated).
    #[arg(long, value_parser = parse_source)]
    source: Option<Source>,
}

fn parse_measurement(s: &str) -> std::result::Result<Measurement, String> {
    Measurement::ALL
        .into_iter()
        .find(|m| m.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown measurement {s:?} (expected STAI, GAD7, PSQI, or PANAS)"))
}

fn parse_source(s: &str) -> std::result::Result<Source, String> {
    Source::ALL
        .into_iter()
        .find(|src| src.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown source {s:?} (expected Q1..Q7 or concatenated)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Extract(a) => run_extract(a),
        Command::Select(a) => run_select(a),
        Command::Train(a) => run_train(a),
        Command::Cv(a) => run_cv(a),
        Command::Plot(a) => run_plot(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_synth(a: SynthArgs) -> Result<ExitCode> {
    let spec = SynthSpec {
        n_subjects: a.subjects,
        sessions_per_subject: a.sessions,
        seed: a.seed,
        noise_level: a.noise_level,
    };
    let manifest = generate_synthetic(&spec, &a.out)?;
    let n_sessions: usize = manifest.subjects.iter().map(|s| s.sessions.len()).sum();
    println!(
        "generated {} subjects, {} sessions in {}",
        manifest.subjects.len(),
        n_sessions,
        a.out.display()
    );
    let dataset = load_manifest(&a.out.join("manifest.json"))?;
    if !dataset.excluded.is_empty() {
        for x in &dataset.excluded {
            eprintln!("excluded {}/{}: {}", x.subject_id, x.session_index, x.reason);
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("VOICEWELL_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
    .max(1)
}

fn run_extract(a: ExtractArgs) -> Result<ExitCode> {
    let dataset = load_manifest(&a.manifest)?;
    for x in &dataset.excluded {
        eprintln!("excluded {}/{}: {}", x.subject_id, x.session_index, x.reason);
    }
    let lex_dir = a.lexicons.unwrap_or_else(|| {
        a.manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join("lexicons")
    });
    let lex = LexiconSet::load_dir(&lex_dir)?;
    let outcome = extract::run(&dataset, &lex, &a.out, a.force, worker_count(a.workers))?;
    println!("{} extracted, {} cached", outcome.extracted, outcome.cached);
    if !outcome.failed.is_empty() {
        for (key, e) in &outcome.failed {
            eprintln!("session {key}: {e}");
        }
        eprintln!(
            "{} of {} sessions failed",
            outcome.failed.len(),
            dataset.sessions.len()
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

/// Cache rows reordered to line up with `dataset.sessions`.
fn align(dataset: &Dataset, table: &FeatureTable, path: &Path) -> Result<Vec<usize>> {
    let mut by_key: HashMap<(&str, u32), usize> = HashMap::new();
    for (i, row) in table.rows().iter().enumerate() {
        by_key.insert((row.subject_id.as_str(), row.session_index), i);
    }
    dataset
        .sessions
        .iter()
        .map(|s| {
            by_key
                .get(&(s.subject_id.as_str(), s.session_index))
                .copied()
                .ok_or_else(|| Error::MalformedCache {
                    path: path.to_path_buf(),
                    reason: format!(
                        "no cached row for {}/{}; rerun extract",
                        s.subject_id, s.session_index
                    ),
                })
        })
        .collect()
}

/// The one source a single-cache file holds, from its question_id column.
fn table_source(table: &FeatureTable, path: &Path) -> Result<Source> {
    let mut labels: Vec<&str> = table
        .rows()
        .iter()
        .map(|r| r.question_id.as_str())
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let malformed = |reason: String| Error::MalformedCache {
        path: path.to_path_buf(),
        reason,
    };
    match labels[..] {
        [] => Err(malformed("cache has no rows".to_string())),
        [one] => Source::ALL
            .into_iter()
            .find(|s| s.as_str() == one)
            .ok_or_else(|| malformed(format!("unknown question id {one:?}"))),
        _ => Err(malformed(format!(
            "expected one question per cache, found {labels:?}"
        ))),
    }
}

fn run_select(a: SelectArgs) -> Result<ExitCode> {
    let dataset = load_manifest(&a.manifest)?;
    let table = read_csv(&a.features)?;
    let source = table_source(&table, &a.features)?;
    let order = align(&dataset, &table, &a.features)?;
    let rows: Vec<&[f64]> = order
        .iter()
        .map(|&i| table.rows()[i].values.as_slice())
        .collect();
    let targets = dataset.targets(a.measurement);
    let mask = SelectionMask::compute(
        a.measurement,
        source,
        table.names(),
        &rows,
        &targets,
        a.n_select,
    )?;
    selection::save_mask(&a.out, &mask)?;
    println!(
        "selected {} of {} features for {} on {}; strongest |r| = {:.3} ({})",
        mask.entries.len(),
        table.names().len(),
        a.measurement.as_str(),
        source.as_str(),
        mask.entries[0].r.abs(),
        mask.entries[0].name
    );
    println!("mask -> {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_train(a: TrainArgs) -> Result<ExitCode> {
    let dataset = load_manifest(&a.manifest)?;
    let table = read_csv(&a.features)?;
    let source = table_source(&table, &a.features)?;
    let order = align(&dataset, &table, &a.features)?;
    let rows: Vec<&[f64]> = order
        .iter()
        .map(|&i| table.rows()[i].values.as_slice())
        .collect();
    let targets = dataset.targets(a.measurement);

    let mask = match &a.mask {
        Some(path) => {
            let mask = selection::load_mask(path)?;
            if mask.measurement != a.measurement {
                return Err(Error::MalformedCache {
                    path: path.clone(),
                    reason: format!(
                        "mask was computed for {}, not {}",
                        mask.measurement.as_str(),
                        a.measurement.as_str()
                    ),
                });
            }
            mask
        }
        None => SelectionMask::compute(
            a.measurement,
            source,
            table.names(),
            &rows,
            &targets,
            a.n_select,
        )?,
    };

    let col_of: HashMap<&str, usize> = table
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let mut cols = Vec::with_capacity(mask.entries.len());
    for name in mask.kept_names() {
        match col_of.get(name) {
            Some(&j) => cols.push(j),
            None => {
                return Err(Error::MalformedCache {
                    path: a.features.clone(),
                    reason: format!("mask feature {name:?} is not in the cache"),
                })
            }
        }
    }
    let kept_names: Vec<String> = mask.kept_names().iter().map(|s| s.to_string()).collect();
    let sub_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| cols.iter().map(|&j| r[j]).collect())
        .collect();
    let sub_refs: Vec<&[f64]> = sub_rows.iter().map(|r| r.as_slice()).collect();

    let (model, report) = model::train(
        &sub_refs,
        &targets,
        &kept_names,
        &Hyperparams::default(),
        a.seed,
    )?;
    model::save_model(&a.out, &model)?;
    println!(
        "trained on {} sessions x {} features; standardized mse {:.4} -> {:.4}",
        rows.len(),
        kept_names.len(),
        report.epoch_mse.first().unwrap(),
        report.epoch_mse.last().unwrap()
    );
    println!("model -> {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Explicit picks in the order given (deduplicated), or everything.
fn picked<T: Copy + PartialEq>(chosen: &[T], all: &[T]) -> Vec<T> {
    if chosen.is_empty() {
        return all.to_vec();
    }
    let mut out = Vec::new();
    for &c in chosen {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

fn load_source_cache(
    dir: &Path,
    source: Source,
    dataset: &Dataset,
) -> Result<(FeatureTable, Vec<usize>)> {
    let path = dir.join(format!("features_{}.csv", source.as_str()));
    let table = read_csv(&path)?;
    for row in table.rows() {
        if row.question_id != source.as_str() {
            return Err(Error::MalformedCache {
                path: path.clone(),
                reason: format!(
                    "row for question {:?} in the {} cache",
                    row.question_id,
                    source.as_str()
                ),
            });
        }
    }
    let order = align(dataset, &table, &path)?;
    Ok((table, order))
}

fn run_cv(a: CvArgs) -> Result<ExitCode> {
    let dataset = load_manifest(&a.manifest)?;
    let measurements = picked(&a.measurements, &Measurement::ALL);
    let sources = picked(&a.sources, &Source::ALL);
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| Error::io(format!("creating {}", a.out_dir.display()), e))?;

    let ids = dataset.subject_ids();
    let mut failures = 0usize;
    let mut per_source = Vec::new();
    for &s in &sources {
        match load_source_cache(&a.features_dir, s, &dataset) {
            Ok(loaded) => per_source.push((s, loaded)),
            Err(e) => {
                eprintln!("{}: {e}", s.as_str());
                failures += measurements.len();
            }
        }
    }

    let mut results = Vec::new();
    let mut pred_csv =
        String::from("measurement,source,subject_id,session_index,prediction,target\n");
    let mut scatter: Vec<(Measurement, Vec<(f64, f64)>)> = Vec::new();
    for &m in &measurements {
        let targets = dataset.targets(m);
        for (s, (table, order)) in &per_source {
            let rows: Vec<&[f64]> = order
                .iter()
                .map(|&i| table.rows()[i].values.as_slice())
                .collect();
            let cfg = CvConfig {
                k: a.k,
                n_select: a.n_select,
                hyper: Hyperparams::default(),
                seed: a.seed,
                fold_averaged: a.fold_averaged_metrics,
                clip_range: a.clip_predictions.then(|| m.range()),
            };
            let n_perm = (a.n_perm > 0).then_some(a.n_perm);
            match evaluate_cell(m, *s, &ids, &rows, table.names(), &targets, &cfg, n_perm) {
                Ok((res, outcome)) => {
                    let mark = res.p_value.map(eval::stars).unwrap_or("");
                    let p_note = res
                        .p_value
                        .map(|p| format!(" (p = {p:.6})"))
                        .unwrap_or_default();
                    println!(
                        "{} x {}: ccc {:.3}{mark} r {:.3}{p_note}",
                        m.as_str(),
                        s.as_str(),
                        res.ccc,
                        res.pearson
                    );
                    for (&ri, &(pred, target)) in outcome.row_indices.iter().zip(&outcome.pairs) {
                        let sess = &dataset.sessions[ri];
                        pred_csv.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            m.as_str(),
                            s.as_str(),
                            sess.subject_id,
                            sess.session_index,
                            pred,
                            target
                        ));
                    }
                    if *s == Source::Concatenated {
                        scatter.push((m, outcome.pairs.clone()));
                    }
                    results.push(res);
                }
                Err(e) => {
                    eprintln!("{} x {}: {e}", m.as_str(), s.as_str());
                    failures += 1;
                }
            }
        }
    }

    eval::write_results_json(&a.out_dir.join("results.json"), &results)?;
    eval::write_table_csv(&a.out_dir.join("table3.csv"), &results)?;
    let pred_path = a.out_dir.join("predictions.csv");
    std::fs::write(&pred_path, pred_csv)
        .map_err(|e| Error::io(format!("writing {}", pred_path.display()), e))?;
    for (m, pairs) in &scatter {
        let svg_path = a.out_dir.join(format!("scatter_{}.svg", m.as_str()));
        std::fs::write(&svg_path, plot::density_scatter_svg(*m, pairs))
            .map_err(|e| Error::io(format!("writing {}", svg_path.display()), e))?;
    }
    println!(
        "wrote results.json, table3.csv, predictions.csv, {} scatter SVG(s) in {}",
        scatter.len(),
        a.out_dir.display()
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run_plot(a: PlotArgs) -> Result<ExitCode> {
    let source = a.source.unwrap_or(Source::Concatenated);
    let malformed = |reason: String| Error::MalformedCache {
        path: a.predictions.clone(),
        reason,
    };
    let mut rdr =
        csv::Reader::from_path(&a.predictions).map_err(|e| malformed(e.to_string()))?;
    let header = rdr.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let expected = [
        "measurement",
        "source",
        "subject_id",
        "session_index",
        "prediction",
        "target",
    ];
    if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(malformed("unexpected predictions header".to_string()));
    }

    let mut per_m: HashMap<Measurement, Vec<(f64, f64)>> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if &record[1] != source.as_str() {
            continue;
        }
        let m = parse_measurement(&record[0]).map_err(|e| malformed(format!("row {i}: {e}")))?;
        let pred: f64 = record[4]
            .parse()
            .map_err(|_| malformed(format!("row {i}: bad prediction {:?}", &record[4])))?;
        let target: f64 = record[5]
            .parse()
            .map_err(|_| malformed(format!("row {i}: bad target {:?}", &record[5])))?;
        per_m.entry(m).or_default().push((pred, target));
    }

    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| Error::io(format!("creating {}", a.out_dir.display()), e))?;
    let explicit = !a.measurements.is_empty();
    let mut missing = Vec::new();
    let mut wrote = 0usize;
    for m in picked(&a.measurements, &Measurement::ALL) {
        match per_m.get(&m) {
            Some(pairs) => {
                let path = a.out_dir.join(format!("scatter_{}.svg", m.as_str()));
                std::fs::write(&path, plot::density_scatter_svg(m, pairs))
                    .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                println!("{} ({} points) -> {}", m.as_str(), pairs.len(), path.display());
                wrote += 1;
            }
            None if explicit => missing.push(m),
            None => {}
        }
    }
    for m in &missing {
        eprintln!(
            "no predictions for {} with source {}",
            m.as_str(),
            source.as_str()
        );
    }
    if wrote == 0 {
        eprintln!("nothing plotted for source {}", source.as_str());
        return Ok(ExitCode::FAILURE);
    }
    Ok(if missing.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
