//! Evaluation: concordance correlation, subject-independent k-fold
//! cross-validation, and permutation significance tests.
//!
//! Folds are built over subjects, never sessions, so no speaker appears on
//! both sides of a split. Feature selection runs inside each fold on
//! training rows only.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fnv1a_64, Measurement, Source};
use crate::error::{Error, Result};
use crate::model::{self, Hyperparams};
use crate::selection;

pub const DEFAULT_K_FOLDS: usize = 5;
pub const DEFAULT_N_PERMUTATIONS: usize = 100_000;
pub const MIN_PERMUTATIONS: usize = 1000;

/// Lin's concordance correlation coefficient with population moments.
/// Zero when the denominator vanishes (both sides constant and equal).
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov /= n;
    vx /= n;
    vy /= n;
    let scale = x
        .iter()
        .chain(y)
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let denom = vx + vy + (mx - my) * (mx - my);
    if denom <= (1e-12 * scale).powi(2) {
        return Ok(0.0);
    }
    Ok((2.0 * cov / denom).clamp(-1.0, 1.0))
}

/// Two-sided permutation test on CCC: shuffle the targets `n_perm` times
/// and count permutations whose |CCC| reaches |observed|.
/// p = (1 + count) / (n_perm + 1), so p can never be exactly zero.
pub fn permutation_p(preds: &[f64], targets: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::TooFewPermutations(n_perm));
    }
    let n = preds.len() as f64;
    if preds.is_empty() {
        return Ok(1.0);
    }
    // Means and variances are permutation-invariant, so only the cross
    // term needs recomputing per shuffle.
    let mx = preds.iter().sum::<f64>() / n;
    let my = targets.iter().sum::<f64>() / n;
    let vx = preds.iter().map(|&a| (a - mx) * (a - mx)).sum::<f64>() / n;
    let vy = targets.iter().map(|&b| (b - my) * (b - my)).sum::<f64>() / n;
    let scale = preds
        .iter()
        .chain(targets)
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let denom = vx + vy + (mx - my) * (mx - my);
    if denom <= (1e-12 * scale).powi(2) {
        // Every permutation ties the (zero) observed statistic.
        return Ok(1.0);
    }
    let ccc_of_dot = |dot: f64| 2.0 * (dot / n - mx * my) / denom;
    let observed = ccc_of_dot(preds.iter().zip(targets).map(|(a, b)| a * b).sum());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = targets.to_vec();
    let mut count = 0usize;
    for _ in 0..n_perm {
        perm.shuffle(&mut rng);
        let dot: f64 = preds.iter().zip(&perm).map(|(a, b)| a * b).sum();
        if ccc_of_dot(dot).abs() >= observed.abs() {
            count += 1;
        }
    }
    Ok((1 + count) as f64 / (n_perm + 1) as f64)
}

pub fn stars(p: f64) -> &'static str {
    if p < 1e-5 {
        "**"
    } else if p < 1e-2 {
        "*"
    } else {
        ""
    }
}

/// Partition unique subject ids into k folds: sort, shuffle with the
/// seed, deal round-robin. Fold sizes differ by at most one.
pub fn make_folds(subject_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    assert!(k >= 2, "need at least 2 folds");
    let unique: BTreeSet<&String> = subject_ids.iter().collect();
    let mut subjects: Vec<String> = unique.into_iter().cloned().collect();
    if subjects.len() < k {
        return Err(Error::TooFewSubjects {
            need: k,
            got: subjects.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, s) in subjects.into_iter().enumerate() {
        folds[i % k].push(s);
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub n_select: usize,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Average per-fold CCCs instead of pooling all held-out pairs.
    pub fold_averaged: bool,
    /// Clamp predictions to the measurement's valid range.
    pub clip_range: Option<(f64, f64)>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: DEFAULT_K_FOLDS,
            n_select: selection::DEFAULT_N_SELECT,
            hyper: Hyperparams::default(),
            seed: 42,
            fold_averaged: false,
            clip_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// (prediction, target) for every row, pooled across held-out folds.
    pub pairs: Vec<(f64, f64)>,
    /// Input row index behind each entry of `pairs`.
    pub row_indices: Vec<usize>,
    pub per_fold_ccc: Vec<f64>,
    pub ccc: f64,
    pub folds: Vec<Vec<String>>,
    /// Feature names each fold's model trained on, in selection order.
    /// Computed from that fold's training rows alone.
    pub fold_selected: Vec<Vec<String>>,
}

/// Subject-independent k-fold cross-validation of the select-then-train
/// pipeline for one (source, measurement) pair.
pub fn cross_validate(
    subject_ids: &[String],
    rows: &[&[f64]],
    names: &[String],
    targets: &[f64],
    cfg: &CvConfig,
) -> Result<CvOutcome> {
    if subject_ids.len() != rows.len() {
        return Err(Error::LengthMismatch {
            left: subject_ids.len(),
            right: rows.len(),
        });
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    let folds = make_folds(subject_ids, cfg.k, cfg.seed)?;
    let col_of: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();

    let mut pairs = Vec::with_capacity(rows.len());
    let mut row_indices = Vec::with_capacity(rows.len());
    let mut per_fold_ccc = Vec::with_capacity(cfg.k);
    let mut fold_selected = Vec::with_capacity(cfg.k);
    for (f, fold_subjects) in folds.iter().enumerate() {
        let held_out: HashSet<&str> = fold_subjects.iter().map(|s| s.as_str()).collect();
        let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
        for (i, sid) in subject_ids.iter().enumerate() {
            if held_out.contains(sid.as_str()) {
                test_idx.push(i);
            } else {
                train_idx.push(i);
            }
        }
        for &i in &test_idx {
            assert!(
                !train_idx.iter().any(|&j| subject_ids[j] == subject_ids[i]),
                "subject {} leaked across the fold boundary",
                subject_ids[i]
            );
        }

        let train_rows: Vec<&[f64]> = train_idx.iter().map(|&i| rows[i]).collect();
        let train_targets: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
        let entries = selection::select_top_n(names, &train_rows, &train_targets, cfg.n_select)?;
        let kept_cols: Vec<usize> = entries.iter().map(|e| col_of[e.name.as_str()]).collect();
        let kept_names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();

        let sub_train: Vec<Vec<f64>> = train_idx
            .iter()
            .map(|&i| kept_cols.iter().map(|&c| rows[i][c]).collect())
            .collect();
        let sub_refs: Vec<&[f64]> = sub_train.iter().map(|r| r.as_slice()).collect();
        let (model, _) = model::train(
            &sub_refs,
            &train_targets,
            &kept_names,
            &cfg.hyper,
            cfg.seed + f as u64,
        )?;

        let fold_start = pairs.len();
        for &i in &test_idx {
            let row: Vec<f64> = kept_cols.iter().map(|&c| rows[i][c]).collect();
            let mut pred = model.predict(&row)?;
            if let Some((lo, hi)) = cfg.clip_range {
                pred = pred.clamp(lo, hi);
            }
            pairs.push((pred, targets[i]));
            row_indices.push(i);
        }
        let (fp, ft): (Vec<f64>, Vec<f64>) = pairs[fold_start..].iter().copied().unzip();
        per_fold_ccc.push(ccc(&fp, &ft)?);
        fold_selected.push(kept_names);
    }
    assert_eq!(pairs.len(), rows.len(), "every session scored exactly once");

    let pooled = if cfg.fold_averaged {
        per_fold_ccc.iter().sum::<f64>() / per_fold_ccc.len() as f64
    } else {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        ccc(&p, &t)?
    };
    Ok(CvOutcome {
        pairs,
        row_indices,
        per_fold_ccc,
        ccc: pooled,
        folds,
        fold_selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub measurement: Measurement,
    pub source: Source,
    pub ccc: f64,
    pub pearson: f64,
    pub p_value: Option<f64>,
    pub n_sessions: usize,
    pub per_fold_ccc: Vec<f64>,
}

/// Seed for one cell's permutation test, decorrelated across cells but
/// stable for a given run seed.
pub fn cell_seed(seed: u64, measurement: Measurement, source: Source) -> u64 {
    seed ^ fnv1a_64(format!("{}:{}", measurement.as_str(), source.as_str()).as_bytes())
}

/// Cross-validate one cell and attach a permutation p-value when
/// requested.
pub fn evaluate_cell(
    measurement: Measurement,
    source: Source,
    subject_ids: &[String],
    rows: &[&[f64]],
    names: &[String],
    targets: &[f64],
    cfg: &CvConfig,
    n_perm: Option<usize>,
) -> Result<(EvalResult, CvOutcome)> {
    let outcome = cross_validate(subject_ids, rows, names, targets, cfg)?;
    let (p, t): (Vec<f64>, Vec<f64>) = outcome.pairs.iter().copied().unzip();
    let pearson = crate::selection::pearson(&p, &t)?;
    let p_value = match n_perm {
        Some(np) => Some(permutation_p(
            &p,
            &t,
            np,
            cell_seed(cfg.seed, measurement, source),
        )?),
        None => None,
    };
    Ok((
        EvalResult {
            measurement,
            source,
            ccc: outcome.ccc,
            pearson,
            p_value,
            n_sessions: outcome.pairs.len(),
            per_fold_ccc: outcome.per_fold_ccc.clone(),
        },
        outcome,
    ))
}

pub fn write_results_json(path: &Path, results: &[EvalResult]) -> Result<()> {
    let json = serde_json::to_string_pretty(results).expect("results serialize");
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_results_json(path: &Path) -> Result<Vec<EvalResult>> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&raw).map_err(|e| Error::MalformedCache {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Summary table: one row per measurement, one column per source, cells
/// formatted as CCC to two decimals plus significance stars.
pub fn write_table_csv(path: &Path, results: &[EvalResult]) -> Result<()> {
    let mut cell: HashMap<(Measurement, Source), &EvalResult> = HashMap::new();
    for r in results {
        cell.insert((r.measurement, r.source), r);
    }
    let mut out = String::from("measurement");
    for s in Source::ALL {
        out.push(',');
        out.push_str(s.table_label());
    }
    out.push('\n');
    for m in Measurement::ALL {
        out.push_str(m.as_str());
        for s in Source::ALL {
            out.push(',');
            if let Some(r) = cell.get(&(m, s)) {
                let mark = r.p_value.map(stars).unwrap_or("");
                out.push_str(&format!("{:.2}{}", r.ccc, mark));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
