//! Univariate feature selection: rank by absolute Pearson correlation with
//! the training targets and keep the top n (default 88).
//!
//! Callers pass only training rows, so test data can never leak into a
//! mask. Ties in |r| break lexicographically by feature name to keep masks
//! deterministic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Measurement, Source};
use crate::error::{Error, Result};

pub const DEFAULT_N_SELECT: usize = 88;

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len() as f64;
    if x.len() < 2 {
        return Ok(0.0);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        cov += da * db;
        vx += da * da;
        vy += db * db;
    }
    let scale_x = x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let scale_y = y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if vx / n <= (1e-12 * scale_x).powi(2) || vy / n <= (1e-12 * scale_y).powi(2) {
        return Ok(0.0);
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub name: String,
    pub r: f64,
}

/// Kept features for one (measurement, source) cell, ordered by
/// non-increasing |r|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub measurement: Measurement,
    pub source: Source,
    pub n: usize,
    pub entries: Vec<SelectionEntry>,
}

/// Rank all features against the targets and keep the top n by |r|.
/// `rows` must be training rows only.
pub fn select_top_n(
    names: &[String],
    rows: &[&[f64]],
    targets: &[f64],
    n: usize,
) -> Result<Vec<SelectionEntry>> {
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows {
            need: 2,
            got: rows.len(),
        });
    }
    if n > names.len() {
        return Err(Error::NTooLarge {
            n,
            available: names.len(),
        });
    }
    let mut col = vec![0.0; rows.len()];
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(names.len());
    for j in 0..names.len() {
        for (i, row) in rows.iter().enumerate() {
            col[i] = row[j];
        }
        ranked.push((j, pearson(&col, targets)?));
    }
    ranked.sort_by(|a, b| {
        b.1.abs()
            .total_cmp(&a.1.abs())
            .then_with(|| names[a.0].cmp(&names[b.0]))
    });
    Ok(ranked[..n]
        .iter()
        .map(|&(j, r)| SelectionEntry {
            name: names[j].clone(),
            r,
        })
        .collect())
}

impl SelectionMask {
    pub fn compute(
        measurement: Measurement,
        source: Source,
        names: &[String],
        rows: &[&[f64]],
        targets: &[f64],
        n: usize,
    ) -> Result<SelectionMask> {
        Ok(SelectionMask {
            measurement,
            source,
            n,
            entries: select_top_n(names, rows, targets, n)?,
        })
    }

    pub fn kept_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

pub fn save_mask(path: &Path, mask: &SelectionMask) -> Result<()> {
    let json = serde_json::to_string_pretty(mask).expect("mask serializes");
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_mask(path: &Path) -> Result<SelectionMask> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&raw).map_err(|e| Error::MalformedCache {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
