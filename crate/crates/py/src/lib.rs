//! Python bindings for the well-being estimation pipeline: corpus
//! synthesis, per-response feature extraction, correlation selection,
//! the regressor, and subject-independent cross-validation.

use std::path::PathBuf;
use std::str::FromStr;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use voicewell_core::data::synth::{generate_synthetic, SynthSpec};
use voicewell_core::eval::{self, CvConfig};
use voicewell_core::features::{
    self, FeatureVector as CoreFeatureVector, QuestionId, CONCATENATED_DIM, READ_DIM,
    SPONTANEOUS_DIM,
};
use voicewell_core::linguistic::{load_transcript, LexiconSet};
use voicewell_core::model::{self, Hyperparams, RegressorModel};
use voicewell_core::selection::{self, DEFAULT_N_SELECT};
use voicewell_core::signal_io;
use voicewell_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn hyper_from(
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    hidden: Option<Vec<usize>>,
    dropout: Option<f64>,
    l2_lambda: Option<f64>,
    batch_size: Option<usize>,
) -> Hyperparams {
    let mut h = Hyperparams::default();
    if let Some(v) = epochs {
        h.epochs = v;
    }
    if let Some(v) = learning_rate {
        h.learning_rate = v;
    }
    if let Some(v) = hidden {
        h.hidden = v;
    }
    if let Some(v) = dropout {
        h.dropout = v;
    }
    if let Some(v) = l2_lambda {
        h.l2_lambda = v;
    }
    if let Some(v) = batch_size {
        h.batch_size = v;
    }
    h
}

/// Named feature values in fixed extraction order.
#[pyclass(frozen)]
struct FeatureVector {
    inner: CoreFeatureVector,
}

#[pymethods]
impl FeatureVector {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn value(&self, name: &str) -> Option<f64> {
        self.inner.value(name)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("FeatureVector({} features)", self.inner.len())
    }
}

/// Feed-forward regressor over selected features, with the input
/// standardizer and target scale baked in.
#[pyclass(frozen)]
struct Regressor {
    inner: RegressorModel,
    epoch_mse: Vec<f64>,
}

#[pymethods]
impl Regressor {
    #[staticmethod]
    #[pyo3(signature = (rows, targets, names, seed=42, epochs=None, learning_rate=None,
                        hidden=None, dropout=None, l2_lambda=None, batch_size=None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        names: Vec<String>,
        seed: u64,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
        hidden: Option<Vec<usize>>,
        dropout: Option<f64>,
        l2_lambda: Option<f64>,
        batch_size: Option<usize>,
    ) -> PyResult<Regressor> {
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let hyper = hyper_from(epochs, learning_rate, hidden, dropout, l2_lambda, batch_size);
        let (inner, report) =
            model::train(&refs, &targets, &names, &hyper, seed).map_err(to_py)?;
        Ok(Regressor {
            inner,
            epoch_mse: report.epoch_mse,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Regressor> {
        Ok(Regressor {
            inner: model::load_model(&path).map_err(to_py)?,
            epoch_mse: Vec::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_model(&path, &self.inner).map_err(to_py)
    }

    fn predict(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&row).map_err(to_py)
    }

    fn predict_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        rows.iter()
            .map(|r| self.inner.predict(r).map_err(to_py))
            .collect()
    }

    #[getter]
    fn n_in(&self) -> usize {
        self.inner.n_in()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    /// Per-epoch training MSE on the standardized target scale; empty for
    /// a model restored with `load`.
    #[getter]
    fn epoch_mse(&self) -> Vec<f64> {
        self.epoch_mse.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Regressor({} -> {:?} -> 1)",
            self.inner.n_in(),
            self.inner.hyperparams.hidden
        )
    }
}

/// Generate a synthetic corpus and return the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, subjects=30, sessions=5, seed=42, noise_level=0.2))]
fn synth(
    out_dir: PathBuf,
    subjects: usize,
    sessions: usize,
    seed: u64,
    noise_level: f64,
) -> PyResult<String> {
    let spec = SynthSpec {
        n_subjects: subjects,
        sessions_per_subject: sessions,
        seed,
        noise_level,
    };
    generate_synthetic(&spec, &out_dir).map_err(to_py)?;
    Ok(out_dir.join("manifest.json").display().to_string())
}

/// Decode a 16 kHz mono WAV into (samples, sample_rate_hz).
#[pyfunction]
fn load_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let wave = signal_io::decode_wav(&path).map_err(to_py)?;
    Ok((wave.samples, wave.sample_rate_hz))
}

/// Run the full single-response feature pipeline. `question` is "Q1".."Q7"
/// and fixes the response kind (Q1 spontaneous, Q2-Q5 sentence, Q6-Q7
/// paragraph).
#[pyfunction]
fn extract_response(
    audio: PathBuf,
    transcript: PathBuf,
    question: &str,
    lexicons: PathBuf,
) -> PyResult<FeatureVector> {
    let q = QuestionId::from_str(question).map_err(PyValueError::new_err)?;
    let wave = signal_io::decode_wav(&audio).map_err(to_py)?;
    let t = load_transcript(&transcript).map_err(to_py)?;
    let lex = LexiconSet::load_dir(&lexicons).map_err(to_py)?;
    let out = features::extract_response(&wave, &t, q, q.expected_kind(), &lex).map_err(to_py)?;
    Ok(FeatureVector { inner: out.vector })
}

/// Concordance correlation coefficient.
#[pyfunction]
fn ccc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    eval::ccc(&x, &y).map_err(to_py)
}

/// Pearson correlation coefficient.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    selection::pearson(&x, &y).map_err(to_py)
}

/// Rank features by |r| against the targets and keep the strongest n,
/// returned as (name, r) pairs in non-increasing |r| order.
#[pyfunction]
fn select_top_n(
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    n: usize,
) -> PyResult<Vec<(String, f64)>> {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let entries = selection::select_top_n(&names, &refs, &targets, n).map_err(to_py)?;
    Ok(entries.into_iter().map(|e| (e.name, e.r)).collect())
}

/// Subject-independent k-fold cross-validation of the select-then-train
/// pipeline. Returns a dict with the pooled ccc, per-fold cccs, held-out
/// (prediction, target) pairs, the input row index behind each pair, and
/// the subject fold assignment.
#[pyfunction]
#[pyo3(signature = (subject_ids, rows, names, targets, k=5, n_select=None, seed=42,
                    fold_averaged=false, clip_range=None, epochs=None, learning_rate=None,
                    hidden=None, dropout=None, l2_lambda=None, batch_size=None))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    subject_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    names: Vec<String>,
    targets: Vec<f64>,
    k: usize,
    n_select: Option<usize>,
    seed: u64,
    fold_averaged: bool,
    clip_range: Option<(f64, f64)>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    hidden: Option<Vec<usize>>,
    dropout: Option<f64>,
    l2_lambda: Option<f64>,
    batch_size: Option<usize>,
) -> PyResult<Py<PyDict>> {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let cfg = CvConfig {
        k,
        n_select: n_select.unwrap_or(DEFAULT_N_SELECT),
        hyper: hyper_from(epochs, learning_rate, hidden, dropout, l2_lambda, batch_size),
        seed,
        fold_averaged,
        clip_range,
    };
    let out = eval::cross_validate(&subject_ids, &refs, &names, &targets, &cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("ccc", out.ccc)?;
    d.set_item("per_fold_ccc", out.per_fold_ccc)?;
    d.set_item("predictions", out.pairs)?;
    d.set_item("row_indices", out.row_indices)?;
    d.set_item("folds", out.folds)?;
    Ok(d.into())
}

/// Permutation p-value for a set of held-out (prediction, target) pairs.
#[pyfunction]
#[pyo3(signature = (preds, targets, n_perm=eval::DEFAULT_N_PERMUTATIONS, seed=42))]
fn permutation_p(preds: Vec<f64>, targets: Vec<f64>, n_perm: usize, seed: u64) -> PyResult<f64> {
    eval::permutation_p(&preds, &targets, n_perm, seed).map_err(to_py)
}

#[pymodule]
fn voicewell(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FeatureVector>()?;
    m.add_class::<Regressor>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(load_wav, m)?)?;
    m.add_function(wrap_pyfunction!(extract_response, m)?)?;
    m.add_function(wrap_pyfunction!(ccc, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(select_top_n, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_p, m)?)?;
    m.add("READ_DIM", READ_DIM)?;
    m.add("SPONTANEOUS_DIM", SPONTANEOUS_DIM)?;
    m.add("CONCATENATED_DIM", CONCATENATED_DIM)?;
    m.add("DEFAULT_N_SELECT", DEFAULT_N_SELECT)?;
    Ok(())
}
