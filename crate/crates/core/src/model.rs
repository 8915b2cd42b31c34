//! Fully connected regressor: n_in -> 256 x 4 -> 1 with ReLU hidden units,
//! trained with Adam on mean squared error plus an L2 weight penalty.
//!
//! Inputs are z-scored from training statistics. Targets are z-scored too,
//! so the loss scale is comparable across measurements with very different
//! ranges; `predict` maps back to the raw score scale. Dropout is the
//! inverted kind (surviving units scaled by 1/keep at train time), applied
//! to hidden activations only.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout: 0.5,
            l2_lambda: 1e-4,
            batch_size: 32,
            epochs: 100,
            hidden: vec![256, 256, 256, 256],
        }
    }
}

/// One dense layer. Weights are stored row-major by input unit:
/// `w[k * n_out + o]` connects input k to output o, so a forward pass is a
/// sum of scaled contiguous rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn he_uniform(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Layer {
        let limit = (6.0 / n_in as f64).sqrt();
        let mut w = vec![0.0; n_in * n_out];
        for v in w.iter_mut() {
            *v = rng.random_range(-limit..limit);
        }
        Layer {
            n_in,
            n_out,
            w,
            b: vec![0.0; n_out],
        }
    }

    /// z = W^T a + b
    fn affine(&self, a: &[f64], z: &mut Vec<f64>) {
        z.clear();
        z.extend_from_slice(&self.b);
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            let row = &self.w[k * self.n_out..(k + 1) * self.n_out];
            for (zo, &wk) in z.iter_mut().zip(row) {
                *zo += ak * wk;
            }
        }
    }
}

/// Per-dimension z-scoring statistics. Dimensions with (numerically) zero
/// variance get std 1 so they standardize to a constant instead of NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]], dim: usize) -> Standardizer {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        let mut scale = vec![0.0f64; dim];
        for row in rows {
            for j in 0..dim {
                mean[j] += row[j];
                scale[j] = scale[j].max(row[j].abs());
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        for row in rows {
            for j in 0..dim {
                let d = row[j] - mean[j];
                std[j] += d * d;
            }
        }
        for j in 0..dim {
            std[j] = (std[j] / n).sqrt();
            if std[j] <= 1e-12 * scale[j] || std[j] == 0.0 {
                std[j] = 1.0;
            }
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, raw: &[f64], out: &mut [f64]) {
        for j in 0..raw.len() {
            out[j] = (raw[j] - self.mean[j]) / self.std[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub layers: Vec<Layer>,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error per epoch on the standardized target scale,
    /// measured with dropout active (the training-time predictions).
    pub epoch_mse: Vec<f64>,
    pub seed: u64,
}

impl RegressorModel {
    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    /// Forward pass on an already standardized input, dropout off.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&a, &mut z);
            if l < last {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        Ok(a[0])
    }

    /// Standardize a raw feature vector, run the network, and map the
    /// output back to the raw target scale.
    pub fn predict(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                got: raw.len(),
            });
        }
        let mut x = vec![0.0; raw.len()];
        self.standardizer.apply(raw, &mut x);
        Ok(self.target_mean + self.target_std * self.forward(&x)?)
    }
}

/// Adam with bias correction; epsilon sits outside the square root.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], h: &Hyperparams, t: u64) {
        let bc1 = 1.0 - h.beta1.powi(t as i32);
        let bc2 = 1.0 - h.beta2.powi(t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * g;
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }
}

struct Scratch {
    /// acts[0] is the input; acts[l + 1] is layer l's output after its
    /// nonlinearity (and dropout, at train time).
    acts: Vec<Vec<f64>>,
    /// Pre-activations per layer, for the ReLU derivative.
    zs: Vec<Vec<f64>>,
    /// Dropout multiplier per hidden layer: 0.0 for dropped units,
    /// 1/keep for survivors.
    masks: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Scratch {
    fn new(sizes: &[usize]) -> Scratch {
        Scratch {
            acts: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            zs: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
            masks: sizes[1..sizes.len() - 1].iter().map(|&s| vec![1.0; s]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }
}

fn forward_train(
    layers: &[Layer],
    x: &[f64],
    dropout: f64,
    rng: &mut ChaCha8Rng,
    s: &mut Scratch,
) -> f64 {
    s.acts[0].copy_from_slice(x);
    let last = layers.len() - 1;
    let keep = 1.0 - dropout;
    for (l, layer) in layers.iter().enumerate() {
        let (head, tail) = s.acts.split_at_mut(l + 1);
        layer.affine(&head[l], &mut s.zs[l]);
        let out = &mut tail[0];
        out.clear();
        out.extend_from_slice(&s.zs[l]);
        if l < last {
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
            if dropout > 0.0 {
                for (v, m) in out.iter_mut().zip(s.masks[l].iter_mut()) {
                    *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    *v *= *m;
                }
            } else {
                for m in s.masks[l].iter_mut() {
                    *m = 1.0;
                }
            }
        }
    }
    s.acts[layers.len()][0]
}

/// Accumulate one sample's gradient of `out_grad * d(yhat)/d(params)` into
/// `gw`/`gb`, reusing the activations left in the scratch by the forward
/// pass.
fn backward(
    layers: &[Layer],
    out_grad: f64,
    s: &mut Scratch,
    gw: &mut [Vec<f64>],
    gb: &mut [Vec<f64>],
) {
    s.delta.clear();
    s.delta.push(out_grad);
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let a_in = &s.acts[l];
        for (k, &ak) in a_in.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            let grow = &mut gw[l][k * layer.n_out..(k + 1) * layer.n_out];
            for (g, &d) in grow.iter_mut().zip(&s.delta) {
                *g += ak * d;
            }
        }
        for (g, &d) in gb[l].iter_mut().zip(&s.delta) {
            *g += d;
        }
        if l > 0 {
            s.delta_prev.clear();
            for k in 0..layer.n_in {
                let row = &layer.w[k * layer.n_out..(k + 1) * layer.n_out];
                let mut d = 0.0;
                for (&wk, &dn) in row.iter().zip(&s.delta) {
                    d += wk * dn;
                }
                d *= s.masks[l - 1][k];
                if s.zs[l - 1][k] <= 0.0 {
                    d = 0.0;
                }
                s.delta_prev.push(d);
            }
            std::mem::swap(&mut s.delta, &mut s.delta_prev);
        }
    }
}

fn l2_norm_sq(layers: &[Layer]) -> f64 {
    layers.iter().map(|l| l.w.iter().map(|w| w * w).sum::<f64>()).sum()
}

/// Train a regressor. `rows` are raw (unstandardized) feature rows; their
/// width must match `feature_names`.
pub fn train(
    rows: &[&[f64]],
    targets: &[f64],
    feature_names: &[String],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<(RegressorModel, TrainReport)> {
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: targets.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::TooFewRows { need: 1, got: 0 });
    }
    let dim = feature_names.len();
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
    }

    let standardizer = Standardizer::fit(rows, dim);
    let n = rows.len();
    let mut x = vec![0.0; n * dim];
    for (i, row) in rows.iter().enumerate() {
        standardizer.apply(row, &mut x[i * dim..(i + 1) * dim]);
    }
    let target_mean = targets.iter().sum::<f64>() / n as f64;
    let target_var = targets.iter().map(|t| (t - target_mean).powi(2)).sum::<f64>() / n as f64;
    let scale = targets.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    let mut target_std = target_var.sqrt();
    if target_std <= 1e-12 * scale || target_std == 0.0 {
        target_std = 1.0;
    }
    let y: Vec<f64> = targets.iter().map(|t| (t - target_mean) / target_std).collect();

    let mut sizes = vec![dim];
    sizes.extend_from_slice(&hyper.hidden);
    sizes.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = sizes.len() - 2;
    let mut layers: Vec<Layer> = sizes
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            if l == head {
                // Zero-initialized scalar head: the net starts at the
                // standardized target mean instead of spending early updates
                // unlearning random output variance.
                Layer {
                    n_in: w[0],
                    n_out: w[1],
                    w: vec![0.0; w[0] * w[1]],
                    b: vec![0.0; w[1]],
                }
            } else {
                Layer::he_uniform(w[0], w[1], &mut rng)
            }
        })
        .collect();

    let mut adam_w: Vec<AdamState> = layers.iter().map(|l| AdamState::new(l.w.len())).collect();
    let mut adam_b: Vec<AdamState> = layers.iter().map(|l| AdamState::new(l.b.len())).collect();
    let mut gw: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
    let mut scratch = Scratch::new(&sizes);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_mse = Vec::with_capacity(hyper.epochs);
    let mut t = 0u64;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for (bi, batch) in order.chunks(hyper.batch_size).enumerate() {
            for g in gw.iter_mut().chain(gb.iter_mut()) {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            let inv_b = 1.0 / batch.len() as f64;
            let mut batch_sq = 0.0;
            for &i in batch {
                let yhat = forward_train(
                    &layers,
                    &x[i * dim..(i + 1) * dim],
                    hyper.dropout,
                    &mut rng,
                    &mut scratch,
                );
                let err = yhat - y[i];
                batch_sq += err * err;
                backward(&layers, 2.0 * err * inv_b, &mut scratch, &mut gw, &mut gb);
            }
            epoch_sq += batch_sq;
            let loss = batch_sq * inv_b + hyper.l2_lambda * l2_norm_sq(&layers);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: bi + 1,
                });
            }
            if hyper.l2_lambda > 0.0 {
                for (layer, g) in layers.iter().zip(gw.iter_mut()) {
                    for (gv, &wv) in g.iter_mut().zip(&layer.w) {
                        *gv += 2.0 * hyper.l2_lambda * wv;
                    }
                }
            }
            t += 1;
            for (l, layer) in layers.iter_mut().enumerate() {
                adam_w[l].step(&mut layer.w, &gw[l], hyper, t);
                adam_b[l].step(&mut layer.b, &gb[l], hyper, t);
            }
        }
        epoch_mse.push(epoch_sq / n as f64);
    }

    Ok((
        RegressorModel {
            layers,
            feature_names: feature_names.to_vec(),
            standardizer,
            target_mean,
            target_std,
            hyperparams: hyper.clone(),
            seed,
        },
        TrainReport { epoch_mse, seed },
    ))
}

/// Batch loss (MSE + L2 penalty) and its analytic gradients, dropout off.
/// Inputs are taken as already standardized.
fn batch_loss(layers: &[Layer], rows: &[&[f64]], targets: &[f64], lambda: f64) -> f64 {
    let sizes: Vec<usize> = std::iter::once(layers[0].n_in)
        .chain(layers.iter().map(|l| l.n_out))
        .collect();
    let mut s = Scratch::new(&sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sq = 0.0;
    for (row, &y) in rows.iter().zip(targets) {
        let yhat = forward_train(layers, row, 0.0, &mut rng, &mut s);
        sq += (yhat - y) * (yhat - y);
    }
    sq / rows.len() as f64 + lambda * l2_norm_sq(layers)
}

fn batch_gradients(
    layers: &[Layer],
    rows: &[&[f64]],
    targets: &[f64],
    lambda: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let sizes: Vec<usize> = std::iter::once(layers[0].n_in)
        .chain(layers.iter().map(|l| l.n_out))
        .collect();
    let mut s = Scratch::new(&sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut gw: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
    let mut gb: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
    let inv_b = 1.0 / rows.len() as f64;
    for (row, &y) in rows.iter().zip(targets) {
        let yhat = forward_train(layers, row, 0.0, &mut rng, &mut s);
        backward(layers, 2.0 * (yhat - y) * inv_b, &mut s, &mut gw, &mut gb);
    }
    if lambda > 0.0 {
        for (layer, g) in layers.iter().zip(gw.iter_mut()) {
            for (gv, &wv) in g.iter_mut().zip(&layer.w) {
                *gv += 2.0 * lambda * wv;
            }
        }
    }
    (gw, gb)
}

/// Compare analytic gradients against central finite differences on a
/// freshly initialized network and return the worst relative error.
/// Meant for small architectures; finite differences touch every
/// parameter twice.
pub fn gradient_check(
    hyper: &Hyperparams,
    rows: &[&[f64]],
    targets: &[f64],
    seed: u64,
) -> f64 {
    let dim = rows[0].len();
    let mut sizes = vec![dim];
    sizes.extend_from_slice(&hyper.hidden);
    sizes.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<Layer> = sizes
        .windows(2)
        .map(|w| Layer::he_uniform(w[0], w[1], &mut rng))
        .collect();

    let (gw, gb) = batch_gradients(&layers, rows, targets, hyper.l2_lambda);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, numeric: f64| {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    };
    for l in 0..layers.len() {
        for i in 0..layers[l].w.len() {
            let orig = layers[l].w[i];
            layers[l].w[i] = orig + h;
            let up = batch_loss(&layers, rows, targets, hyper.l2_lambda);
            layers[l].w[i] = orig - h;
            let down = batch_loss(&layers, rows, targets, hyper.l2_lambda);
            layers[l].w[i] = orig;
            check(gw[l][i], (up - down) / (2.0 * h));
        }
        for i in 0..layers[l].b.len() {
            let orig = layers[l].b[i];
            layers[l].b[i] = orig + h;
            let up = batch_loss(&layers, rows, targets, hyper.l2_lambda);
            layers[l].b[i] = orig - h;
            let down = batch_loss(&layers, rows, targets, hyper.l2_lambda);
            layers[l].b[i] = orig;
            check(gb[l][i], (up - down) / (2.0 * h));
        }
    }
    worst
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: RegressorModel,
}

pub fn save_model(path: &Path, model: &RegressorModel) -> Result<()> {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string(&file).expect("model serializes");
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: &Path) -> Result<RegressorModel> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let file: ModelFile = serde_json::from_str(&raw).map_err(|e| Error::MalformedCache {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if file.version != MODEL_FILE_VERSION {
        return Err(Error::MalformedCache {
            path: path.to_path_buf(),
            reason: format!(
                "unsupported model version {} (expected {MODEL_FILE_VERSION})",
                file.version
            ),
        });
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    fn small_hyper() -> Hyperparams {
        Hyperparams {
            hidden: vec![4],
            dropout: 0.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn adam_single_step_matches_hand_calc() {
        let h = Hyperparams::default();
        let mut params = [1.0];
        let mut adam = AdamState::new(1);
        // f(w) = w^2, so the gradient at w = 1 is 2.
        adam.step(&mut params, &[2.0], &h, 1);
        let want = 1.0 - 1e-4 * (2.0 / (2.0 + 1e-8));
        assert!((params[0] - want).abs() < 1e-15, "{} vs {want}", params[0]);
    }

    #[test]
    fn hand_built_two_two_one_network_forward() {
        let model = RegressorModel {
            layers: vec![
                Layer {
                    n_in: 2,
                    n_out: 2,
                    w: vec![1.0, 0.5, -1.0, 2.0],
                    b: vec![0.5, -1.0],
                },
                Layer {
                    n_in: 2,
                    n_out: 1,
                    w: vec![2.0, 3.0],
                    b: vec![0.25],
                },
            ],
            feature_names: toy_names(2),
            standardizer: Standardizer {
                mean: vec![0.0, 0.0],
                std: vec![1.0, 1.0],
            },
            target_mean: 0.0,
            target_std: 1.0,
            hyperparams: Hyperparams::default(),
            seed: 0,
        };
        // z1 = [1*1 + (-2)*(-1) + 0.5, 1*0.5 + (-2)*2 - 1] = [3.5, -4.5]
        // relu -> [3.5, 0]; out = 3.5*2 + 0*3 + 0.25 = 7.25
        assert_eq!(model.forward(&[1.0, -2.0]).unwrap(), 7.25);
        assert_eq!(model.predict(&[1.0, -2.0]).unwrap(), 7.25);
        assert!(matches!(
            model.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn zero_weights_output_zero() {
        let model = RegressorModel {
            layers: vec![
                Layer {
                    n_in: 3,
                    n_out: 2,
                    w: vec![0.0; 6],
                    b: vec![0.0; 2],
                },
                Layer {
                    n_in: 2,
                    n_out: 1,
                    w: vec![0.0; 2],
                    b: vec![0.0],
                },
            ],
            feature_names: toy_names(3),
            standardizer: Standardizer {
                mean: vec![0.0; 3],
                std: vec![1.0; 3],
            },
            target_mean: 0.0,
            target_std: 1.0,
            hyperparams: Hyperparams::default(),
            seed: 0,
        };
        assert_eq!(model.forward(&[0.3, -1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_check_passes_on_small_network() {
        let hyper = Hyperparams {
            hidden: vec![4],
            ..Hyperparams::default()
        };
        let rows_data: Vec<[f64; 5]> = (0..8)
            .map(|i| {
                let t = i as f64;
                [
                    (t * 0.7).sin(),
                    (t * 1.3).cos(),
                    0.1 * t - 0.4,
                    (t * 0.31).sin() * 0.5,
                    1.0 - 0.2 * t,
                ]
            })
            .collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (0..8).map(|i| ((i as f64) * 0.9).sin()).collect();
        let worst = gradient_check(&hyper, &rows, &targets, 11);
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn zero_inputs_leave_first_layer_weight_grads_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layers = vec![
            Layer::he_uniform(3, 4, &mut rng),
            Layer::he_uniform(4, 1, &mut rng),
        ];
        let row = [0.0; 3];
        let rows: Vec<&[f64]> = vec![&row, &row];
        let (gw, gb) = batch_gradients(&layers, &rows, &[1.0, 2.0], 0.0);
        assert!(gw[0].iter().all(|&g| g == 0.0));
        // Bias gradients still flow.
        assert!(gb[0].iter().any(|&g| g != 0.0) || gb[1].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn duplicated_sample_gradient_equals_single_sample_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layers = vec![
            Layer::he_uniform(4, 3, &mut rng),
            Layer::he_uniform(3, 1, &mut rng),
        ];
        let row = [0.4, -0.2, 1.1, 0.9];
        let one: Vec<&[f64]> = vec![&row];
        let two: Vec<&[f64]> = vec![&row, &row];
        let (gw1, gb1) = batch_gradients(&layers, &one, &[2.0], 0.0);
        let (gw2, gb2) = batch_gradients(&layers, &two, &[2.0, 2.0], 0.0);
        assert_eq!(gw1, gw2);
        assert_eq!(gb1, gb2);
    }

    #[test]
    fn constant_targets_converge_to_the_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows_data: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0f64..1.0)).collect())
            .collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets = vec![3.0; 16];
        // The default rate barely moves 16 samples in 100 epochs; crank it.
        let hyper = Hyperparams {
            learning_rate: 1e-2,
            ..small_hyper()
        };
        let (model, report) = train(&rows, &targets, &toy_names(6), &hyper, 7).unwrap();
        assert_eq!(report.epoch_mse.len(), 100);
        assert!(report.epoch_mse[99] < 0.1, "mse {}", report.epoch_mse[99]);
        let p = model.predict(&rows_data[0]).unwrap();
        assert!((p - 3.0).abs() < 0.5, "predicted {p}");
    }

    #[test]
    fn linear_map_is_recovered_without_regularization() {
        let rows_data: Vec<[f64; 1]> = (1..=10).map(|i| [i as f64]).collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
        let hyper = Hyperparams {
            learning_rate: 0.01,
            dropout: 0.0,
            l2_lambda: 0.0,
            epochs: 800,
            hidden: vec![16],
            ..Hyperparams::default()
        };
        let (model, report) = train(&rows, &targets, &toy_names(1), &hyper, 3).unwrap();
        for (row, &want) in rows_data.iter().zip(&targets) {
            let p = model.predict(row).unwrap();
            assert!((p - want).abs() <= 0.1 * want, "f({}) = {p}, want {want}", row[0]);
        }
        // Loss trends down overall; Adam at this rate wobbles epoch to epoch.
        let violations = report
            .epoch_mse
            .windows(2)
            .filter(|w| w[1] > w[0] + 1e-12)
            .count();
        assert!(
            violations * 10 <= report.epoch_mse.len(),
            "{violations} increasing epochs out of {}",
            report.epoch_mse.len()
        );
        let (first, last) = (report.epoch_mse[0], *report.epoch_mse.last().unwrap());
        assert!(last < 0.05 * first, "mse went {first} -> {last}");
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows_data: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0f64..1.0)).collect())
            .collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
        let hyper = Hyperparams {
            hidden: vec![8, 8],
            ..Hyperparams::default()
        };
        let (m1, r1) = train(&rows, &targets, &toy_names(5), &hyper, 42).unwrap();
        let (m2, r2) = train(&rows, &targets, &toy_names(5), &hyper, 42).unwrap();
        assert_eq!(r1.epoch_mse.len(), 100, "one entry per default epoch");
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        let (m3, _) = train(&rows, &targets, &toy_names(5), &hyper, 43).unwrap();
        assert_ne!(m1.layers[0].w, m3.layers[0].w);
    }

    #[test]
    fn runaway_learning_rate_reports_non_finite_loss() {
        let rows_data: Vec<[f64; 2]> = (0..8).map(|i| [i as f64, 1.0 - i as f64]).collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let hyper = Hyperparams {
            learning_rate: f64::INFINITY,
            dropout: 0.0,
            hidden: vec![4],
            ..Hyperparams::default()
        };
        match train(&rows, &targets, &toy_names(2), &hyper, 1) {
            Err(Error::NonFiniteLoss { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn zero_variance_feature_standardizes_with_unit_std() {
        let rows_data = [[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let s = Standardizer::fit(&rows, 2);
        assert_eq!(s.std[1], 1.0);
        assert_eq!(s.mean[1], 5.0);
        let mut out = [0.0; 2];
        s.apply(&[2.0, 5.0], &mut out);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn model_file_round_trips_and_rejects_bad_versions() {
        let rows_data: Vec<[f64; 3]> = (0..6)
            .map(|i| [i as f64, (i as f64).sin(), 2.0 - i as f64])
            .collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (0..6).map(|i| 0.5 * i as f64).collect();
        let (model, _) = train(&rows, &targets, &toy_names(3), &small_hyper(), 14).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(
            loaded.predict(&rows_data[2]).unwrap(),
            model.predict(&rows_data[2]).unwrap()
        );

        let raw = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, raw.replace("\"version\":1", "\"version\":9")).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::MalformedCache { .. })
        ));
    }

    #[test]
    fn dropout_draws_do_not_change_inference() {
        let rows_data: Vec<[f64; 2]> = (0..12).map(|i| [(i as f64).sin(), (i as f64).cos()]).collect();
        let rows: Vec<&[f64]> = rows_data.iter().map(|r| r.as_slice()).collect();
        let targets: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let hyper = Hyperparams {
            hidden: vec![6],
            ..Hyperparams::default()
        };
        let (model, _) = train(&rows, &targets, &toy_names(2), &hyper, 8).unwrap();
        let a = model.predict(&rows_data[3]).unwrap();
        let b = model.predict(&rows_data[3]).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
    }
}
