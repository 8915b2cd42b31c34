//! Prosodic descriptors: pitch, voicing, energy, and spectral shape.
//!
//! f0 comes from the normalized autocorrelation of the raw frame over lags
//! covering 60-400 Hz, with a decimated coarse pass for speed, full-rate
//! refinement with parabolic interpolation, and an octave guard that takes
//! the smallest lag among peaks within 90% of the best one. A frame is
//! voiced when the refined peak reaches 0.45.

use crate::signal_io::{FrameStream, CANONICAL_RATE, FRAME_LEN};

use super::fft::N_BINS;

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 400.0;
pub const VOICING_THRESHOLD: f64 = 0.45;
pub const LOG_FLOOR: f64 = 1e-10;

/// Inclusive full-rate lag bounds for the 60-400 Hz search range.
const LAG_MIN: usize = 40; // 16000 / 400
const LAG_MAX: usize = 266; // floor(16000 / 60)
const DECIMATION: usize = 4;
/// Coarse peaks below this cannot reach the voicing threshold after
/// refinement (decimation can underestimate a true peak by < 0.1).
const COARSE_FLOOR: f64 = 0.35;
const SILENCE_POWER: f64 = 1e-9;

pub const N_PROSODY: usize = 8;

/// Per-frame pitch track shared by prosody and voice-quality extractors.
pub struct F0Track {
    /// 0 for unvoiced frames, otherwise in [60, 400].
    pub f0_hz: Vec<f64>,
    /// Refined normalized autocorrelation peak clamped to [0, 1].
    pub voicing: Vec<f64>,
    /// Interpolated peak lag in samples (0 when unvoiced).
    pub peak_lag: Vec<f64>,
}

impl F0Track {
    pub fn is_voiced(&self, i: usize) -> bool {
        self.f0_hz[i] > 0.0
    }
}

/// Normalized autocorrelation of `x` at integer lag `tau` using prefix sums
/// of squared samples for the shrinking-overlap normalization.
fn norm_autocorr(x: &[f64], sq_prefix: &[f64], tau: usize) -> f64 {
    let n = x.len();
    if tau >= n {
        return 0.0;
    }
    let overlap = n - tau;
    let mut cross = 0.0;
    for i in 0..overlap {
        cross += x[i] * x[i + tau];
    }
    let e1 = sq_prefix[overlap];
    let e2 = sq_prefix[n] - sq_prefix[tau];
    let denom = (e1 * e2).sqrt();
    if denom > 1e-20 {
        cross / denom
    } else {
        0.0
    }
}

fn sq_prefix(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v * v;
        out.push(acc);
    }
}

/// Parabolic vertex through (-1, ym), (0, y0), (1, yp): offset and value.
pub(crate) fn parabolic_refine(ym: f64, y0: f64, yp: f64) -> (f64, f64) {
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-20 {
        return (0.0, y0);
    }
    let delta = (0.5 * (ym - yp) / denom).clamp(-1.0, 1.0);
    (delta, y0 - 0.25 * (ym - yp) * delta)
}

struct FramePitch {
    f0_hz: f64,
    voicing: f64,
    peak_lag: f64,
}

fn analyze_frame(x: &[f64], scratch: &mut PitchScratch) -> FramePitch {
    let unvoiced = |voicing: f64| FramePitch {
        f0_hz: 0.0,
        voicing: voicing.clamp(0.0, 1.0),
        peak_lag: 0.0,
    };

    let n = x.len();
    sq_prefix(x, &mut scratch.sq);
    if scratch.sq[n] / n as f64 <= SILENCE_POWER {
        return unvoiced(0.0);
    }

    // Coarse pass on 4x block means; the averaging doubles as a crude
    // anti-alias filter so high harmonics do not smear the coarse peaks.
    scratch.decimated.clear();
    scratch.decimated.extend(
        x.chunks_exact(DECIMATION)
            .map(|c| c.iter().sum::<f64>() / DECIMATION as f64),
    );
    sq_prefix(&scratch.decimated, &mut scratch.sq_dec);
    let coarse_lo = LAG_MIN / DECIMATION;
    let coarse_hi = LAG_MAX / DECIMATION + 1;
    scratch.coarse.clear();
    for tau in coarse_lo.saturating_sub(1)..=coarse_hi + 1 {
        scratch
            .coarse
            .push(norm_autocorr(&scratch.decimated, &scratch.sq_dec, tau));
    }
    let offset = coarse_lo.saturating_sub(1);
    let mut best_coarse = f64::MIN;
    let mut candidates: Vec<usize> = Vec::new();
    for i in 1..scratch.coarse.len() - 1 {
        let tau = offset + i;
        if tau < coarse_lo || tau > coarse_hi {
            continue;
        }
        let (ym, y0, yp) = (
            scratch.coarse[i - 1],
            scratch.coarse[i],
            scratch.coarse[i + 1],
        );
        if y0 >= ym && y0 >= yp {
            candidates.push(tau);
            best_coarse = best_coarse.max(y0);
        }
    }
    if best_coarse < COARSE_FLOOR {
        return unvoiced(best_coarse.max(0.0));
    }
    candidates.retain(|&tau| {
        scratch.coarse[tau - offset] >= (0.8 * best_coarse).max(COARSE_FLOOR - 0.05)
    });

    // Refine at full rate around each coarse candidate and around its half
    // lag, which rescues octave-low coarse peaks.
    let mut centers: Vec<usize> = Vec::with_capacity(2 * candidates.len());
    for &tau_c in &candidates {
        let c = tau_c * DECIMATION;
        centers.push(c);
        if c / 2 >= LAG_MIN {
            centers.push(c / 2);
        }
    }
    centers.sort_unstable();
    centers.dedup();
    let mut refined: Vec<(f64, f64)> = Vec::new(); // (lag, value)
    let mut max_fine = 0.0f64;
    for &center in &centers {
        let lo = center.saturating_sub(DECIMATION + 2).max(LAG_MIN);
        let hi = (center + DECIMATION + 2).min(LAG_MAX);
        if lo > hi {
            continue;
        }
        scratch.fine.clear();
        for tau in lo - 1..=hi + 1 {
            let v = norm_autocorr(x, &scratch.sq, tau);
            max_fine = max_fine.max(v);
            scratch.fine.push(v);
        }
        for i in 1..scratch.fine.len() - 1 {
            let (ym, y0, yp) = (
                scratch.fine[i - 1],
                scratch.fine[i],
                scratch.fine[i + 1],
            );
            if y0 >= ym && y0 >= yp {
                let (delta, value) = parabolic_refine(ym, y0, yp);
                refined.push(((lo - 1 + i) as f64 + delta, value));
            }
        }
    }
    if refined.is_empty() {
        // The coarse peak did not survive full-rate inspection; report what
        // the fine windows actually measured.
        return unvoiced(max_fine);
    }

    let best = refined
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::MIN, f64::max);
    if best < VOICING_THRESHOLD {
        return unvoiced(best);
    }
    // Octave guard: smallest lag among peaks within 90% of the best.
    let (lag, value) = refined
        .iter()
        .filter(|&&(_, v)| v >= 0.9 * best)
        .fold((f64::MAX, 0.0), |(bl, bv), &(l, v)| {
            if l < bl {
                (l, v)
            } else {
                (bl, bv)
            }
        });
    FramePitch {
        f0_hz: (CANONICAL_RATE as f64 / lag).clamp(F0_MIN_HZ, F0_MAX_HZ),
        voicing: value.clamp(0.0, 1.0),
        peak_lag: lag,
    }
}

struct PitchScratch {
    sq: Vec<f64>,
    decimated: Vec<f64>,
    sq_dec: Vec<f64>,
    coarse: Vec<f64>,
    fine: Vec<f64>,
}

impl PitchScratch {
    fn new() -> Self {
        PitchScratch {
            sq: Vec::with_capacity(FRAME_LEN + 1),
            decimated: Vec::with_capacity(FRAME_LEN / DECIMATION + 1),
            sq_dec: Vec::with_capacity(FRAME_LEN / DECIMATION + 2),
            coarse: Vec::new(),
            fine: Vec::new(),
        }
    }
}

/// Pitch and voicing for every frame.
pub fn f0_track(frames: &FrameStream) -> F0Track {
    let mut scratch = PitchScratch::new();
    let n = frames.len();
    let mut track = F0Track {
        f0_hz: Vec::with_capacity(n),
        voicing: Vec::with_capacity(n),
        peak_lag: Vec::with_capacity(n),
    };
    for i in 0..n {
        let p = analyze_frame(frames.raw(i), &mut scratch);
        track.f0_hz.push(p.f0_hz);
        track.voicing.push(p.voicing);
        track.peak_lag.push(p.peak_lag);
    }
    track
}

/// The eight prosody descriptors for frame `i`:
/// [log_energy, f0, voicing, zcr, centroid, flux, rolloff, loudness].
/// `magnitude` is the plain windowed spectrum; `prev_magnitude` feeds flux.
pub fn descriptors(
    raw: &[f64],
    magnitude: &[f64],
    prev_magnitude: Option<&[f64]>,
    f0_hz: f64,
    voicing: f64,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), N_PROSODY);
    debug_assert_eq!(magnitude.len(), N_BINS);
    let energy: f64 = raw.iter().map(|&v| v * v).sum();
    let log_energy = energy.max(LOG_FLOOR).ln();
    let loudness = energy.powf(0.3);

    let crossings = raw
        .windows(2)
        .filter(|w| w[0] * w[1] < 0.0)
        .count();
    let zcr = crossings as f64 / (raw.len() - 1) as f64;

    let bin_hz = CANONICAL_RATE as f64 / (2 * (N_BINS - 1)) as f64;
    let total_mag: f64 = magnitude.iter().sum();
    let centroid = if total_mag > 0.0 {
        magnitude
            .iter()
            .enumerate()
            .map(|(k, &m)| k as f64 * bin_hz * m)
            .sum::<f64>()
            / total_mag
    } else {
        0.0
    };

    let flux = match prev_magnitude {
        Some(prev) => magnitude
            .iter()
            .zip(prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        None => 0.0,
    };

    let total_power: f64 = magnitude.iter().map(|&m| m * m).sum();
    let rolloff = if total_power > 0.0 {
        let target = 0.95 * total_power;
        let mut acc = 0.0;
        let mut bin = N_BINS - 1;
        for (k, &m) in magnitude.iter().enumerate() {
            acc += m * m;
            if acc >= target {
                bin = k;
                break;
            }
        }
        bin as f64 * bin_hz
    } else {
        0.0
    };

    out[0] = log_energy;
    out[1] = f0_hz;
    out[2] = voicing;
    out[3] = zcr;
    out[4] = centroid;
    out[5] = flux;
    out[6] = rolloff;
    out[7] = loudness;
}
