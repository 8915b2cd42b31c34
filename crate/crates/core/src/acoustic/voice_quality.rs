//! Voice-quality descriptors: jitter, shimmer, HNR, spectral tilt, and CPP.
//!
//! Jitter and shimmer come from cycle marks placed on a short span of raw
//! audio around the frame (up to two voiced neighbors on each side, stitched
//! at the 160-sample hop). Peaks are found period by period and refined with
//! a parabola, then the usual local and three-point perturbation measures
//! are taken. Unvoiced frames get zeros for all seven descriptors.

use crate::signal_io::{FrameStream, FRAME_LEN, HOP};

use super::fft::{N_BINS, N_FFT_CEPSTRUM};
use super::prosody::{parabolic_refine, F0Track};

pub const N_VOICE_QUALITY: usize = 7;

/// Quefrency range matching the 60-400 Hz pitch search.
const QUEFRENCY_MIN: usize = 40;
const QUEFRENCY_MAX: usize = 266;

const HNR_MIN_DB: f64 = -20.0;
const HNR_MAX_DB: f64 = 40.0;

/// Harmonics-to-noise ratio from the normalized autocorrelation peak:
/// 10*log10(r / (1 - r)), clamped to [-20, 40] dB.
pub fn hnr_db(r: f64) -> f64 {
    if r <= 0.0 {
        return HNR_MIN_DB;
    }
    if r >= 1.0 {
        return HNR_MAX_DB;
    }
    (10.0 * (r / (1.0 - r)).log10()).clamp(HNR_MIN_DB, HNR_MAX_DB)
}

/// Least-squares slope of dB magnitude against frequency in kHz, DC skipped.
pub fn spectral_tilt(magnitude: &[f64]) -> f64 {
    debug_assert_eq!(magnitude.len(), N_BINS);
    let bin_khz = 16.0 / (2.0 * (N_BINS - 1) as f64);
    let pts = (1..N_BINS).map(|k| (k as f64 * bin_khz, 20.0 * (magnitude[k] + 1e-10).log10()));
    lsq_line(pts).0
}

/// Cepstral peak prominence: height of the rahmonic peak in [40, 266] above
/// the least-squares trend line fitted over that same quefrency range.
pub fn cpp(cepstrum: &[f64]) -> f64 {
    debug_assert_eq!(cepstrum.len(), N_FFT_CEPSTRUM);
    let mut q_star = QUEFRENCY_MIN;
    for q in QUEFRENCY_MIN..=QUEFRENCY_MAX {
        if cepstrum[q] > cepstrum[q_star] {
            q_star = q;
        }
    }
    let pts = (QUEFRENCY_MIN..=QUEFRENCY_MAX).map(|q| (q as f64, cepstrum[q]));
    let (slope, intercept) = lsq_line(pts);
    cepstrum[q_star] - (intercept + slope * q_star as f64)
}

fn lsq_line(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-20 {
        return (0.0, if n > 0.0 { sy / n } else { 0.0 });
    }
    let slope = (n * sxy - sx * sy) / denom;
    ((slope), (sy - slope * sx) / n)
}

/// Raw samples of the contiguous voiced run around frame `i`, at most two
/// frames on each side. Consecutive frames overlap by 240 samples, so each
/// frame past the first contributes only its final hop.
fn build_span(frames: &FrameStream, track: &F0Track, i: usize) -> Vec<f64> {
    let mut first = i;
    while first > 0 && first + 2 > i && track.is_voiced(first - 1) {
        first -= 1;
    }
    let mut last = i;
    let cap = (i + 2).min(frames.len() - 1);
    while last < cap && track.is_voiced(last + 1) {
        last += 1;
    }
    let mut span = Vec::with_capacity(FRAME_LEN + HOP * (last - first));
    span.extend_from_slice(frames.raw(first));
    for j in first + 1..=last {
        span.extend_from_slice(&frames.raw(j)[FRAME_LEN - HOP..]);
    }
    span
}

/// Period-by-period peak marks: the first peak is the maximum within one
/// period of the span start, each next one the maximum in [p + 0.75T,
/// p + 1.25T]. Marking stops once the best candidate drops below a quarter
/// of the previous peak, which is where the span runs out of pulses.
/// Positions and amplitudes are parabolically refined.
fn pick_cycles(span: &[f64], t: f64) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    if t < 2.0 || span.is_empty() {
        return peaks;
    }
    let argmax = |lo: usize, hi: usize| -> usize {
        let mut best = lo;
        for k in lo..hi {
            if span[k] > span[best] {
                best = k;
            }
        }
        best
    };
    let refine = |q: usize| -> (f64, f64) {
        if q == 0 || q + 1 >= span.len() {
            return (q as f64, span[q]);
        }
        let (delta, amp) = parabolic_refine(span[q - 1], span[q], span[q + 1]);
        (q as f64 + delta, amp)
    };

    let mut p = argmax(0, (t.ceil() as usize + 1).min(span.len()));
    let mut ref_amp = span[p].abs();
    peaks.push(refine(p));
    loop {
        let lo = (p as f64 + 0.75 * t).ceil() as usize;
        let hi = ((p as f64 + 1.25 * t).floor() as usize).min(span.len() - 1);
        if lo > hi {
            break;
        }
        let q = argmax(lo, hi + 1);
        if span[q].abs() < 0.25 * ref_amp {
            break;
        }
        p = q;
        ref_amp = span[q].abs();
        peaks.push(refine(q));
    }
    peaks
}

/// [jitter_local, jitter_rap, shimmer_local, shimmer_apq3] from refined
/// cycle marks; zeros unless at least three full periods are available.
fn cycle_stats(peaks: &[(f64, f64)]) -> [f64; 4] {
    if peaks.len() < 4 {
        return [0.0; 4];
    }
    let periods: Vec<f64> = peaks.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let amps: Vec<f64> = peaks.iter().map(|&(_, a)| a).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_abs_diff = |v: &[f64]| {
        v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64
    };
    let mean_abs_dev3 = |v: &[f64]| {
        (1..v.len() - 1)
            .map(|k| (v[k] - (v[k - 1] + v[k] + v[k + 1]) / 3.0).abs())
            .sum::<f64>()
            / (v.len() - 2) as f64
    };

    let mean_period = mean(&periods);
    let (jitter_local, jitter_rap) = if mean_period > 0.0 {
        (
            mean_abs_diff(&periods) / mean_period,
            mean_abs_dev3(&periods) / mean_period,
        )
    } else {
        (0.0, 0.0)
    };

    let mean_amp = amps.iter().map(|a| a.abs()).sum::<f64>() / amps.len() as f64;
    let (shimmer_local, shimmer_apq3) = if mean_amp > 1e-12 {
        (
            mean_abs_diff(&amps) / mean_amp,
            mean_abs_dev3(&amps) / mean_amp,
        )
    } else {
        (0.0, 0.0)
    };

    [jitter_local, jitter_rap, shimmer_local, shimmer_apq3]
}

/// The seven voice-quality descriptors for frame `i`:
/// [jitter_local, jitter_rap, shimmer_local, shimmer_apq3, hnr,
/// spectral_tilt, cpp]. `magnitude` and `cepstrum` are computed from the
/// plain windowed frame; both are only read when the frame is voiced.
pub fn descriptors(
    frames: &FrameStream,
    track: &F0Track,
    i: usize,
    magnitude: &[f64],
    cepstrum: &[f64],
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), N_VOICE_QUALITY);
    if !track.is_voiced(i) {
        out.fill(0.0);
        return;
    }
    let span = build_span(frames, track, i);
    let peaks = pick_cycles(&span, track.peak_lag[i]);
    let stats = cycle_stats(&peaks);
    out[..4].copy_from_slice(&stats);
    out[4] = hnr_db(track.voicing[i]);
    out[5] = spectral_tilt(magnitude);
    out[6] = cpp(cepstrum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::{frame, Waveform, CANONICAL_RATE, DEFAULT_PRE_EMPHASIS};

    /// Hann bumps of the given amplitudes at the given sample positions.
    fn pulse_train(n: usize, positions: &[usize], amps: &[f64]) -> Vec<f64> {
        let radius = 10usize;
        let mut x = vec![0.0; n];
        for (&p, &a) in positions.iter().zip(amps) {
            for d in 0..=2 * radius {
                let idx = p + d;
                if idx < radius || idx - radius >= n {
                    continue;
                }
                let phase = d as f64 / (2 * radius) as f64;
                x[idx - radius] +=
                    a * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos());
            }
        }
        x
    }

    fn manual_track(n_frames: usize, lag: f64) -> F0Track {
        F0Track {
            f0_hz: vec![CANONICAL_RATE as f64 / lag; n_frames],
            voicing: vec![0.9; n_frames],
            peak_lag: vec![lag; n_frames],
        }
    }

    fn analyze_frame_5(samples: Vec<f64>, lag: f64) -> [f64; 4] {
        let w = Waveform::new(samples, CANONICAL_RATE);
        let fs = frame(&w, DEFAULT_PRE_EMPHASIS).unwrap();
        let track = manual_track(fs.len(), lag);
        let span = build_span(&fs, &track, 5);
        cycle_stats(&pick_cycles(&span, lag))
    }

    #[test]
    fn alternating_periods_give_known_jitter() {
        // Pulses with periods alternating 76 / 84 samples: jitter_local is
        // 8/80 = 0.1 and rap is (16/3)/80 = 1/15.
        let mut positions = vec![10usize];
        let mut step = 76;
        while *positions.last().unwrap() + step < 16_000 {
            positions.push(positions.last().unwrap() + step);
            step = if step == 76 { 84 } else { 76 };
        }
        let amps = vec![1.0; positions.len()];
        let stats = analyze_frame_5(pulse_train(16_000, &positions, &amps), 80.0);
        assert!((stats[0] - 0.1).abs() < 0.01, "jitter_local {}", stats[0]);
        assert!(
            (stats[1] - 1.0 / 15.0).abs() < 0.01,
            "jitter_rap {}",
            stats[1]
        );
        assert!(stats[2] < 0.02, "shimmer_local {}", stats[2]);
    }

    #[test]
    fn alternating_amplitudes_give_known_shimmer() {
        // Constant period 80, amplitudes alternating 1.0 / 0.8:
        // shimmer_local = 0.2/0.9 = 2/9, apq3 = (2/15)/0.9 = 4/27.
        let positions: Vec<usize> = (0..199).map(|k| 10 + 80 * k).collect();
        let amps: Vec<f64> = (0..199)
            .map(|k| if k % 2 == 0 { 1.0 } else { 0.8 })
            .collect();
        let stats = analyze_frame_5(pulse_train(16_000, &positions, &amps), 80.0);
        assert!(stats[0] < 0.01, "jitter_local {}", stats[0]);
        assert!(
            (stats[2] - 2.0 / 9.0).abs() < 0.01,
            "shimmer_local {}",
            stats[2]
        );
        assert!(
            (stats[3] - 4.0 / 27.0).abs() < 0.01,
            "shimmer_apq3 {}",
            stats[3]
        );
    }

    #[test]
    fn steady_train_has_negligible_perturbation() {
        let positions: Vec<usize> = (0..199).map(|k| 10 + 80 * k).collect();
        let amps = vec![0.7; positions.len()];
        let stats = analyze_frame_5(pulse_train(16_000, &positions, &amps), 80.0);
        for (k, &v) in stats.iter().enumerate() {
            assert!(v.abs() < 1e-3, "stat {k} = {v}");
        }
    }

    #[test]
    fn hnr_map_hits_known_points() {
        assert_eq!(hnr_db(0.5), 0.0);
        assert!((hnr_db(0.9) - 10.0 * 9.0f64.log10()).abs() < 1e-12);
        assert_eq!(hnr_db(1.0), 40.0);
        assert_eq!(hnr_db(1.5), 40.0);
        assert_eq!(hnr_db(0.0), -20.0);
        assert_eq!(hnr_db(-0.3), -20.0);
    }

    #[test]
    fn pure_sine_is_highly_harmonic() {
        let samples: Vec<f64> = (0..16_000)
            .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 16_000.0).sin())
            .collect();
        let w = Waveform::new(samples, CANONICAL_RATE);
        let fs = frame(&w, DEFAULT_PRE_EMPHASIS).unwrap();
        let track = super::super::prosody::f0_track(&fs);
        let mid = fs.len() / 2;
        assert!(track.is_voiced(mid));
        assert!(
            hnr_db(track.voicing[mid]) >= 35.0,
            "sine hnr {}",
            hnr_db(track.voicing[mid])
        );
    }

    #[test]
    fn flat_spectrum_has_zero_tilt_and_sloped_one_matches() {
        let flat = vec![0.25; N_BINS];
        assert!(spectral_tilt(&flat).abs() < 1e-9);

        let bin_khz = 16.0 / 512.0;
        let sloped: Vec<f64> = (0..N_BINS)
            .map(|k| 10f64.powf(-6.0 * k as f64 * bin_khz / 20.0))
            .collect();
        assert!(
            (spectral_tilt(&sloped) + 6.0).abs() < 0.01,
            "tilt {}",
            spectral_tilt(&sloped)
        );
    }

    #[test]
    fn cpp_measures_peak_above_trend() {
        let mut c = vec![0.0; N_FFT_CEPSTRUM];
        for (q, v) in c.iter_mut().enumerate() {
            *v = 0.5 - 0.001 * q as f64;
        }
        c[120] += 3.0;
        let got = cpp(&c);
        assert!((got - 3.0).abs() < 0.05, "cpp {got}");
    }

    #[test]
    fn unvoiced_frame_yields_zeros() {
        let samples = vec![0.0; 16_000];
        let w = Waveform::new(samples, CANONICAL_RATE);
        let fs = frame(&w, DEFAULT_PRE_EMPHASIS).unwrap();
        let track = super::super::prosody::f0_track(&fs);
        let mag = vec![1.0; N_BINS];
        let cep = vec![1.0; N_FFT_CEPSTRUM];
        let mut out = [9.9; N_VOICE_QUALITY];
        descriptors(&fs, &track, 3, &mag, &cep, &mut out);
        assert_eq!(out, [0.0; N_VOICE_QUALITY]);
    }
}
