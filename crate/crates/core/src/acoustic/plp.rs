//! Perceptual linear prediction cepstra.
//!
//! Power spectrum -> 17 Bark-spaced critical-band filters -> equal-loudness
//! weighting -> cube-root intensity-loudness compression -> autocorrelation
//! by inverse cosine transform -> Levinson-Durbin (order 12) -> cepstral
//! recursion. Output is the log model gain plus cepstra c1-c12.
//!
//! The filterbank runs on the plain (windowed, not pre-emphasized) spectrum:
//! the equal-loudness curve is this analysis' own spectral emphasis.

use super::fft::{N_BINS, N_FFT};
use crate::signal_io::CANONICAL_RATE;

pub const N_BANDS: usize = 17;
pub const LPC_ORDER: usize = 12;
pub const N_COEFFS: usize = 13;

const ENERGY_FLOOR: f64 = 1e-12;

fn hz_to_bark(hz: f64) -> f64 {
    6.0 * (hz / 600.0).asinh()
}

/// Hermansky's equal-loudness approximation, omega in rad/s.
fn equal_loudness(hz: f64) -> f64 {
    let w2 = (2.0 * std::f64::consts::PI * hz).powi(2);
    ((w2 + 56.8e6) * w2 * w2) / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

/// Critical-band masking curve centered at 0, evaluated at bark offset d.
fn critical_band_weight(d: f64) -> f64 {
    if d < -1.3 || d > 2.5 {
        0.0
    } else if d <= -0.5 {
        10f64.powf(2.5 * (d + 0.5))
    } else if d < 0.5 {
        1.0
    } else {
        10f64.powf(-(d - 0.5))
    }
}

/// Bark-spaced critical-band filterbank with equal-loudness weights folded in.
pub struct BarkFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
    /// cos(pi * j * k / (N_BANDS + 1)) basis for the autocorrelation IDFT,
    /// indexed by [k][j] over the band samples with duplicated endpoints.
    idft: Vec<Vec<f64>>,
}

impl BarkFilterbank {
    pub fn new() -> Self {
        let bin_hz = CANONICAL_RATE as f64 / N_FFT as f64;
        let bark_max = hz_to_bark(CANONICAL_RATE as f64 / 2.0);
        let mut filters = Vec::with_capacity(N_BANDS);
        for i in 1..=N_BANDS {
            let center_bark = bark_max * i as f64 / (N_BANDS + 1) as f64;
            let center_hz = 600.0 * (center_bark / 6.0).sinh();
            let loudness = equal_loudness(center_hz);
            let mut first = None;
            let mut weights = Vec::new();
            for k in 0..N_BINS {
                let w = critical_band_weight(hz_to_bark(k as f64 * bin_hz) - center_bark);
                if w > 0.0 {
                    if first.is_none() {
                        first = Some(k);
                    }
                    weights.push(w * loudness);
                } else if first.is_some() {
                    break;
                }
            }
            filters.push((first.unwrap_or(0), weights));
        }

        // 19 uniform spectral samples (duplicated endpoints) over [0, pi].
        let m = N_BANDS + 1;
        let idft = (0..=LPC_ORDER)
            .map(|k| {
                (0..=m)
                    .map(|j| {
                        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                        w * (std::f64::consts::PI * j as f64 * k as f64 / m as f64).cos()
                    })
                    .collect()
            })
            .collect();
        BarkFilterbank { filters, idft }
    }

    fn band_loudness(&self, magnitude: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), N_BANDS);
        for (slot, (first, weights)) in out.iter_mut().zip(&self.filters) {
            let e: f64 = weights
                .iter()
                .zip(&magnitude[*first..])
                .map(|(w, m)| w * m * m)
                .sum();
            *slot = e.cbrt();
        }
    }

    fn autocorrelation(&self, bands: &[f64], r: &mut [f64]) {
        // Spectrum samples with duplicated endpoints: [b0, b0..b16, b16].
        debug_assert_eq!(r.len(), LPC_ORDER + 1);
        for (k, row) in self.idft.iter().enumerate() {
            let mut acc = row[0] * bands[0];
            for j in 1..=N_BANDS {
                acc += row[j] * bands[j - 1];
            }
            acc += row[N_BANDS + 1] * bands[N_BANDS - 1];
            r[k] = acc;
        }
    }
}

impl Default for BarkFilterbank {
    fn default() -> Self {
        Self::new()
    }
}

/// Levinson-Durbin recursion: solve the order-p normal equations for the
/// analysis polynomial A(z) = 1 + sum a_k z^-k. Returns (a[1..=p], final
/// prediction error). None if the autocorrelation is not positive definite.
pub fn levinson(r: &[f64], order: usize) -> Option<(Vec<f64>, f64)> {
    assert!(r.len() > order, "need r[0..=order]");
    let mut err = r[0];
    if !(err.is_finite() && err > 0.0) {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut tmp = vec![0.0; order + 1];
    for m in 1..=order {
        let mut acc = r[m];
        for k in 1..m {
            acc += a[k] * r[m - k];
        }
        let reflection = -acc / err;
        if !reflection.is_finite() {
            return None;
        }
        tmp[..m].copy_from_slice(&a[..m]);
        for k in 1..m {
            a[k] = tmp[k] + reflection * tmp[m - k];
        }
        a[m] = reflection;
        err *= 1.0 - reflection * reflection;
        if !(err.is_finite() && err > 0.0) {
            return None;
        }
    }
    Some((a[1..].to_vec(), err))
}

/// Cepstra of the all-pole model 1/A(z):
/// c_n = -a_n - (1/n) * sum_{k=1}^{n-1} k * c_k * a_{n-k}.
pub fn lpc_to_cepstrum(a: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), out.len());
    for n in 1..=a.len() {
        let mut acc = -a[n - 1];
        for k in 1..n {
            acc -= (k as f64 / n as f64) * out[k - 1] * a[n - k - 1];
        }
        out[n - 1] = acc;
    }
}

/// PLP vector for one frame: [ln gain, c1..c12]. Zero-energy (or otherwise
/// degenerate) frames yield all zeros.
pub fn coeffs(fb: &BarkFilterbank, magnitude: &[f64], bands_buf: &mut [f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), N_COEFFS);
    fb.band_loudness(magnitude, bands_buf);
    let mut r = [0.0; LPC_ORDER + 1];
    fb.autocorrelation(bands_buf, &mut r);
    if r[0] <= ENERGY_FLOOR {
        out.fill(0.0);
        return;
    }
    match levinson(&r, LPC_ORDER) {
        Some((a, gain)) => {
            out[0] = gain.max(1e-10).ln();
            lpc_to_cepstrum(&a, &mut out[1..]);
        }
        None => out.fill(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::fft::SpectrumAnalyzer;
    use crate::signal_io::{frame, Waveform, FRAME_LEN};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn levinson_order_one_by_hand() {
        // r = [1, 0.5]: a1 = -0.5, prediction error 0.75.
        let (a, gain) = levinson(&[1.0, 0.5], 1).unwrap();
        assert!((a[0] + 0.5).abs() < 1e-15);
        assert!((gain - 0.75).abs() < 1e-15);
    }

    #[test]
    fn levinson_satisfies_normal_equations() {
        // Random positive-definite autocorrelations from nonnegative spectra.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let order = rng.random_range(2..=12);
            let mut r = vec![0.0; order + 1];
            for _ in 0..6 {
                let power: f64 = rng.random_range(0.1..2.0);
                let freq: f64 = rng.random_range(0.0..std::f64::consts::PI);
                for (k, slot) in r.iter_mut().enumerate() {
                    *slot += power * (freq * k as f64).cos();
                }
            }
            r[0] += 0.05; // regularize away from semi-definite
            let (a, _) = levinson(&r, order).unwrap();
            // Prediction coefficients alpha = -a solve R alpha = r[1..].
            for i in 1..=order {
                let mut lhs = 0.0;
                for (j, &aj) in a.iter().enumerate() {
                    lhs += -aj * r[(i as isize - (j as isize + 1)).unsigned_abs()];
                }
                assert!(
                    (lhs - r[i]).abs() <= 1e-8,
                    "normal equation {i} residual {}",
                    (lhs - r[i]).abs()
                );
            }
        }
    }

    #[test]
    fn ar1_cepstrum_matches_closed_form() {
        // r[k] = rho^k is an AR(1) autocorrelation; cepstra are rho^n / n.
        let rho: f64 = 0.6;
        let r: Vec<f64> = (0..=LPC_ORDER).map(|k| rho.powi(k as i32)).collect();
        let (a, _) = levinson(&r, LPC_ORDER).unwrap();
        let mut c = vec![0.0; LPC_ORDER];
        lpc_to_cepstrum(&a, &mut c);
        for n in 1..=LPC_ORDER {
            let expected = rho.powi(n as i32) / n as f64;
            assert!(
                (c[n - 1] - expected).abs() < 1e-9,
                "c{n} = {} expected {expected}",
                c[n - 1]
            );
        }
    }

    #[test]
    fn zero_energy_frame_is_all_zero() {
        let fb = BarkFilterbank::new();
        let mag = vec![0.0; N_BINS];
        let mut bands = vec![0.0; N_BANDS];
        let mut out = vec![1.0; N_COEFFS];
        coeffs(&fb, &mag, &mut bands, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_has_small_lpc_coefficients() {
        // Flat spectrum -> smooth warped loudness -> modest LPC weights.
        // Pre-emphasis and the equal-loudness tilt leave a smooth slope for
        // the LPC to model (mean max |a_k| is about 0.6 here), but a stable
        // fit to such a gentle envelope stays well below 1; blowups from a
        // bad autocorrelation or recursion land far above it.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..400 + 99 * 160)
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let w = Waveform::new(samples, CANONICAL_RATE);
        let fs = frame(&w, 0.97).unwrap();
        let fb = BarkFilterbank::new();
        let mut analyzer = SpectrumAnalyzer::new();
        let mut buf = vec![0.0; FRAME_LEN];
        let mut mag = vec![0.0; N_BINS];
        let mut bands = vec![0.0; N_BANDS];
        let mut total_max_a = 0.0;
        for i in 0..100 {
            fs.windowed(i, &mut buf);
            analyzer.magnitude_512(&buf, &mut mag);
            fb.band_loudness(&mag, &mut bands);
            let mut r = [0.0; LPC_ORDER + 1];
            fb.autocorrelation(&bands, &mut r);
            let (a, _) = levinson(&r, LPC_ORDER).unwrap();
            total_max_a += a.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let mean_max_a = total_max_a / 100.0;
        assert!(
            mean_max_a < 1.0,
            "white-noise LPC coefficients too large: mean max |a_k| = {mean_max_a}"
        );
    }
}
