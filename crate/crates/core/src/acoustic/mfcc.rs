//! Mel-frequency cepstral coefficients.
//!
//! 512-point magnitude spectrum -> 26 triangular mel filters spanning
//! 0-8 kHz -> natural log with a 1e-10 floor -> DCT-II, coefficients 0-12.

use super::fft::{N_BINS, N_FFT};
use crate::signal_io::CANONICAL_RATE;

pub const N_FILTERS: usize = 26;
pub const N_COEFFS: usize = 13;
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the 257 non-negative FFT bins.
pub struct MelFilterbank {
    /// Per filter: (first bin index, triangle weights for consecutive bins).
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new() -> Self {
        let fmax = CANONICAL_RATE as f64 / 2.0;
        let mel_max = hz_to_mel(fmax);
        let hz_points: Vec<f64> = (0..N_FILTERS + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (N_FILTERS + 1) as f64))
            .collect();
        let bin_hz = CANONICAL_RATE as f64 / N_FFT as f64;

        let mut filters = Vec::with_capacity(N_FILTERS);
        for m in 1..=N_FILTERS {
            let (lo, center, hi) = (hz_points[m - 1], hz_points[m], hz_points[m + 1]);
            let first_bin = (lo / bin_hz).ceil() as usize;
            let last_bin = ((hi / bin_hz).floor() as usize).min(N_BINS - 1);
            let mut weights = Vec::new();
            for k in first_bin..=last_bin {
                let f = k as f64 * bin_hz;
                let w = if f <= center {
                    (f - lo) / (center - lo)
                } else {
                    (hi - f) / (hi - center)
                };
                weights.push(w.max(0.0));
            }
            filters.push((first_bin, weights));
        }
        MelFilterbank {
            filters,
            centers_hz: hz_points[1..=N_FILTERS].to_vec(),
        }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Filter energies from a 257-bin magnitude spectrum.
    pub fn energies(&self, magnitude: &[f64], out: &mut [f64]) {
        debug_assert_eq!(magnitude.len(), N_BINS);
        debug_assert_eq!(out.len(), N_FILTERS);
        for (slot, (first, weights)) in out.iter_mut().zip(&self.filters) {
            *slot = weights
                .iter()
                .zip(&magnitude[*first..])
                .map(|(w, m)| w * m)
                .sum();
        }
    }
}

impl Default for MelFilterbank {
    fn default() -> Self {
        Self::new()
    }
}

/// Precomputed DCT-II basis mapping 26 log energies to 13 cepstra.
pub struct MelDct {
    basis: Vec<f64>, // N_COEFFS x N_FILTERS, row-major
}

impl MelDct {
    pub fn new() -> Self {
        let mut basis = Vec::with_capacity(N_COEFFS * N_FILTERS);
        for k in 0..N_COEFFS {
            for m in 0..N_FILTERS {
                basis.push(
                    (std::f64::consts::PI * k as f64 * (m as f64 + 0.5) / N_FILTERS as f64).cos(),
                );
            }
        }
        MelDct { basis }
    }

    pub fn apply(&self, log_energies: &[f64], out: &mut [f64]) {
        debug_assert_eq!(log_energies.len(), N_FILTERS);
        debug_assert_eq!(out.len(), N_COEFFS);
        for k in 0..N_COEFFS {
            let row = &self.basis[k * N_FILTERS..(k + 1) * N_FILTERS];
            out[k] = row.iter().zip(log_energies).map(|(b, e)| b * e).sum();
        }
    }
}

impl Default for MelDct {
    fn default() -> Self {
        Self::new()
    }
}

/// MFCC c0-c12 from a 257-bin magnitude spectrum of an emphasized frame.
pub fn coeffs(
    fb: &MelFilterbank,
    dct: &MelDct,
    magnitude: &[f64],
    energies_buf: &mut [f64],
    out: &mut [f64],
) {
    fb.energies(magnitude, energies_buf);
    for e in energies_buf.iter_mut() {
        *e = e.max(LOG_FLOOR).ln();
    }
    dct.apply(energies_buf, out);
}
