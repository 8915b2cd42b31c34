//! Shared FFT plumbing for the per-frame extractors.
//!
//! Wraps rustfft plans for the two transform sizes the pipeline needs:
//! 512-point magnitude spectra (MFCC / PLP / spectral descriptors) and a
//! 1024-point real cepstrum (CPP).

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::sync::Arc;

pub const N_FFT: usize = 512;
pub const N_BINS: usize = N_FFT / 2 + 1;
pub const N_FFT_CEPSTRUM: usize = 1024;

pub struct SpectrumAnalyzer {
    fft512: Arc<dyn Fft<f64>>,
    fft1024: Arc<dyn Fft<f64>>,
    ifft1024: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new() -> Self {
        let mut planner = FftPlanner::new();
        let fft512 = planner.plan_fft_forward(N_FFT);
        let fft1024 = planner.plan_fft_forward(N_FFT_CEPSTRUM);
        let ifft1024 = planner.plan_fft_inverse(N_FFT_CEPSTRUM);
        let scratch_len = fft512
            .get_inplace_scratch_len()
            .max(fft1024.get_inplace_scratch_len())
            .max(ifft1024.get_inplace_scratch_len());
        SpectrumAnalyzer {
            fft512,
            fft1024,
            ifft1024,
            buf: vec![Complex::new(0.0, 0.0); N_FFT_CEPSTRUM],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    /// Magnitude spectrum of a zero-padded 512-point FFT; `out` gets the
    /// 257 non-negative-frequency bins.
    pub fn magnitude_512(&mut self, frame: &[f64], out: &mut [f64]) {
        debug_assert!(frame.len() <= N_FFT);
        debug_assert_eq!(out.len(), N_BINS);
        for (i, slot) in self.buf[..N_FFT].iter_mut().enumerate() {
            *slot = Complex::new(if i < frame.len() { frame[i] } else { 0.0 }, 0.0);
        }
        self.fft512
            .process_with_scratch(&mut self.buf[..N_FFT], &mut self.scratch);
        for k in 0..N_BINS {
            out[k] = self.buf[k].norm();
        }
    }

    /// Real cepstrum of a frame: inverse DFT of the dB log-magnitude
    /// spectrum at 1024 points. `out` gets all 1024 cepstral bins.
    pub fn real_cepstrum_1024(&mut self, frame: &[f64], out: &mut [f64]) {
        debug_assert!(frame.len() <= N_FFT_CEPSTRUM);
        debug_assert_eq!(out.len(), N_FFT_CEPSTRUM);
        for (i, slot) in self.buf.iter_mut().enumerate() {
            *slot = Complex::new(if i < frame.len() { frame[i] } else { 0.0 }, 0.0);
        }
        self.fft1024
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for slot in self.buf.iter_mut() {
            let db = 20.0 * slot.norm().max(1e-10).log10();
            *slot = Complex::new(db, 0.0);
        }
        self.ifft1024
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / N_FFT_CEPSTRUM as f64;
        for (k, slot) in self.buf.iter().enumerate() {
            out[k] = slot.re * scale;
        }
    }
}

impl Default for SpectrumAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}
