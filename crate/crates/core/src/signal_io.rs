//! Audio decoding, canonicalization, and framing.
//!
//! Every downstream extractor consumes the output of this module: WAV files
//! are decoded, mixed to mono, resampled to the canonical 16 kHz by
//! windowed-sinc interpolation, and cut into 25 ms frames every 10 ms
//! (400 samples, hop 160). Frames are stored raw; pre-emphasis and the
//! Hamming taper are applied on view so that time-domain descriptors
//! (pitch, jitter, HNR, energy) can read the unmodified signal while
//! spectral ones read the tapered or emphasized version.

use std::path::Path;

use crate::error::{Error, Result};

pub const CANONICAL_RATE: u32 = 16_000;
pub const FRAME_LEN: usize = 400;
pub const HOP: usize = 160;
pub const DEFAULT_PRE_EMPHASIS: f64 = 0.97;

/// Mono waveform at a known sample rate, amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Waveform {
            samples,
            sample_rate_hz,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Decode a PCM WAV file (8/16/24-bit int or 32-bit float, 1-2 channels,
/// 8-48 kHz), mix to mono, and resample to 16 kHz.
pub fn decode_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();

    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels (only mono/stereo supported)",
            spec.channels
        )));
    }
    if !(8_000..=48_000).contains(&spec.sample_rate) {
        return Err(Error::UnsupportedFormat(format!(
            "sample rate {} Hz outside 8-48 kHz",
            spec.sample_rate
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::UnsupportedFormat(format!("malformed wav data: {e}")))?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::UnsupportedFormat(format!("malformed wav data: {e}")))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{bits}-bit {fmt:?} samples"
            )))
        }
    };

    let mono = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|lr| 0.5 * (lr[0] + lr[1]))
            .collect()
    } else {
        interleaved
    };

    canonicalize(mono, spec.sample_rate)
}

/// Resample a mono signal to 16 kHz and wrap it as a canonical [`Waveform`].
pub fn canonicalize(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Waveform> {
    let resampled = resample(&samples, sample_rate_hz, CANONICAL_RATE);
    if resampled.len() < FRAME_LEN {
        return Err(Error::EmptyAudio(format!(
            "{} samples after resampling (need at least {FRAME_LEN})",
            resampled.len()
        )));
    }
    Ok(Waveform::new(resampled, CANONICAL_RATE))
}

/// Windowed-sinc resampler. Identity when the rates already match.
///
/// Kernel: sinc low-pass at 0.95 of the narrower Nyquist, Hann-tapered,
/// 32 zero crossings per side, with per-output-sample kernel-sum
/// normalization (preserves DC exactly and compensates edge truncation).
pub fn resample(samples: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    assert!(from_hz > 0 && to_hz > 0, "sample rates must be positive");
    if from_hz == to_hz {
        return samples.to_vec();
    }
    let n_in = samples.len();
    let n_out = ((n_in as u64 * to_hz as u64) / from_hz as u64) as usize;
    if n_in == 0 || n_out == 0 {
        return Vec::new();
    }

    let ratio = to_hz as f64 / from_hz as f64;
    // Cutoff in cycles per input sample; input Nyquist is 0.5.
    let fc = 0.475 * ratio.min(1.0);
    let half_width = (32.0 / (2.0 * fc)).ceil();
    let step = from_hz as f64 / to_hz as f64;

    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let t = m as f64 * step;
        let k_lo = ((t - half_width).ceil() as i64).max(0) as usize;
        let k_hi = ((t + half_width).floor() as i64).min(n_in as i64 - 1) as usize;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for k in k_lo..=k_hi {
            let u = t - k as f64;
            let taper = 0.5 * (1.0 + (std::f64::consts::PI * u / half_width).cos());
            let w = 2.0 * fc * sinc(2.0 * fc * u) * taper;
            acc += samples[k] * w;
            norm += w;
        }
        out.push(if norm.abs() > 1e-12 { acc / norm } else { 0.0 });
    }
    out
}

fn sinc(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        1.0
    } else {
        let pv = std::f64::consts::PI * v;
        pv.sin() / pv
    }
}

/// Write a mono 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn write_wav_16bit(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::io(format!("create {}", path.display()), io_error(e)))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::io(format!("write {}", path.display()), io_error(e)))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::io(format!("finalize {}", path.display()), io_error(e)))?;
    Ok(())
}

fn io_error(e: hound::Error) -> std::io::Error {
    match e {
        hound::Error::IoError(io) => io,
        other => std::io::Error::other(other.to_string()),
    }
}

/// Fixed-length frames cut from a canonical waveform.
///
/// Frames are stored raw. `emphasized`/`windowed`/`windowed_emphasized`
/// apply the pre-emphasis filter y[n] = x[n] - k*x[n-1] (per frame: each
/// frame's first sample is kept as-is) and the Hamming taper on demand.
pub struct FrameStream {
    data: Vec<f64>,
    n_frames: usize,
    pre_emphasis: f64,
    window: Vec<f64>,
}

/// floor((n - 400) / 160) + 1 for n >= 400.
pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < FRAME_LEN {
        0
    } else {
        (n_samples - FRAME_LEN) / HOP + 1
    }
}

/// Cut 25 ms / 10 ms frames from a canonical 16 kHz waveform.
pub fn frame(w: &Waveform, pre_emphasis: f64) -> Result<FrameStream> {
    debug_assert_eq!(
        w.sample_rate_hz, CANONICAL_RATE,
        "frame() expects a canonicalized waveform"
    );
    assert!(
        (0.0..1.0).contains(&pre_emphasis),
        "pre-emphasis must be in [0, 1)"
    );
    let n_frames = frame_count(w.samples.len());
    if n_frames == 0 {
        return Err(Error::EmptyAudio(format!(
            "{} samples, no full 400-sample frame fits",
            w.samples.len()
        )));
    }
    let mut data = Vec::with_capacity(n_frames * FRAME_LEN);
    for i in 0..n_frames {
        let start = i * HOP;
        data.extend_from_slice(&w.samples[start..start + FRAME_LEN]);
    }
    Ok(FrameStream {
        data,
        n_frames,
        pre_emphasis,
        window: hamming(FRAME_LEN),
    })
}

fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

impl FrameStream {
    pub fn len(&self) -> usize {
        self.n_frames
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }

    pub fn pre_emphasis(&self) -> f64 {
        self.pre_emphasis
    }

    pub fn window_fn(&self) -> &'static str {
        "hamming"
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Raw (untapered, un-emphasized) samples of frame `i`.
    pub fn raw(&self, i: usize) -> &[f64] {
        &self.data[i * FRAME_LEN..(i + 1) * FRAME_LEN]
    }

    /// Pre-emphasized samples of frame `i`, no taper.
    pub fn emphasized(&self, i: usize, out: &mut [f64]) {
        let x = self.raw(i);
        out[0] = x[0];
        for n in 1..FRAME_LEN {
            out[n] = x[n] - self.pre_emphasis * x[n - 1];
        }
    }

    /// Hamming-tapered raw samples of frame `i`.
    pub fn windowed(&self, i: usize, out: &mut [f64]) {
        let x = self.raw(i);
        for n in 0..FRAME_LEN {
            out[n] = x[n] * self.window[n];
        }
    }

    /// Pre-emphasized then Hamming-tapered samples of frame `i`.
    pub fn windowed_emphasized(&self, i: usize, out: &mut [f64]) {
        self.emphasized(i, out);
        for n in 0..FRAME_LEN {
            out[n] *= self.window[n];
        }
    }
}
