//! Per-frame acoustic supervector: 13 MFCC + 13 PLP + 8 prosody + 7 voice
//! quality = 41 dimensions, stacked with delta and delta-delta to 123.
//!
//! `supervectors` runs all four families in one pass so the two spectra per
//! frame (pre-emphasized for MFCC, plain for everything else) are computed
//! once. The family functions (`mfcc`, `plp`, `prosody`, `voice_quality`)
//! expose the same numbers individually.

pub mod fft;
pub mod mfcc;
pub mod plp;
pub mod prosody;
pub mod voice_quality;

use crate::signal_io::{FrameStream, FRAME_LEN};

use fft::{SpectrumAnalyzer, N_BINS, N_FFT_CEPSTRUM};
use mfcc::{MelDct, MelFilterbank};
use plp::BarkFilterbank;

pub use prosody::{f0_track, F0Track};

pub const N_SUPERVECTOR: usize = 41;
pub const N_STACKED: usize = 3 * N_SUPERVECTOR;

pub const SUPERVECTOR_NAMES: [&str; N_SUPERVECTOR] = [
    "mfcc0",
    "mfcc1",
    "mfcc2",
    "mfcc3",
    "mfcc4",
    "mfcc5",
    "mfcc6",
    "mfcc7",
    "mfcc8",
    "mfcc9",
    "mfcc10",
    "mfcc11",
    "mfcc12",
    "plp_gain",
    "plp1",
    "plp2",
    "plp3",
    "plp4",
    "plp5",
    "plp6",
    "plp7",
    "plp8",
    "plp9",
    "plp10",
    "plp11",
    "plp12",
    "log_energy",
    "f0",
    "voicing",
    "zcr",
    "spectral_centroid",
    "spectral_flux",
    "spectral_rolloff",
    "loudness",
    "jitter_local",
    "jitter_rap",
    "shimmer_local",
    "shimmer_apq3",
    "hnr",
    "spectral_tilt",
    "cpp",
];

/// One frame's 41 acoustic descriptors, grouped by family.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameSupervector {
    pub mfcc: [f64; mfcc::N_COEFFS],
    pub plp: [f64; plp::N_COEFFS],
    pub prosody: [f64; prosody::N_PROSODY],
    pub voice_quality: [f64; voice_quality::N_VOICE_QUALITY],
}

impl FrameSupervector {
    pub fn flat(&self) -> [f64; N_SUPERVECTOR] {
        let mut out = [0.0; N_SUPERVECTOR];
        out[..13].copy_from_slice(&self.mfcc);
        out[13..26].copy_from_slice(&self.plp);
        out[26..34].copy_from_slice(&self.prosody);
        out[34..].copy_from_slice(&self.voice_quality);
        out
    }
}

/// Frames x 123 matrix (41 static + 41 delta + 41 delta-delta), row-major,
/// with stable unique column names.
pub struct FrameFeatureMatrix {
    names: Vec<String>,
    n_frames: usize,
    data: Vec<f64>,
}

impl FrameFeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.names.len()..(t + 1) * self.names.len()]
    }

    pub fn copy_column(&self, c: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.n_frames).map(|t| self.data[t * self.names.len() + c]));
    }
}

/// Column names of the stacked matrix: the 41 base names, then ".d", then
/// ".dd" variants.
pub fn stacked_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_STACKED);
    names.extend(SUPERVECTOR_NAMES.iter().map(|n| n.to_string()));
    names.extend(SUPERVECTOR_NAMES.iter().map(|n| format!("{n}.d")));
    names.extend(SUPERVECTOR_NAMES.iter().map(|n| format!("{n}.dd")));
    names
}

struct Workspace {
    analyzer: SpectrumAnalyzer,
    mel_fb: MelFilterbank,
    mel_dct: MelDct,
    bark_fb: BarkFilterbank,
    emphasized: Vec<f64>,
    windowed: Vec<f64>,
    mag_emph: Vec<f64>,
    mag_plain: Vec<f64>,
    prev_mag: Vec<f64>,
    cepstrum: Vec<f64>,
    mel_energies: Vec<f64>,
    bands: Vec<f64>,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            analyzer: SpectrumAnalyzer::new(),
            mel_fb: MelFilterbank::new(),
            mel_dct: MelDct::new(),
            bark_fb: BarkFilterbank::new(),
            emphasized: vec![0.0; FRAME_LEN],
            windowed: vec![0.0; FRAME_LEN],
            mag_emph: vec![0.0; N_BINS],
            mag_plain: vec![0.0; N_BINS],
            prev_mag: vec![0.0; N_BINS],
            cepstrum: vec![0.0; N_FFT_CEPSTRUM],
            mel_energies: vec![0.0; mfcc::N_FILTERS],
            bands: vec![0.0; plp::N_BANDS],
        }
    }
}

/// All four families in one pass over the frames.
pub fn supervectors(frames: &FrameStream) -> Vec<FrameSupervector> {
    let track = prosody::f0_track(frames);
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        let mut sv = FrameSupervector::default();

        frames.windowed_emphasized(i, &mut ws.emphasized);
        ws.analyzer.magnitude_512(&ws.emphasized, &mut ws.mag_emph);
        mfcc::coeffs(
            &ws.mel_fb,
            &ws.mel_dct,
            &ws.mag_emph,
            &mut ws.mel_energies,
            &mut sv.mfcc,
        );

        frames.windowed(i, &mut ws.windowed);
        ws.analyzer.magnitude_512(&ws.windowed, &mut ws.mag_plain);
        plp::coeffs(&ws.bark_fb, &ws.mag_plain, &mut ws.bands, &mut sv.plp);

        let prev = (i > 0).then_some(ws.prev_mag.as_slice());
        prosody::descriptors(
            frames.raw(i),
            &ws.mag_plain,
            prev,
            track.f0_hz[i],
            track.voicing[i],
            &mut sv.prosody,
        );

        if track.is_voiced(i) {
            ws.analyzer
                .real_cepstrum_1024(&ws.windowed, &mut ws.cepstrum);
            voice_quality::descriptors(
                frames,
                &track,
                i,
                &ws.mag_plain,
                &ws.cepstrum,
                &mut sv.voice_quality,
            );
        }

        ws.prev_mag.copy_from_slice(&ws.mag_plain);
        out.push(sv);
    }
    out
}

/// MFCC coefficients 0-12 per frame.
pub fn mfcc(frames: &FrameStream) -> Vec<[f64; mfcc::N_COEFFS]> {
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        let mut c = [0.0; mfcc::N_COEFFS];
        frames.windowed_emphasized(i, &mut ws.emphasized);
        ws.analyzer.magnitude_512(&ws.emphasized, &mut ws.mag_emph);
        mfcc::coeffs(
            &ws.mel_fb,
            &ws.mel_dct,
            &ws.mag_emph,
            &mut ws.mel_energies,
            &mut c,
        );
        out.push(c);
    }
    out
}

/// PLP gain term plus cepstra 1-12 per frame.
pub fn plp(frames: &FrameStream) -> Vec<[f64; plp::N_COEFFS]> {
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        let mut c = [0.0; plp::N_COEFFS];
        frames.windowed(i, &mut ws.windowed);
        ws.analyzer.magnitude_512(&ws.windowed, &mut ws.mag_plain);
        plp::coeffs(&ws.bark_fb, &ws.mag_plain, &mut ws.bands, &mut c);
        out.push(c);
    }
    out
}

/// The eight prosody descriptors per frame.
pub fn prosody(frames: &FrameStream) -> Vec<[f64; prosody::N_PROSODY]> {
    let track = prosody::f0_track(frames);
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        let mut p = [0.0; prosody::N_PROSODY];
        frames.windowed(i, &mut ws.windowed);
        ws.analyzer.magnitude_512(&ws.windowed, &mut ws.mag_plain);
        let prev = (i > 0).then_some(ws.prev_mag.as_slice());
        prosody::descriptors(
            frames.raw(i),
            &ws.mag_plain,
            prev,
            track.f0_hz[i],
            track.voicing[i],
            &mut p,
        );
        ws.prev_mag.copy_from_slice(&ws.mag_plain);
        out.push(p);
    }
    out
}

/// The seven voice-quality descriptors per frame, given the pitch track.
pub fn voice_quality(
    frames: &FrameStream,
    track: &F0Track,
) -> Vec<[f64; voice_quality::N_VOICE_QUALITY]> {
    let mut ws = Workspace::new();
    let mut out = Vec::with_capacity(frames.len());
    for i in 0..frames.len() {
        let mut v = [0.0; voice_quality::N_VOICE_QUALITY];
        if track.is_voiced(i) {
            frames.windowed(i, &mut ws.windowed);
            ws.analyzer.magnitude_512(&ws.windowed, &mut ws.mag_plain);
            ws.analyzer
                .real_cepstrum_1024(&ws.windowed, &mut ws.cepstrum);
            voice_quality::descriptors(frames, track, i, &ws.mag_plain, &ws.cepstrum, &mut v);
        }
        out.push(v);
    }
    out
}

/// Regression delta with window +/-2 and replicated edge padding.
pub fn delta(x: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];
    (0..n)
        .map(|t| ((at(t + 1) - at(t - 1)) + 2.0 * (at(t + 2) - at(t - 2))) / 10.0)
        .collect()
}

/// Stack the static 41 dims with their deltas and delta-deltas.
pub fn stack_deltas(svs: &[FrameSupervector]) -> FrameFeatureMatrix {
    assert!(!svs.is_empty(), "at least one frame required");
    let n = svs.len();
    let mut col = vec![0.0; n];
    let mut data = vec![0.0; n * N_STACKED];
    for c in 0..N_SUPERVECTOR {
        for (t, sv) in svs.iter().enumerate() {
            col[t] = sv.flat()[c];
        }
        let d = delta(&col);
        let dd = delta(&d);
        for t in 0..n {
            data[t * N_STACKED + c] = col[t];
            data[t * N_STACKED + N_SUPERVECTOR + c] = d[t];
            data[t * N_STACKED + 2 * N_SUPERVECTOR + c] = dd[t];
        }
    }
    FrameFeatureMatrix {
        names: stacked_names(),
        n_frames: n,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::{frame, Waveform, CANONICAL_RATE, DEFAULT_PRE_EMPHASIS};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn voiced_test_signal(dur_s: f64) -> Vec<f64> {
        let n = (dur_s * CANONICAL_RATE as f64) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..n)
            .map(|i| {
                let t = i as f64 / CANONICAL_RATE as f64;
                let saw: f64 = (1..=25)
                    .map(|h| (2.0 * std::f64::consts::PI * 180.0 * h as f64 * t).sin() / h as f64)
                    .sum();
                0.3 * saw + 0.01 * rng.random_range(-1.0..1.0)
            })
            .collect()
    }

    fn frames_of(samples: Vec<f64>) -> crate::signal_io::FrameStream {
        frame(&Waveform::new(samples, CANONICAL_RATE), DEFAULT_PRE_EMPHASIS).unwrap()
    }

    #[test]
    fn names_are_unique_and_sized() {
        assert_eq!(SUPERVECTOR_NAMES.len(), 41);
        let stacked = stacked_names();
        assert_eq!(stacked.len(), 123);
        let unique: HashSet<&String> = stacked.iter().collect();
        assert_eq!(unique.len(), 123);
        assert_eq!(stacked[0], "mfcc0");
        assert_eq!(stacked[13], "plp_gain");
        assert_eq!(stacked[26], "log_energy");
        assert_eq!(stacked[40], "cpp");
        assert_eq!(stacked[41], "mfcc0.d");
        assert_eq!(stacked[82], "mfcc0.dd");
        assert_eq!(stacked[122], "cpp.dd");
    }

    #[test]
    fn constant_sequence_has_zero_deltas() {
        let mut sv = FrameSupervector::default();
        sv.mfcc[0] = 2.5;
        sv.prosody[3] = 0.1;
        let m = stack_deltas(&vec![sv; 10]);
        assert_eq!(m.n_frames(), 10);
        assert_eq!(m.n_cols(), 123);
        for t in 0..10 {
            for c in 41..123 {
                assert_eq!(m.row(t)[c], 0.0, "delta at frame {t} col {c}");
            }
        }
    }

    #[test]
    fn linear_ramp_has_unit_delta_inside() {
        let svs: Vec<FrameSupervector> = (0..12)
            .map(|t| {
                let mut sv = FrameSupervector::default();
                sv.mfcc[0] = t as f64;
                sv
            })
            .collect();
        let m = stack_deltas(&svs);
        for t in 2..10 {
            assert!((m.row(t)[41] - 1.0).abs() < 1e-12, "delta at {t}");
        }
        assert!((m.row(0)[41] - 0.5).abs() < 1e-12);
        assert!((m.row(1)[41] - 0.8).abs() < 1e-12);
        for t in 4..8 {
            assert!(m.row(t)[82].abs() < 1e-12, "delta-delta at {t}");
        }
    }

    #[test]
    fn single_frame_has_zero_deltas() {
        let mut sv = FrameSupervector::default();
        sv.plp[2] = -1.0;
        let m = stack_deltas(&[sv]);
        assert_eq!(m.n_frames(), 1);
        for c in 41..123 {
            assert_eq!(m.row(0)[c], 0.0);
        }
    }

    #[test]
    fn supervectors_match_the_family_functions() {
        let fs = frames_of(voiced_test_signal(0.5));
        let svs = supervectors(&fs);
        let m = mfcc(&fs);
        let p = plp(&fs);
        let pr = prosody(&fs);
        let track = f0_track(&fs);
        let vq = voice_quality(&fs, &track);
        for i in 0..fs.len() {
            assert_eq!(svs[i].mfcc, m[i], "mfcc frame {i}");
            assert_eq!(svs[i].plp, p[i], "plp frame {i}");
            assert_eq!(svs[i].prosody, pr[i], "prosody frame {i}");
            assert_eq!(svs[i].voice_quality, vq[i], "voice quality frame {i}");
        }
    }

    #[test]
    fn pure_sine_has_tiny_jitter_and_clamped_hnr() {
        let samples: Vec<f64> = (0..8_000)
            .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 16_000.0).sin())
            .collect();
        let fs = frames_of(samples);
        let track = f0_track(&fs);
        let vq = voice_quality(&fs, &track);
        let mid = fs.len() / 2;
        assert!(track.is_voiced(mid));
        assert!(vq[mid][0] <= 0.005, "jitter_local {}", vq[mid][0]);
        assert_eq!(vq[mid][4], 40.0, "hnr {}", vq[mid][4]);
    }

    #[test]
    fn sine_in_noise_at_0db_has_hnr_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Sine power 0.045; uniform(-a, a) power a^2/3 matches at a = 0.367.
        let a = (3.0 * 0.045f64).sqrt();
        let samples: Vec<f64> = (0..32_000)
            .map(|i| {
                0.3 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / 16_000.0).sin()
                    + rng.random_range(-a..a)
            })
            .collect();
        let fs = frames_of(samples);
        let track = f0_track(&fs);
        let vq = voice_quality(&fs, &track);
        let voiced: Vec<f64> = (0..fs.len())
            .filter(|&i| track.is_voiced(i))
            .map(|i| vq[i][4])
            .collect();
        assert!(
            voiced.len() >= 20,
            "only {} voiced frames at 0 dB SNR",
            voiced.len()
        );
        let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
        assert!(mean.abs() <= 2.0, "mean hnr {mean} dB");
    }

    #[test]
    fn gain_scaling_moves_only_the_plp_gain_term() {
        let base = voiced_test_signal(0.3);
        let doubled: Vec<f64> = base.iter().map(|&v| 2.0 * v).collect();
        let p1 = plp(&frames_of(base));
        let p2 = plp(&frames_of(doubled));
        let expected_shift = (2.0 / 3.0) * 2f64.ln();
        for (a, b) in p1.iter().zip(&p2) {
            assert!(
                ((b[0] - a[0]) - expected_shift).abs() < 1e-6,
                "gain shift {}",
                b[0] - a[0]
            );
            for k in 1..13 {
                assert!((a[k] - b[k]).abs() < 1e-9, "cepstrum {k} drifted");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn all_outputs_are_finite(seed in 0u64..1_000_000, len in 400usize..2400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..len)
                .map(|_| rng.random_range(-1.0f64..1.0))
                .collect();
            let fs = frames_of(samples);
            let m = stack_deltas(&supervectors(&fs));
            prop_assert_eq!(m.n_cols(), 123);
            for t in 0..m.n_frames() {
                for (c, v) in m.row(t).iter().enumerate() {
                    prop_assert!(v.is_finite(), "frame {} col {} = {}", t, c, v);
                }
            }
        }
    }
}
