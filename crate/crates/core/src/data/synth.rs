//! Synthetic voice corpus with a known latent structure.
//!
//! Each subject gets four latent traits in [0, 1]. Every trait drives one
//! score scale and a matching bundle of voice or language behaviors, so a
//! working pipeline can recover the scores from the recordings:
//!
//! * t1: pitch register (110..240 Hz)      -> STAI
//! * t2: vocal effort (amplitude)          -> GAD7
//! * t3: pausing fraction                  -> PSQI
//! * t4: vibrato and tremor depth, fillers,
//!   negative and rare word choice,
//!   reading errors                        -> PANAS
//!
//! Base traits are stratified across subjects (one Latin-hypercube cell
//! per subject and trait), so any subject-level split sees the full trait
//! range on both sides. Traits jitter slightly per session; `noise_level`
//! adds score noise on top. Everything is derived from the spec seed
//! through FNV-1a, so a rerun writes byte-identical files.

use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    fnv1a_64, save_manifest, Manifest, ResponseEntry, Scores, SessionEntry, SubjectEntry,
};
use crate::error::{Error, Result};
use crate::features::QuestionId;
use crate::linguistic::{syllable_count, Token, Transcript, DEFAULT_FILLERS};
use crate::signal_io::{write_wav_16bit, CANONICAL_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub sessions_per_subject: usize,
    pub seed: u64,
    /// 0 = scores follow the traits exactly; 1 = heavy score noise.
    pub noise_level: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_subjects: 30,
            sessions_per_subject: 5,
            seed: 42,
            noise_level: 0.2,
        }
    }
}

const COMMON_WORDS: &[&str] = &[
    "the", "a", "and", "i", "to", "of", "it", "in", "we", "was", "is", "that", "for", "on",
    "my", "with", "at", "this", "day", "had", "but", "so", "then", "went", "home", "work",
    "time", "morning", "coffee", "breakfast", "lunch", "dinner", "walk", "dog", "cat",
    "house", "garden", "kitchen", "room", "table", "chair", "book", "read", "watch",
    "television", "news", "phone", "call", "friend", "family", "mother", "father", "sister",
    "brother", "kids", "school", "office", "meeting", "email", "project", "drive", "car",
    "bus", "train", "station", "shop", "store", "market", "buy", "bought", "food", "bread",
    "milk", "water", "tea", "juice", "apple", "rice", "soup", "cook", "clean", "wash",
    "dishes", "laundry", "sleep", "bed", "wake", "woke", "early", "late", "night",
    "evening", "afternoon", "weather", "rain", "sun", "cloud", "wind", "cold", "warm",
    "hot", "park", "street", "road", "city", "town", "river", "tree", "flower", "grass",
    "bird", "music", "song", "listen", "play", "game", "run", "exercise", "gym", "yoga",
    "stretch", "rest", "break", "visit", "talk", "spoke", "said", "told", "ask", "asked",
    "answer", "think", "thought", "feel", "felt", "remember", "forget", "plan", "start",
    "finish", "stop", "open", "close", "door", "window", "light", "dark", "quiet", "loud",
    "slow", "fast", "small", "big", "new", "old", "next", "last", "first", "second",
    "week", "month", "year", "today", "yesterday", "tomorrow", "always", "sometimes",
    "never", "often", "usually", "really", "very", "quite", "just", "still",
];

const DEPRESSION_TERMS: &[&str] = &[
    "tired", "empty", "hopeless", "sad", "lonely", "worthless", "numb", "drained", "heavy",
    "gloomy", "miserable", "weary",
];

const POSITIVE_WORDS: &[&str] = &[
    "good", "happy", "calm", "glad", "bright", "cheerful", "hopeful", "pleasant", "relaxed",
    "content", "peaceful", "fine",
];

const NEGATIVE_EXTRA: &[&str] = &[
    "bad", "awful", "terrible", "worse", "angry", "upset", "anxious", "worried", "stressed",
    "annoyed",
];

/// Session-level voice parameters derived from (jittered) traits.
struct Voice {
    f0_base: f64,
    amplitude: f64,
    pause_frac: f64,
    vibrato: f64,
    am_depth: f64,
    p_filler: f64,
    p_depression: f64,
    p_positive: f64,
    p_negative: f64,
    p_read_error: f64,
}

impl Voice {
    fn from_traits(t: &[f64; 4]) -> Voice {
        Voice {
            f0_base: 110.0 + 130.0 * t[0],
            amplitude: 0.15 + 0.6 * t[1],
            pause_frac: 0.1 + 0.5 * t[2],
            vibrato: 0.01 + 0.08 * t[3],
            am_depth: 0.1 + 0.35 * t[3],
            p_filler: 0.02 + 0.2 * t[3],
            p_depression: 0.01 + 0.15 * t[3],
            p_positive: 0.04 + 0.06 * (1.0 - t[3]),
            p_negative: 0.01 + 0.05 * t[3],
            p_read_error: 0.01 + 0.12 * t[3],
        }
    }
}

fn derive_rng(parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a_64(parts.join("/").as_bytes()))
}

/// Standard normal via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn clipped_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    (mean + sd * normal(rng)).clamp(lo, hi)
}

fn target_duration(q: QuestionId, rng: &mut ChaCha8Rng) -> f64 {
    match q {
        QuestionId::Q1 => clipped_normal(rng, 64.0, 10.3, 40.0, 90.0),
        QuestionId::Q2 | QuestionId::Q3 | QuestionId::Q4 | QuestionId::Q5 => {
            clipped_normal(rng, 5.0, 1.5, 3.0, 8.0)
        }
        QuestionId::Q6 | QuestionId::Q7 => clipped_normal(rng, 48.6, 10.0, 30.0, 70.0),
    }
}

fn session_traits(base: &[f64; 4], rng: &mut ChaCha8Rng) -> [f64; 4] {
    let mut t = [0.0; 4];
    for (o, &b) in t.iter_mut().zip(base) {
        *o = (b + rng.random_range(-0.03..0.03)).clamp(0.0, 1.0);
    }
    t
}

fn scores_from(t: &[f64; 4], noise_level: f64, rng: &mut ChaCha8Rng) -> Scores {
    let mut noisy = |clean: f64, lo: f64, hi: f64| {
        let v = clean + noise_level * 0.15 * (hi - lo) * normal(rng);
        v.round().clamp(lo, hi)
    };
    Scores {
        stai: noisy(20.0 + 60.0 * t[0], 20.0, 80.0),
        gad7: noisy(21.0 * t[1], 0.0, 21.0),
        psqi: noisy(21.0 * t[2], 0.0, 21.0),
        panas: noisy(10.0 + 40.0 * t[3], 10.0, 50.0),
    }
}

/// Cumulative Zipf weights over the full vocabulary.
fn zipf_cumulative(n: usize) -> Vec<f64> {
    let mut cum = Vec::with_capacity(n);
    let mut total = 0.0;
    for k in 0..n {
        total += 1.0 / (k + 1) as f64;
        cum.push(total);
    }
    for c in cum.iter_mut() {
        *c /= total;
    }
    cum
}

fn zipf_word<'v>(vocab: &[&'v str], cum: &[f64], rng: &mut ChaCha8Rng) -> &'v str {
    let u: f64 = rng.random();
    let idx = cum.partition_point(|&c| c < u).min(vocab.len() - 1);
    vocab[idx]
}

fn pick<'v>(list: &[&'v str], rng: &mut ChaCha8Rng) -> &'v str {
    list[rng.random_range(0..list.len())]
}

/// Lay words onto a timeline. Word length follows the syllable count;
/// gaps are short breath gaps plus occasional real pauses sized to
/// approach the session's pausing fraction.
fn timeline(words: &[String], voice: &Voice, rng: &mut ChaCha8Rng) -> Vec<Token> {
    let f = voice.pause_frac;
    let extra_pause = (0.2 * f / (1.0 - f) - 0.055).max(0.0);
    let mut t = 0.15;
    let mut tokens = Vec::with_capacity(words.len());
    for w in words {
        let dur = (0.06 + 0.07 * syllable_count(w) as f64) * rng.random_range(0.85..1.15);
        tokens.push(Token {
            text: w.clone(),
            start_s: t,
            end_s: t + dur,
            pos: None,
        });
        t += dur + rng.random_range(0.03..0.08);
        if extra_pause > 0.0 && rng.random::<f64>() < 0.3 {
            t += rng.random_range(0.5..1.5) * extra_pause / 0.3;
        }
    }
    tokens
}

fn spontaneous_words(voice: &Voice, target_s: f64, vocab: &[&str], cum: &[f64], rng: &mut ChaCha8Rng) -> Vec<String> {
    // Rough words-per-second for this voice, pauses included.
    let f = voice.pause_frac;
    let cell = 0.2 + 0.055 + (0.2 * f / (1.0 - f) - 0.055).max(0.0);
    let n_words = ((target_s - 0.4) / cell).max(4.0) as usize;
    let mut words: Vec<String> = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        if !words.is_empty() && rng.random::<f64>() < 0.03 {
            words.push(words[words.len() - 1].clone());
            continue;
        }
        let u: f64 = rng.random();
        let w = if u < voice.p_filler {
            pick(&DEFAULT_FILLERS, rng)
        } else if u < voice.p_filler + voice.p_depression {
            pick(DEPRESSION_TERMS, rng)
        } else if u < voice.p_filler + voice.p_depression + voice.p_positive {
            pick(POSITIVE_WORDS, rng)
        } else if u < voice.p_filler + voice.p_depression + voice.p_positive + voice.p_negative {
            pick(NEGATIVE_EXTRA, rng)
        } else {
            zipf_word(vocab, cum, rng)
        };
        words.push(w.to_string());
    }
    words
}

/// A prompt plus the "spoken" rendition with reading errors sprinkled in.
fn read_words(
    voice: &Voice,
    target_s: f64,
    vocab: &[&str],
    cum: &[f64],
    rng: &mut ChaCha8Rng,
) -> (String, Vec<String>) {
    let f = voice.pause_frac;
    let cell = 0.2 + 0.055 + (0.2 * f / (1.0 - f) - 0.055).max(0.0);
    let n_words = ((target_s - 0.4) / cell).max(4.0) as usize;
    let prompt: Vec<String> = (0..n_words)
        .map(|_| zipf_word(vocab, cum, rng).to_string())
        .collect();
    let (p_sub, p_del, p_ins) = (
        0.5 * voice.p_read_error,
        0.25 * voice.p_read_error,
        0.25 * voice.p_read_error,
    );
    let mut spoken = Vec::with_capacity(prompt.len());
    for w in &prompt {
        let u: f64 = rng.random();
        if u < p_del {
            // skipped word
        } else if u < p_del + p_sub {
            spoken.push(zipf_word(vocab, cum, rng).to_string());
        } else {
            spoken.push(w.clone());
        }
        if rng.random::<f64>() < p_ins {
            spoken.push(zipf_word(vocab, cum, rng).to_string());
        }
    }
    if spoken.is_empty() {
        spoken.push(prompt[0].clone());
    }
    (prompt.join(" "), spoken)
}

/// Band-limited pulse-ish waveform table: harmonics at 1/h down to 6 kHz.
fn build_wavetable(f0_base: f64) -> Vec<f64> {
    const N: usize = 2048;
    let h_max = ((6000.0 / f0_base) as usize).clamp(3, 40);
    let mut table = vec![0.0; N];
    for (k, v) in table.iter_mut().enumerate() {
        let ph = TAU * k as f64 / N as f64;
        *v = (1..=h_max).map(|h| (ph * h as f64).sin() / h as f64).sum();
    }
    let peak = table.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for v in table.iter_mut() {
        *v /= peak;
    }
    table
}

fn table_lookup(table: &[f64], phase: f64) -> f64 {
    let x = phase.fract() * table.len() as f64;
    let i = x as usize % table.len();
    let j = (i + 1) % table.len();
    let frac = x - x.floor();
    table[i] * (1.0 - frac) + table[j] * frac
}

/// Harmonic voice over the token timeline, noise floor elsewhere.
/// 10 ms raised-cosine ramps at token edges, 4 Hz amplitude modulation
/// with trait-dependent depth, 5.5 Hz vibrato, mild declination within
/// each token.
fn synth_audio(tokens: &[Token], voice: &Voice, table: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = CANONICAL_RATE as f64;
    let end = tokens.last().map(|t| t.end_s).unwrap_or(0.5) + 0.25;
    let n = (end * fs).ceil() as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|_| 0.001 * (rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    let ramp_len = (0.010 * fs) as usize;
    let mut phase = 0.0f64;
    for tok in tokens {
        let i0 = (tok.start_s * fs) as usize;
        let i1 = ((tok.end_s * fs) as usize).min(n);
        if i1 <= i0 {
            continue;
        }
        let jitter = 1.0 + rng.random_range(-0.03..0.03);
        let len = (i1 - i0) as f64;
        for i in i0..i1 {
            let t = i as f64 / fs;
            let prog = (i - i0) as f64 / len;
            let f0 = voice.f0_base
                * jitter
                * (1.0 + voice.vibrato * (TAU * 5.5 * t).sin())
                * (1.0 - 0.03 * prog);
            phase += f0 / fs;
            let head = (i - i0).min(i1 - 1 - i);
            let ramp = if head < ramp_len {
                0.5 * (1.0 - (std::f64::consts::PI * head as f64 / ramp_len as f64).cos())
            } else {
                1.0
            };
            let am = 1.0 + voice.am_depth * (TAU * 4.0 * t).sin();
            let a = 0.5 * voice.amplitude * am * ramp;
            out[i] = a * table_lookup(table, phase)
                + 0.05 * voice.amplitude * ramp * (rng.random::<f64>() * 2.0 - 1.0);
        }
    }
    out
}

fn write_lexicons(dir: &Path) -> Result<()> {
    let lex_dir = dir.join("lexicons");
    std::fs::create_dir_all(&lex_dir)
        .map_err(|e| Error::io(format!("creating {}", lex_dir.display()), e))?;
    let vocab = full_vocab();
    let mut freq = String::new();
    for (k, w) in vocab.iter().enumerate() {
        let count = (100_000.0 / (k + 1) as f64).round().max(2.0) as u64;
        freq.push_str(&format!("{w}\t{count}\n"));
    }
    let write = |name: &str, content: String| -> Result<()> {
        let path = lex_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    };
    write("word_freq.tsv", freq)?;
    write("depression_terms.txt", list_file(DEPRESSION_TERMS))?;
    write("positive.txt", list_file(POSITIVE_WORDS))?;
    let negative: Vec<&str> = DEPRESSION_TERMS.iter().chain(NEGATIVE_EXTRA).copied().collect();
    write("negative.txt", list_file(&negative))?;
    write("fillers.txt", list_file(&DEFAULT_FILLERS))
}

fn list_file(words: &[&str]) -> String {
    let mut s = String::new();
    for w in words {
        s.push_str(w);
        s.push('\n');
    }
    s
}

fn full_vocab() -> Vec<&'static str> {
    COMMON_WORDS
        .iter()
        .chain(DEPRESSION_TERMS)
        .chain(POSITIVE_WORDS)
        .chain(NEGATIVE_EXTRA)
        .copied()
        .collect()
}

/// Generate a complete corpus under `out_dir`: audio, transcripts,
/// lexicons, a traits sidecar, and the manifest. Returns the manifest.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    if spec.n_subjects < 5 {
        return Err(Error::TooFewSubjects {
            need: 5,
            got: spec.n_subjects,
        });
    }
    assert!(spec.sessions_per_subject >= 1, "need at least one session");
    assert!(
        (0.0..=1.0).contains(&spec.noise_level),
        "noise_level must be within [0,1]"
    );
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_lexicons(out_dir)?;

    let vocab = full_vocab();
    let cum = zipf_cumulative(vocab.len());
    let seed_tag = spec.seed.to_string();

    // One Latin-hypercube cell per subject and trait: a seeded shuffle
    // assigns each subject a distinct stratum, the subject rng places it
    // within the stratum.
    let strata: Vec<Vec<usize>> = (0..4)
        .map(|k| {
            let mut idx: Vec<usize> = (0..spec.n_subjects).collect();
            idx.shuffle(&mut derive_rng(&[&seed_tag, "strata", &k.to_string()]));
            idx
        })
        .collect();

    let mut traits_csv = String::from("subject_id,t1,t2,t3,t4\n");
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    for si in 0..spec.n_subjects {
        let subject_id = format!("S{:03}", si + 1);
        let mut trng = derive_rng(&[&seed_tag, "traits", &subject_id]);
        let base: [f64; 4] = std::array::from_fn(|k| {
            (strata[k][si] as f64 + trng.random::<f64>()) / spec.n_subjects as f64
        });
        traits_csv.push_str(&format!(
            "{subject_id},{:.6},{:.6},{:.6},{:.6}\n",
            base[0], base[1], base[2], base[3]
        ));

        let mut sessions = Vec::with_capacity(spec.sessions_per_subject);
        for sess in 1..=spec.sessions_per_subject as u32 {
            let sess_tag = sess.to_string();
            let mut jrng = derive_rng(&[&seed_tag, &subject_id, &sess_tag, "jitter"]);
            let t = session_traits(&base, &mut jrng);
            let voice = Voice::from_traits(&t);
            let mut srng = derive_rng(&[&seed_tag, &subject_id, &sess_tag, "scores"]);
            let scores = scores_from(&t, spec.noise_level, &mut srng);

            let audio_dir = out_dir.join("audio").join(&subject_id).join(format!("s{sess:02}"));
            let text_dir = out_dir
                .join("transcripts")
                .join(&subject_id)
                .join(format!("s{sess:02}"));
            for d in [&audio_dir, &text_dir] {
                std::fs::create_dir_all(d)
                    .map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
            }

            let table = build_wavetable(voice.f0_base);
            let mut responses = std::collections::BTreeMap::new();
            for q in QuestionId::ALL {
                let q_tag = q.as_str();
                let mut rng = derive_rng(&[&seed_tag, &subject_id, &sess_tag, q_tag]);
                let target = target_duration(q, &mut rng);
                let (prompt, words) = match q {
                    QuestionId::Q1 => (
                        None,
                        spontaneous_words(&voice, target, &vocab, &cum, &mut rng),
                    ),
                    _ => {
                        let (p, w) = read_words(&voice, target, &vocab, &cum, &mut rng);
                        (Some(p), w)
                    }
                };
                let tokens = timeline(&words, &voice, &mut rng);
                let samples = synth_audio(&tokens, &voice, &table, &mut rng);

                let wav_rel = format!("audio/{subject_id}/s{sess:02}/{q_tag}.wav");
                let txt_rel = format!("transcripts/{subject_id}/s{sess:02}/{q_tag}.json");
                write_wav_16bit(&out_dir.join(&wav_rel), &samples, CANONICAL_RATE)?;
                crate::linguistic::save_transcript(
                    &out_dir.join(&txt_rel),
                    &Transcript {
                        tokens,
                        prompt_text: prompt,
                    },
                )?;
                responses.insert(
                    q_tag.to_string(),
                    ResponseEntry {
                        audio: wav_rel,
                        transcript: txt_rel,
                        kind: q.expected_kind(),
                    },
                );
            }
            sessions.push(SessionEntry {
                session_index: sess,
                scores,
                responses,
            });
        }
        subjects.push(SubjectEntry {
            subject_id,
            sessions,
        });
    }

    let traits_path = out_dir.join("traits.csv");
    std::fs::write(&traits_path, traits_csv)
        .map_err(|e| Error::io(format!("writing {}", traits_path.display()), e))?;
    let manifest = Manifest { subjects };
    save_manifest(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_manifest, Measurement};
    use crate::linguistic::load_transcript;
    use crate::selection::pearson;
    use crate::signal_io::decode_wav;

    fn tiny_spec() -> SynthSpec {
        SynthSpec {
            n_subjects: 5,
            sessions_per_subject: 1,
            seed: 9,
            noise_level: 0.2,
        }
    }

    #[test]
    fn word_lists_do_not_collide() {
        let vocab = full_vocab();
        let unique: std::collections::HashSet<&&str> = vocab.iter().collect();
        assert_eq!(unique.len(), vocab.len(), "duplicate vocabulary word");
        for f in DEFAULT_FILLERS {
            assert!(!vocab.contains(&f), "filler {f} should stay out of the vocab");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_subjects: 4,
            ..tiny_spec()
        };
        assert!(matches!(
            generate_synthetic(&spec, dir.path()),
            Err(Error::TooFewSubjects { need: 5, got: 4 })
        ));
    }

    #[test]
    fn corpus_loads_cleanly_and_is_complete() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic(&tiny_spec(), dir.path()).unwrap();
        let ds = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(ds.sessions.len(), 5);
        assert!(ds.excluded.is_empty());
        for s in &ds.sessions {
            assert_eq!(s.responses.len(), 7);
            for (q, r) in &s.responses {
                assert!(r.audio.exists(), "{q}: missing {}", r.audio.display());
                assert!(r.transcript.exists());
            }
        }
        assert!(dir.path().join("lexicons/word_freq.tsv").exists());
        assert!(dir.path().join("traits.csv").exists());
    }

    #[test]
    fn audio_and_transcripts_are_consistent() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic(&tiny_spec(), dir.path()).unwrap();
        let ds = load_manifest(&dir.path().join("manifest.json")).unwrap();
        let session = &ds.sessions[0];

        let q2 = &session.responses[&QuestionId::Q2];
        let wave = decode_wav(&q2.audio).unwrap();
        let dur = wave.duration_s();
        assert!((2.0..12.0).contains(&dur), "Q2 duration {dur}");
        let t = load_transcript(&q2.transcript).unwrap();
        assert!(t.prompt_text.is_some());
        let last_end = t.tokens.last().unwrap().end_s;
        assert!(last_end < dur, "tokens end at {last_end}, audio is {dur}");

        let q1 = &session.responses[&QuestionId::Q1];
        let t1 = load_transcript(&q1.transcript).unwrap();
        assert!(t1.prompt_text.is_none());
        let wave1 = decode_wav(&q1.audio).unwrap();
        assert!((39.0..95.0).contains(&wave1.duration_s()));

        // Voiced parts should actually carry energy.
        let peak = wave.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(peak > 0.05, "peak {peak}");
        assert!(peak <= 1.0);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let spec = tiny_spec();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_synthetic(&spec, dir_a.path()).unwrap();
        generate_synthetic(&spec, dir_b.path()).unwrap();
        for rel in [
            "manifest.json",
            "traits.csv",
            "lexicons/word_freq.tsv",
            "audio/S001/s01/Q1.wav",
            "audio/S003/s01/Q6.wav",
            "transcripts/S002/s01/Q4.json",
        ] {
            let a = std::fs::read(dir_a.path().join(rel)).unwrap();
            let b = std::fs::read(dir_b.path().join(rel)).unwrap();
            assert_eq!(a, b, "{rel} differs between reruns");
        }
    }

    #[test]
    fn different_seeds_give_different_corpora() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_synthetic(&tiny_spec(), dir_a.path()).unwrap();
        generate_synthetic(
            &SynthSpec {
                seed: 10,
                ..tiny_spec()
            },
            dir_b.path(),
        )
        .unwrap();
        let a = std::fs::read(dir_a.path().join("audio/S001/s01/Q2.wav")).unwrap();
        let b = std::fs::read(dir_b.path().join("audio/S001/s01/Q2.wav")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn traits_show_up_in_the_scores() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_subjects: 12,
            sessions_per_subject: 1,
            seed: 4,
            noise_level: 0.0,
        };
        generate_synthetic(&spec, dir.path()).unwrap();
        let ds = load_manifest(&dir.path().join("manifest.json")).unwrap();

        let traits_raw = std::fs::read_to_string(dir.path().join("traits.csv")).unwrap();
        let mut t = std::collections::HashMap::new();
        for line in traits_raw.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let vals: Vec<f64> = cols[1..].iter().map(|v| v.parse().unwrap()).collect();
            t.insert(cols[0].to_string(), vals);
        }
        let col = |k: usize| -> Vec<f64> {
            ds.sessions.iter().map(|s| t[&s.subject_id][k]).collect()
        };
        for (k, m) in [
            (0, Measurement::Stai),
            (1, Measurement::Gad7),
            (2, Measurement::Psqi),
            (3, Measurement::Panas),
        ] {
            let r = pearson(&col(k), &ds.targets(m)).unwrap();
            assert!(r > 0.95, "{m}: trait correlation only {r}");
        }
    }

    #[test]
    fn trait_extremes_shape_the_voice_and_language() {
        // Hand-built voices at the extremes, checked through the
        // generator internals.
        let lo = Voice::from_traits(&[0.0, 0.0, 0.0, 0.0]);
        let hi = Voice::from_traits(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(lo.f0_base, 110.0);
        assert_eq!(hi.f0_base, 240.0);
        assert!(hi.amplitude > 4.0 * lo.amplitude);
        assert!(hi.p_filler > 10.0 * lo.p_filler);

        let vocab = full_vocab();
        let cum = zipf_cumulative(vocab.len());
        let mut rng = derive_rng(&["fillers", "hi"]);
        let hi_words = spontaneous_words(&hi, 64.0, &vocab, &cum, &mut rng);
        let mut rng = derive_rng(&["fillers", "lo"]);
        let lo_words = spontaneous_words(&lo, 64.0, &vocab, &cum, &mut rng);
        let fillers = |words: &[String]| {
            words
                .iter()
                .filter(|w| DEFAULT_FILLERS.contains(&w.as_str()))
                .count() as f64
                / words.len() as f64
        };
        assert!(
            fillers(&hi_words) > fillers(&lo_words) + 0.05,
            "hi {} lo {}",
            fillers(&hi_words),
            fillers(&lo_words)
        );

        let mut rng = derive_rng(&["read", "hi"]);
        let (prompt, spoken) = read_words(&hi, 48.0, &vocab, &cum, &mut rng);
        assert!(!prompt.is_empty());
        let prompt_words: Vec<&str> = prompt.split(' ').collect();
        let diff = prompt_words
            .iter()
            .zip(spoken.iter())
            .filter(|(p, s)| **p != s.as_str())
            .count();
        assert!(diff > 0, "high-error voice read perfectly");
    }

    #[test]
    fn pausing_trait_stretches_the_timeline() {
        let vocab = full_vocab();
        let cum = zipf_cumulative(vocab.len());
        let quiet = Voice::from_traits(&[0.5, 0.5, 1.0, 0.5]);
        let brisk = Voice::from_traits(&[0.5, 0.5, 0.0, 0.5]);
        let words: Vec<String> = {
            let mut rng = derive_rng(&["pause", "words"]);
            (0..60).map(|_| zipf_word(&vocab, &cum, &mut rng).to_string()).collect()
        };
        let mut rng = derive_rng(&["pause", "hi"]);
        let slow = timeline(&words, &quiet, &mut rng);
        let mut rng = derive_rng(&["pause", "lo"]);
        let fast = timeline(&words, &brisk, &mut rng);
        let span = |t: &[Token]| t.last().unwrap().end_s - t[0].start_s;
        assert!(
            span(&slow) > 1.3 * span(&fast),
            "slow {} vs fast {}",
            span(&slow),
            span(&fast)
        );
    }

    #[test]
    fn wavetable_is_normalized_and_periodic() {
        let table = build_wavetable(150.0);
        let peak = table.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
        assert!((table_lookup(&table, 0.0) - table_lookup(&table, 1.0)).abs() < 1e-12);
        assert!((table_lookup(&table, 0.25) - table_lookup(&table, 1.25)).abs() < 1e-12);
    }
}
