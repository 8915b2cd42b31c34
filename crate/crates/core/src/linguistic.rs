//! Transcript-derived features: 17 common descriptors for every response,
//! 3 alignment-error rates for read responses, and 10 lexical/sentiment
//! descriptors for spontaneous responses.
//!
//! Transcripts are word-level with start/end times and an optional POS tag;
//! when tags are missing a small closed-class list marks pronouns and
//! everything else falls back to OTHER. Lexicons are plain text files; the
//! frequency table drives a rank-percentile notion of word popularity.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::functionals::percentile;

/// Inter-token gap longer than this counts as a pause.
pub const PAUSE_THRESHOLD_S: f64 = 0.15;

pub const COMMON_NAMES: [&str; 17] = [
    "ling.pos_ratio_noun",
    "ling.pos_ratio_verb",
    "ling.pos_ratio_adj",
    "ling.pos_ratio_adv",
    "ling.pos_ratio_pron",
    "ling.pos_ratio_other",
    "ling.speech_rate",
    "ling.articulation_rate",
    "ling.mean_syllable_dur",
    "ling.std_syllable_dur",
    "ling.filler_ratio",
    "ling.repetition_ratio",
    "ling.mean_word_dur",
    "ling.pause_ratio",
    "ling.mean_pause_dur",
    "ling.pauses_per_min",
    "ling.type_token_ratio",
];

pub const READ_NAMES: [&str; 3] = [
    "ling.insertion_rate",
    "ling.deletion_rate",
    "ling.substitution_rate",
];

pub const SPONTANEOUS_NAMES: [&str; 10] = [
    "ling.popularity_p10",
    "ling.popularity_p25",
    "ling.popularity_p50",
    "ling.popularity_p75",
    "ling.popularity_p90",
    "ling.popularity_mean",
    "ling.depression_term_ratio",
    "ling.depression_term_types",
    "ling.sentiment_pos",
    "ling.sentiment_neg",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<PosTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
}

impl Transcript {
    /// Token times must be non-negative with non-decreasing starts and
    /// end >= start per token.
    pub fn validate(&self) -> Result<()> {
        let mut prev_start = 0.0f64;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.text.is_empty() {
                return Err(Error::MalformedTranscript(format!("token {i} is empty")));
            }
            if !(t.start_s.is_finite() && t.end_s.is_finite()) || t.start_s < 0.0 {
                return Err(Error::MalformedTranscript(format!(
                    "token {i} has bad times [{}, {}]",
                    t.start_s, t.end_s
                )));
            }
            if t.end_s < t.start_s {
                return Err(Error::MalformedTranscript(format!(
                    "token {i} ends before it starts"
                )));
            }
            if t.start_s < prev_start {
                return Err(Error::MalformedTranscript(format!(
                    "token {i} starts before its predecessor"
                )));
            }
            prev_start = t.start_s;
        }
        Ok(())
    }
}

pub fn load_transcript(path: &Path) -> Result<Transcript> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut t: Transcript = serde_json::from_str(&raw)
        .map_err(|e| Error::MalformedTranscript(format!("{}: {e}", path.display())))?;
    for token in &mut t.tokens {
        token.text = token.text.to_lowercase();
    }
    t.validate()
        .map_err(|e| Error::MalformedTranscript(format!("{}: {e}", path.display())))?;
    Ok(t)
}

pub fn save_transcript(path: &Path, t: &Transcript) -> Result<()> {
    let json = serde_json::to_string_pretty(t).expect("transcript serializes");
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Lowercased word tokens of free text: whitespace-split with punctuation
/// trimmed from both ends.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Vowel-group syllable estimate (aeiouy runs), minimum one per word.
pub fn syllable_count(word: &str) -> usize {
    let mut groups = 0;
    let mut in_group = false;
    for c in word.chars() {
        let vowel = matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    groups.max(1)
}

const PRONOUNS: [&str; 41] = [
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my", "your",
    "his", "its", "our", "their", "mine", "yours", "hers", "ours", "theirs", "myself", "yourself",
    "himself", "herself", "itself", "ourselves", "yourselves", "themselves", "this", "that",
    "these", "those", "who", "whom", "whose", "which", "what", "anyone",
];

fn fallback_tag(word: &str) -> PosTag {
    if PRONOUNS.contains(&word) {
        PosTag::Pron
    } else {
        PosTag::Other
    }
}

/// Word lists used by the linguistic features. All lookups lowercase.
pub struct LexiconSet {
    word_frequency: HashMap<String, u64>,
    sorted_counts: Vec<u64>,
    depression_terms: HashSet<String>,
    positive: HashSet<String>,
    negative: HashSet<String>,
    fillers: HashSet<String>,
}

pub const DEFAULT_FILLERS: [&str; 6] = ["uh", "um", "er", "ah", "hmm", "like"];

impl LexiconSet {
    pub fn new(
        word_frequency: HashMap<String, u64>,
        depression_terms: HashSet<String>,
        positive: HashSet<String>,
        negative: HashSet<String>,
    ) -> Self {
        let lower_map: HashMap<String, u64> = word_frequency
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        let mut sorted_counts: Vec<u64> = lower_map.values().copied().collect();
        sorted_counts.sort_unstable();
        let lower_set = |s: HashSet<String>| s.into_iter().map(|w| w.to_lowercase()).collect();
        LexiconSet {
            word_frequency: lower_map,
            sorted_counts,
            depression_terms: lower_set(depression_terms),
            positive: lower_set(positive),
            negative: lower_set(negative),
            fillers: DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_fillers(mut self, fillers: HashSet<String>) -> Self {
        self.fillers = fillers.into_iter().map(|w| w.to_lowercase()).collect();
        self
    }

    /// Load from a directory with the conventional file names:
    /// word_freq.tsv, depression_terms.txt, positive.txt, negative.txt,
    /// and optionally fillers.txt (defaults apply when absent).
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let freq_path = dir.join("word_freq.tsv");
        let word_frequency = load_frequency_table(&freq_path)?;
        let lex = LexiconSet::new(
            word_frequency,
            load_term_file(&dir.join("depression_terms.txt"))?,
            load_term_file(&dir.join("positive.txt"))?,
            load_term_file(&dir.join("negative.txt"))?,
        );
        let fillers_path = dir.join("fillers.txt");
        if fillers_path.exists() {
            Ok(lex.with_fillers(load_term_file(&fillers_path)?))
        } else {
            Ok(lex)
        }
    }

    pub fn is_filler(&self, word: &str) -> bool {
        self.fillers.contains(&word.to_lowercase())
    }

    pub fn is_depression_term(&self, word: &str) -> bool {
        self.depression_terms.contains(&word.to_lowercase())
    }

    pub fn is_positive(&self, word: &str) -> bool {
        self.positive.contains(&word.to_lowercase())
    }

    pub fn is_negative(&self, word: &str) -> bool {
        self.negative.contains(&word.to_lowercase())
    }

    /// Rank percentile of the word's corpus count: the fraction of
    /// vocabulary entries whose count is less than or equal to it.
    /// Out-of-vocabulary words score 0.
    pub fn popularity(&self, word: &str) -> f64 {
        match self.word_frequency.get(&word.to_lowercase()) {
            None => 0.0,
            Some(&count) => {
                let below = self.sorted_counts.partition_point(|&c| c <= count);
                below as f64 / self.sorted_counts.len() as f64
            }
        }
    }

    #[cfg(test)]
    pub fn test_fixture() -> Self {
        let freq: HashMap<String, u64> = [
            ("the", 100),
            ("cat", 10),
            ("sat", 8),
            ("sun", 50),
            ("rose", 6),
            ("early", 12),
            ("i", 90),
            ("slept", 5),
            ("badly", 3),
            ("today", 20),
            ("dog", 9),
            ("mat", 4),
        ]
        .into_iter()
        .map(|(w, c)| (w.to_string(), c))
        .collect();
        let set = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        LexiconSet::new(
            freq,
            set(&["sad", "tired", "badly", "empty"]),
            set(&["good", "happy", "calm"]),
            set(&["sad", "bad", "awful"]),
        )
    }
}

fn load_frequency_table(path: &Path) -> Result<HashMap<String, u64>> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut map = HashMap::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (word, count) = line.split_once('\t').ok_or_else(|| {
            Error::MalformedTranscript(format!("{}:{}: expected word<TAB>count", path.display(), i + 1))
        })?;
        let count = u64::from_str(count.trim()).map_err(|_| {
            Error::MalformedTranscript(format!("{}:{}: bad count {count:?}", path.display(), i + 1))
        })?;
        map.insert(word.trim().to_lowercase(), count);
    }
    if map.is_empty() {
        return Err(Error::EmptyLexicon(path.to_path_buf()));
    }
    Ok(map)
}

fn load_term_file(path: &Path) -> Result<HashSet<String>> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let set: HashSet<String> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect();
    if set.is_empty() {
        return Err(Error::EmptyLexicon(path.to_path_buf()));
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentCounts {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub hits: usize,
    pub ref_len: usize,
}

/// Minimum-edit-distance alignment with unit costs. On ties the traceback
/// prefers the diagonal (hit or substitution), then deletion, then
/// insertion, so a substitution never degrades into an insert+delete pair.
pub fn align(ref_tokens: &[&str], hyp_tokens: &[&str]) -> Result<AlignmentCounts> {
    if ref_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (m, n) = (ref_tokens.len(), hyp_tokens.len());
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut cost = vec![0u32; (m + 1) * (n + 1)];
    for i in 1..=m {
        cost[idx(i, 0)] = i as u32;
    }
    for j in 1..=n {
        cost[idx(0, j)] = j as u32;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = cost[idx(i - 1, j - 1)] + u32::from(ref_tokens[i - 1] != hyp_tokens[j - 1]);
            let del = cost[idx(i - 1, j)] + 1;
            let ins = cost[idx(i, j - 1)] + 1;
            cost[idx(i, j)] = sub.min(del).min(ins);
        }
    }

    let mut counts = AlignmentCounts {
        insertions: 0,
        deletions: 0,
        substitutions: 0,
        hits: 0,
        ref_len: m,
    };
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = cost[idx(i, j)];
        if i > 0 && j > 0 {
            let equal = ref_tokens[i - 1] == hyp_tokens[j - 1];
            if cost[idx(i - 1, j - 1)] + u32::from(!equal) == here {
                if equal {
                    counts.hits += 1;
                } else {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[idx(i - 1, j)] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    debug_assert_eq!(counts.hits + counts.substitutions + counts.deletions, m);
    Ok(counts)
}

/// The 17 features shared by every response kind.
pub fn common_features(
    t: &Transcript,
    audio_duration_s: f64,
    lex: &LexiconSet,
) -> Result<FeatureVector> {
    if t.tokens.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    if audio_duration_s <= 0.0 {
        return Err(Error::NonPositiveDuration(audio_duration_s));
    }
    let n = t.tokens.len() as f64;

    let mut pos_counts = [0.0f64; 6];
    for token in &t.tokens {
        let tag = token.pos.unwrap_or_else(|| fallback_tag(&token.text));
        let slot = match tag {
            PosTag::Noun => 0,
            PosTag::Verb => 1,
            PosTag::Adj => 2,
            PosTag::Adv => 3,
            PosTag::Pron => 4,
            PosTag::Other => 5,
        };
        pos_counts[slot] += 1.0;
    }

    let spans: Vec<f64> = t.tokens.iter().map(|tok| tok.end_s - tok.start_s).collect();
    let sum_spans: f64 = spans.iter().sum();

    let syllable_durs: Vec<f64> = t
        .tokens
        .iter()
        .zip(&spans)
        .map(|(tok, &span)| span / syllable_count(&tok.text) as f64)
        .collect();
    let mean_syl = syllable_durs.iter().sum::<f64>() / n;
    let std_syl = (syllable_durs
        .iter()
        .map(|d| (d - mean_syl) * (d - mean_syl))
        .sum::<f64>()
        / n)
        .sqrt();

    let fillers = t.tokens.iter().filter(|tok| lex.is_filler(&tok.text)).count();
    let repetitions = t
        .tokens
        .windows(2)
        .filter(|w| w[0].text == w[1].text)
        .count();

    let gaps: Vec<f64> = t
        .tokens
        .windows(2)
        .map(|w| w[1].start_s - w[0].end_s)
        .collect();
    let pauses: Vec<f64> = gaps
        .iter()
        .copied()
        .filter(|&g| g > PAUSE_THRESHOLD_S)
        .collect();
    let mean_pause = if pauses.is_empty() {
        0.0
    } else {
        pauses.iter().sum::<f64>() / pauses.len() as f64
    };

    let distinct: HashSet<&str> = t.tokens.iter().map(|tok| tok.text.as_str()).collect();

    let values = vec![
        pos_counts[0] / n,
        pos_counts[1] / n,
        pos_counts[2] / n,
        pos_counts[3] / n,
        pos_counts[4] / n,
        pos_counts[5] / n,
        n / audio_duration_s,
        if sum_spans > 0.0 { n / sum_spans } else { 0.0 },
        mean_syl,
        std_syl,
        fillers as f64 / n,
        repetitions as f64 / n,
        sum_spans / n,
        (audio_duration_s - sum_spans).max(0.0) / audio_duration_s,
        mean_pause,
        pauses.len() as f64 / (audio_duration_s / 60.0),
        distinct.len() as f64 / n,
    ];
    Ok(FeatureVector::new(
        COMMON_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    ))
}

/// Read-response features: insertion/deletion/substitution rates against
/// the prompt.
pub fn read_features(t: &Transcript, _lex: &LexiconSet) -> Result<FeatureVector> {
    let prompt = t.prompt_text.as_ref().ok_or(Error::MissingPrompt)?;
    let ref_tokens = tokenize(prompt);
    let ref_refs: Vec<&str> = ref_tokens.iter().map(String::as_str).collect();
    let hyp_refs: Vec<&str> = t.tokens.iter().map(|tok| tok.text.as_str()).collect();
    let counts = align(&ref_refs, &hyp_refs)?;
    let ref_len = counts.ref_len as f64;
    Ok(FeatureVector::new(
        READ_NAMES.iter().map(|s| s.to_string()).collect(),
        vec![
            counts.insertions as f64 / ref_len,
            counts.deletions as f64 / ref_len,
            counts.substitutions as f64 / ref_len,
        ],
    ))
}

/// Spontaneous-response features: popularity distribution, depression-term
/// usage, and sentiment lexicon hits.
pub fn spontaneous_features(t: &Transcript, lex: &LexiconSet) -> Result<FeatureVector> {
    if t.tokens.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let n = t.tokens.len() as f64;

    let mut pops: Vec<f64> = t
        .tokens
        .iter()
        .map(|tok| lex.popularity(&tok.text))
        .collect();
    let pop_mean = pops.iter().sum::<f64>() / n;
    pops.sort_by(f64::total_cmp);

    let depression_hits = t
        .tokens
        .iter()
        .filter(|tok| lex.is_depression_term(&tok.text))
        .count();
    let distinct: HashSet<&str> = t.tokens.iter().map(|tok| tok.text.as_str()).collect();
    let distinct_hits = distinct
        .iter()
        .filter(|w| lex.is_depression_term(w))
        .count();
    let positive = t.tokens.iter().filter(|tok| lex.is_positive(&tok.text)).count();
    let negative = t.tokens.iter().filter(|tok| lex.is_negative(&tok.text)).count();

    let values = vec![
        percentile(&pops, 0.10),
        percentile(&pops, 0.25),
        percentile(&pops, 0.50),
        percentile(&pops, 0.75),
        percentile(&pops, 0.90),
        pop_mean,
        depression_hits as f64 / n,
        distinct_hits as f64 / distinct.len() as f64,
        positive as f64 / n,
        negative as f64 / n,
    ];
    Ok(FeatureVector::new(
        SPONTANEOUS_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    ))
}
