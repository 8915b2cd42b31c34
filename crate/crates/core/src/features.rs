//! Response-level vector assembly and session-level concatenation.
//!
//! A response vector is the 2337 acoustic functionals followed by the 17
//! common linguistic features and then the kind-specific tail (3 read
//! alignment rates or 10 spontaneous lexical/sentiment features), giving
//! 2357 for read and 2364 for spontaneous responses. A full session
//! concatenates Q1-Q7 with "Qi." name prefixes into 16506 dims.
//!
//! Vectors are cached on disk as CSV (human-readable) or a compact binary
//! table; both round-trip losslessly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acoustic;
use crate::error::{Error, Result};
use crate::functionals;
use crate::linguistic::{self, LexiconSet, Transcript};
use crate::signal_io::{self, Waveform, DEFAULT_PRE_EMPHASIS};

pub const N_ACOUSTIC: usize = 2337;
pub const N_COMMON: usize = 17;
pub const N_READ: usize = 3;
pub const N_SPONTANEOUS: usize = 10;
pub const READ_DIM: usize = N_ACOUSTIC + N_COMMON + N_READ;
pub const SPONTANEOUS_DIM: usize = N_ACOUSTIC + N_COMMON + N_SPONTANEOUS;
pub const CONCATENATED_DIM: usize = SPONTANEOUS_DIM + 6 * READ_DIM;

/// Named feature vector; names and values always stay in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(names.len(), values.len(), "names/values out of step");
        FeatureVector { names, values }
    }

    pub fn empty() -> Self {
        FeatureVector {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn append(&mut self, mut other: FeatureVector) {
        self.names.append(&mut other.names);
        self.values.append(&mut other.values);
    }

    /// Copy with every name rewritten to "<prefix>.<name>".
    pub fn prefixed(&self, prefix: &str) -> FeatureVector {
        FeatureVector {
            names: self.names.iter().map(|n| format!("{prefix}.{n}")).collect(),
            values: self.values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
}

impl QuestionId {
    pub const ALL: [QuestionId; 7] = [
        QuestionId::Q1,
        QuestionId::Q2,
        QuestionId::Q3,
        QuestionId::Q4,
        QuestionId::Q5,
        QuestionId::Q6,
        QuestionId::Q7,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuestionId::Q1 => "Q1",
            QuestionId::Q2 => "Q2",
            QuestionId::Q3 => "Q3",
            QuestionId::Q4 => "Q4",
            QuestionId::Q5 => "Q5",
            QuestionId::Q6 => "Q6",
            QuestionId::Q7 => "Q7",
        }
    }

    /// Protocol kind: Q1 spontaneous, Q2-Q5 sentence, Q6-Q7 paragraph.
    pub fn expected_kind(&self) -> ResponseKind {
        match self {
            QuestionId::Q1 => ResponseKind::Spontaneous,
            QuestionId::Q2 | QuestionId::Q3 | QuestionId::Q4 | QuestionId::Q5 => {
                ResponseKind::Sentence
            }
            QuestionId::Q6 | QuestionId::Q7 => ResponseKind::Paragraph,
        }
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        QuestionId::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| format!("unknown question id {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Spontaneous,
    Sentence,
    Paragraph,
}

impl ResponseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResponseKind::Spontaneous => "spontaneous",
            ResponseKind::Sentence => "sentence",
            ResponseKind::Paragraph => "paragraph",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ResponseKind::Spontaneous => SPONTANEOUS_DIM,
            _ => READ_DIM,
        }
    }
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spontaneous" => Ok(ResponseKind::Spontaneous),
            "sentence" => Ok(ResponseKind::Sentence),
            "paragraph" => Ok(ResponseKind::Paragraph),
            other => Err(format!("unknown response kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResponseFeatures {
    pub question_id: QuestionId,
    pub kind: ResponseKind,
    pub vector: FeatureVector,
}

#[derive(Debug, Clone)]
pub struct SessionFeatures {
    /// Q1..Q7 in order.
    pub per_question: Vec<ResponseFeatures>,
    pub concatenated: FeatureVector,
}

/// Full single-response pipeline: audio to the fixed-order named vector.
pub fn extract_response(
    wave: &Waveform,
    transcript: &Transcript,
    question_id: QuestionId,
    kind: ResponseKind,
    lex: &LexiconSet,
) -> Result<ResponseFeatures> {
    let frames = signal_io::frame(wave, DEFAULT_PRE_EMPHASIS)?;
    let matrix = acoustic::stack_deltas(&acoustic::supervectors(&frames));
    let mut vector = functionals::apply_functionals(&matrix);
    vector.append(linguistic::common_features(
        transcript,
        wave.duration_s(),
        lex,
    )?);
    match kind {
        ResponseKind::Spontaneous => vector.append(linguistic::spontaneous_features(transcript, lex)?),
        ResponseKind::Sentence | ResponseKind::Paragraph => {
            vector.append(linguistic::read_features(transcript, lex)?)
        }
    }
    assert_eq!(vector.len(), kind.dimension(), "response dimension contract");
    debug_assert!(vector.values().iter().all(|v| v.is_finite()));
    Ok(ResponseFeatures {
        question_id,
        kind,
        vector,
    })
}

/// Assemble a session from its seven responses, enforcing the protocol
/// (Q1 spontaneous, Q2-Q5 sentence, Q6-Q7 paragraph).
pub fn concatenate(
    subject_id: &str,
    session_index: u32,
    responses: Vec<ResponseFeatures>,
) -> Result<SessionFeatures> {
    let incomplete = |reason: String| Error::IncompleteSession {
        subject_id: subject_id.to_string(),
        session_index,
        reason,
    };
    let mut by_question: BTreeMap<QuestionId, ResponseFeatures> = BTreeMap::new();
    for r in responses {
        let q = r.question_id;
        if by_question.insert(q, r).is_some() {
            return Err(incomplete(format!("duplicate {q}")));
        }
    }
    let mut per_question = Vec::with_capacity(7);
    for q in QuestionId::ALL {
        let r = by_question
            .remove(&q)
            .ok_or_else(|| incomplete(format!("missing {q}")))?;
        if r.kind != q.expected_kind() {
            return Err(incomplete(format!(
                "{q} kind mismatch: expected {}, got {}",
                q.expected_kind(),
                r.kind
            )));
        }
        if r.vector.len() != r.kind.dimension() {
            return Err(incomplete(format!(
                "{q} has {} dims, expected {}",
                r.vector.len(),
                r.kind.dimension()
            )));
        }
        per_question.push(r);
    }
    let mut concatenated = FeatureVector::empty();
    for r in &per_question {
        concatenated.append(r.vector.prefixed(r.question_id.as_str()));
    }
    assert_eq!(concatenated.len(), CONCATENATED_DIM);
    Ok(SessionFeatures {
        per_question,
        concatenated,
    })
}

/// Rows of named feature values keyed by (subject, session, question).
/// The question field holds "Q1".."Q7" or "concatenated".
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject_id: String,
    pub session_index: u32,
    pub question_id: String,
    pub values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            rows: Vec::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn push(&mut self, row: FeatureRow) {
        assert_eq!(row.values.len(), self.names.len(), "row width");
        self.rows.push(row);
    }

    /// Deterministic row order regardless of extraction schedule.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.subject_id, a.session_index, &a.question_id)
                .cmp(&(&b.subject_id, b.session_index, &b.question_id))
        });
    }
}

pub fn write_csv(path: &Path, table: &FeatureTable) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::io(format!("writing {}", path.display()), e.into());
    let mut header = vec!["subject_id", "session_index", "question_id"];
    header.extend(table.names.iter().map(String::as_str));
    w.write_record(&header).map_err(io_err)?;
    let mut record = Vec::with_capacity(header.len());
    for row in &table.rows {
        record.clear();
        record.push(row.subject_id.clone());
        record.push(row.session_index.to_string());
        record.push(row.question_id.clone());
        record.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("flushing {}", path.display()), e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<FeatureTable> {
    let malformed = |reason: String| Error::MalformedCache {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    if header.len() < 3
        || &header[0] != "subject_id"
        || &header[1] != "session_index"
        || &header[2] != "question_id"
    {
        return Err(malformed("unexpected header".to_string()));
    }
    let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let mut table = FeatureTable::new(names);
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != table.names.len() + 3 {
            return Err(malformed(format!("row {i} has {} fields", record.len())));
        }
        let session_index: u32 = record[1]
            .parse()
            .map_err(|_| malformed(format!("row {i}: bad session_index {:?}", &record[1])))?;
        let values = record
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| malformed(format!("row {i}: bad float {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        table.push(FeatureRow {
            subject_id: record[0].to_string(),
            session_index,
            question_id: record[2].to_string(),
            values,
        });
    }
    Ok(table)
}

const BINARY_MAGIC: &[u8; 4] = b"VWFC";
const BINARY_VERSION: u32 = 1;

pub fn write_binary(path: &Path, table: &FeatureTable) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(BINARY_MAGIC).map_err(io_err)?;
    w.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(table.names.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for name in &table.names {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
    }
    w.write_all(&(table.rows.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for row in &table.rows {
        w.write_all(&(row.subject_id.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(row.subject_id.as_bytes()).map_err(io_err)?;
        w.write_all(&row.session_index.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(row.question_id.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(row.question_id.as_bytes()).map_err(io_err)?;
        for v in &row.values {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<FeatureTable> {
    let malformed = |reason: &str| Error::MalformedCache {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = BufReader::new(file);

    fn take<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn take_string(r: &mut impl Read) -> std::io::Result<Option<String>> {
        let len = u32::from_le_bytes(take::<4>(r)?) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        Ok(String::from_utf8(buf).ok())
    }
    let io_err = |e: std::io::Error| Error::io(format!("reading {}", path.display()), e);

    if &take::<4>(&mut r).map_err(io_err)? != BINARY_MAGIC {
        return Err(malformed("bad magic"));
    }
    if u32::from_le_bytes(take::<4>(&mut r).map_err(io_err)?) != BINARY_VERSION {
        return Err(malformed("unsupported version"));
    }
    let n_names = u32::from_le_bytes(take::<4>(&mut r).map_err(io_err)?) as usize;
    let mut names = Vec::with_capacity(n_names);
    for _ in 0..n_names {
        names.push(
            take_string(&mut r)
                .map_err(io_err)?
                .ok_or_else(|| malformed("non-utf8 name"))?,
        );
    }
    let n_rows = u64::from_le_bytes(take::<8>(&mut r).map_err(io_err)?) as usize;
    let mut table = FeatureTable::new(names);
    for _ in 0..n_rows {
        let subject_id = take_string(&mut r)
            .map_err(io_err)?
            .ok_or_else(|| malformed("non-utf8 subject id"))?;
        let session_index = u32::from_le_bytes(take::<4>(&mut r).map_err(io_err)?);
        let question_id = take_string(&mut r)
            .map_err(io_err)?
            .ok_or_else(|| malformed("non-utf8 question id"))?;
        let mut values = Vec::with_capacity(table.names.len());
        for _ in 0..table.names.len() {
            values.push(f64::from_le_bytes(take::<8>(&mut r).map_err(io_err)?));
        }
        table.push(FeatureRow {
            subject_id,
            session_index,
            question_id,
            values,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistic::{LexiconSet, Token, Transcript};
    use crate::signal_io::CANONICAL_RATE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn tiny_wave(seed: u64, dur_s: f64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (dur_s * CANONICAL_RATE as f64) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / CANONICAL_RATE as f64;
                0.3 * (2.0 * std::f64::consts::PI * 150.0 * t).sin()
                    + 0.02 * rng.random_range(-1.0..1.0)
            })
            .collect();
        Waveform::new(samples, CANONICAL_RATE)
    }

    fn tokens(words: &[&str]) -> Vec<Token> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                text: w.to_string(),
                start_s: 0.3 * i as f64,
                end_s: 0.3 * i as f64 + 0.25,
                pos: None,
            })
            .collect()
    }

    fn read_transcript() -> Transcript {
        Transcript {
            tokens: tokens(&["the", "sun", "rose", "early"]),
            prompt_text: Some("the sun rose early".to_string()),
        }
    }

    fn spontaneous_transcript() -> Transcript {
        Transcript {
            tokens: tokens(&["um", "i", "slept", "badly", "today"]),
            prompt_text: None,
        }
    }

    fn extract(kind: ResponseKind, q: QuestionId, seed: u64) -> ResponseFeatures {
        let t = match kind {
            ResponseKind::Spontaneous => spontaneous_transcript(),
            _ => read_transcript(),
        };
        extract_response(&tiny_wave(seed, 1.2), &t, q, kind, &LexiconSet::test_fixture()).unwrap()
    }

    #[test]
    fn read_response_has_2357_dims() {
        let r = extract(ResponseKind::Sentence, QuestionId::Q2, 1);
        assert_eq!(r.vector.len(), 2357);
        assert_eq!(r.vector.names()[0], "mfcc0.mean");
        assert_eq!(r.vector.names()[2337], "ling.pos_ratio_noun");
        assert_eq!(r.vector.names()[2356], "ling.substitution_rate");
    }

    #[test]
    fn spontaneous_response_has_2364_dims() {
        let r = extract(ResponseKind::Spontaneous, QuestionId::Q1, 2);
        assert_eq!(r.vector.len(), 2364);
        assert_eq!(r.vector.names()[2363], "ling.sentiment_neg");
        let unique: HashSet<&String> = r.vector.names().iter().collect();
        assert_eq!(unique.len(), 2364);
    }

    #[test]
    fn extraction_is_bitwise_deterministic() {
        let a = extract(ResponseKind::Sentence, QuestionId::Q3, 7);
        let b = extract(ResponseKind::Sentence, QuestionId::Q3, 7);
        assert_eq!(a.vector, b.vector);
    }

    fn full_session() -> Vec<ResponseFeatures> {
        QuestionId::ALL
            .iter()
            .map(|&q| extract(q.expected_kind(), q, 40 + q.as_str().as_bytes()[1] as u64))
            .collect()
    }

    #[test]
    fn concatenation_reaches_16506_dims_in_order() {
        let responses = full_session();
        let q1 = responses[0].vector.clone();
        let s = concatenate("s01", 1, responses).unwrap();
        assert_eq!(s.concatenated.len(), 16506);
        let unique: HashSet<&String> = s.concatenated.names().iter().collect();
        assert_eq!(unique.len(), 16506);
        assert_eq!(s.concatenated.names()[0], "Q1.mfcc0.mean");
        assert_eq!(&s.concatenated.values()[..2364], q1.values());
        assert!(s.concatenated.names()[2364].starts_with("Q2."));
    }

    #[test]
    fn missing_question_is_incomplete() {
        let mut responses = full_session();
        responses.remove(3);
        match concatenate("s01", 2, responses) {
            Err(Error::IncompleteSession { reason, .. }) => {
                assert!(reason.contains("missing Q4"), "{reason}");
            }
            other => panic!("expected IncompleteSession, got {other:?}"),
        }
    }

    #[test]
    fn kind_mismatch_is_incomplete() {
        let mut responses = full_session();
        responses[0] = extract(ResponseKind::Sentence, QuestionId::Q1, 9);
        match concatenate("s01", 3, responses) {
            Err(Error::IncompleteSession { reason, .. }) => {
                assert!(reason.contains("kind mismatch"), "{reason}");
            }
            other => panic!("expected IncompleteSession, got {other:?}"),
        }
    }

    fn random_table(seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..6).map(|i| format!("feat{i}.mean")).collect();
        let mut t = FeatureTable::new(names);
        for s in 0..3 {
            for q in ["Q1", "Q2", "concatenated"] {
                t.push(FeatureRow {
                    subject_id: format!("subj{s:02}"),
                    session_index: s + 1,
                    question_id: q.to_string(),
                    values: (0..6)
                        .map(|_| rng.random_range(-1.0f64..1.0) * 10f64.powi(rng.random_range(-8..8)))
                        .collect(),
                });
            }
        }
        t
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.csv");
        let table = random_table(31);
        write_csv(&path, &table).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn binary_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let table = random_table(32);
        write_binary(&path, &table).unwrap();
        let back = read_binary(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn corrupt_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPE else entirely").unwrap();
        match read_binary(&path) {
            Err(Error::MalformedCache { .. }) => {}
            other => panic!("expected MalformedCache, got {other:?}"),
        }
    }

    #[test]
    fn sorting_orders_rows_deterministically() {
        let mut t = random_table(33);
        t.rows.reverse();
        t.sort_rows();
        let keys: Vec<_> = t
            .rows()
            .iter()
            .map(|r| (r.subject_id.clone(), r.session_index, r.question_id.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
