//! Dataset layer: score scales, session manifests, and validation.
//!
//! A manifest lists subjects, their sessions, and the seven recorded
//! responses per session. Loading returns the sessions that pass
//! validation plus an exclusion report for the rest; malformed JSON or
//! schema violations are hard errors, out-of-range scores and incomplete
//! response sets are per-session exclusions.

pub mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{QuestionId, ResponseKind};

/// FNV-1a, 64-bit. Used wherever a stable content-derived seed or hash is
/// needed, so artifacts do not depend on the platform's default hasher.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The four self-report scales a session carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Measurement {
    Stai,
    Gad7,
    Psqi,
    Panas,
}

impl Measurement {
    pub const ALL: [Measurement; 4] = [
        Measurement::Stai,
        Measurement::Gad7,
        Measurement::Psqi,
        Measurement::Panas,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Measurement::Stai => "STAI",
            Measurement::Gad7 => "GAD7",
            Measurement::Psqi => "PSQI",
            Measurement::Panas => "PANAS",
        }
    }

    pub fn field_name(&self) -> &'static str {
        match self {
            Measurement::Stai => "stai",
            Measurement::Gad7 => "gad7",
            Measurement::Psqi => "psqi",
            Measurement::Panas => "panas",
        }
    }

    /// Inclusive valid range of the scale.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Measurement::Stai => (20.0, 80.0),
            Measurement::Gad7 => (0.0, 21.0),
            Measurement::Psqi => (0.0, 21.0),
            Measurement::Panas => (10.0, 50.0),
        }
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measurement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Measurement::ALL
            .into_iter()
            .find(|m| s.eq_ignore_ascii_case(m.as_str()))
            .ok_or_else(|| format!("unknown measurement {s:?} (expected STAI, GAD7, PSQI, or PANAS)"))
    }
}

/// Which features feed a model: one question's responses, or the
/// session-level concatenation of all seven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    #[serde(rename = "concatenated")]
    Concatenated,
}

impl Source {
    pub const ALL: [Source; 8] = [
        Source::Q1,
        Source::Q2,
        Source::Q3,
        Source::Q4,
        Source::Q5,
        Source::Q6,
        Source::Q7,
        Source::Concatenated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Q1 => "Q1",
            Source::Q2 => "Q2",
            Source::Q3 => "Q3",
            Source::Q4 => "Q4",
            Source::Q5 => "Q5",
            Source::Q6 => "Q6",
            Source::Q7 => "Q7",
            Source::Concatenated => "concatenated",
        }
    }

    pub fn table_label(&self) -> &'static str {
        match self {
            Source::Concatenated => "Concatenated",
            other => other.as_str(),
        }
    }

    pub fn question(&self) -> Option<QuestionId> {
        match self {
            Source::Concatenated => None,
            other => other.as_str().parse().ok(),
        }
    }

    pub fn from_question(q: QuestionId) -> Source {
        match q {
            QuestionId::Q1 => Source::Q1,
            QuestionId::Q2 => Source::Q2,
            QuestionId::Q3 => Source::Q3,
            QuestionId::Q4 => Source::Q4,
            QuestionId::Q5 => Source::Q5,
            QuestionId::Q6 => Source::Q6,
            QuestionId::Q7 => Source::Q7,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Source::ALL
            .into_iter()
            .find(|v| s.eq_ignore_ascii_case(v.as_str()))
            .ok_or_else(|| format!("unknown source {s:?} (expected Q1..Q7 or concatenated)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub stai: f64,
    pub gad7: f64,
    pub psqi: f64,
    pub panas: f64,
}

impl Scores {
    pub fn get(&self, m: Measurement) -> f64 {
        match m {
            Measurement::Stai => self.stai,
            Measurement::Gad7 => self.gad7,
            Measurement::Psqi => self.psqi,
            Measurement::Panas => self.panas,
        }
    }

    /// First out-of-range scale in fixed order, as an exclusion reason.
    pub fn out_of_range_reason(&self) -> Option<String> {
        for m in Measurement::ALL {
            let (lo, hi) = m.range();
            let v = self.get(m);
            if !v.is_finite() || v < lo || v > hi {
                return Some(format!(
                    "{} out of range [{},{}]",
                    m.field_name(),
                    lo as i64,
                    hi as i64
                ));
            }
        }
        None
    }
}

/// Manifest schema, written and read as JSON. Paths are relative to the
/// manifest file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_index: u32,
    pub scores: Scores,
    pub responses: BTreeMap<String, ResponseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub audio: String,
    pub transcript: String,
    pub kind: ResponseKind,
}

/// A retained session with paths resolved against the manifest location.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRef {
    pub subject_id: String,
    pub session_index: u32,
    pub scores: Scores,
    pub responses: BTreeMap<QuestionId, ResponseRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRef {
    pub audio: PathBuf,
    pub transcript: PathBuf,
    pub kind: ResponseKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub subject_id: String,
    pub session_index: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub sessions: Vec<SessionRef>,
    pub excluded: Vec<Exclusion>,
}

impl Dataset {
    pub fn subject_ids(&self) -> Vec<String> {
        self.sessions.iter().map(|s| s.subject_id.clone()).collect()
    }

    pub fn targets(&self, m: Measurement) -> Vec<f64> {
        self.sessions.iter().map(|s| s.scores.get(m)).collect()
    }
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parse and validate a manifest. Sessions failing validation are moved
/// to the exclusion report; structural problems fail the whole load.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let malformed = |reason: String| Error::MalformedManifest {
        path: path.to_path_buf(),
        reason,
    };
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();

    let mut seen_subjects = std::collections::HashSet::new();
    let mut dataset = Dataset::default();
    for subject in &manifest.subjects {
        if !seen_subjects.insert(subject.subject_id.clone()) {
            return Err(malformed(format!(
                "duplicate subject_id {:?}",
                subject.subject_id
            )));
        }
        let mut seen_sessions = std::collections::HashSet::new();
        for session in &subject.sessions {
            if session.session_index == 0 {
                return Err(malformed(format!(
                    "subject {:?}: session_index must be >= 1",
                    subject.subject_id
                )));
            }
            if !seen_sessions.insert(session.session_index) {
                return Err(malformed(format!(
                    "subject {:?}: duplicate session_index {}",
                    subject.subject_id, session.session_index
                )));
            }
            let mut responses = BTreeMap::new();
            for (key, entry) in &session.responses {
                let q: QuestionId = key.parse().map_err(|_| {
                    malformed(format!(
                        "subject {:?} session {}: unknown question {key:?}",
                        subject.subject_id, session.session_index
                    ))
                })?;
                responses.insert(
                    q,
                    ResponseRef {
                        audio: base.join(&entry.audio),
                        transcript: base.join(&entry.transcript),
                        kind: entry.kind,
                    },
                );
            }

            let mut exclude = session.scores.out_of_range_reason();
            if exclude.is_none() {
                let complete = QuestionId::ALL.iter().all(|q| {
                    responses
                        .get(q)
                        .is_some_and(|r| r.kind == q.expected_kind())
                });
                if !complete || responses.len() != QuestionId::ALL.len() {
                    exclude = Some("incomplete".to_string());
                }
            }
            match exclude {
                Some(reason) => dataset.excluded.push(Exclusion {
                    subject_id: subject.subject_id.clone(),
                    session_index: session.session_index,
                    reason,
                }),
                None => dataset.sessions.push(SessionRef {
                    subject_id: subject.subject_id.clone(),
                    session_index: session.session_index,
                    scores: session.scores,
                    responses,
                }),
            }
        }
    }
    dataset
        .sessions
        .sort_by(|a, b| (&a.subject_id, a.session_index).cmp(&(&b.subject_id, b.session_index)));
    dataset
        .excluded
        .sort_by(|a, b| (&a.subject_id, a.session_index).cmp(&(&b.subject_id, b.session_index)));
    Ok(dataset)
}
