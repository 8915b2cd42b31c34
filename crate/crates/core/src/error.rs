//! Crate-wide error type. One enum rather than per-module enums so the
//! pipeline stages compose with `?` without conversion boilerplate.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),

    #[error("audio too short: {0}")]
    EmptyAudio(String),

    #[error("empty reference token list")]
    EmptyReference,

    #[error("transcript has no tokens")]
    EmptyTranscript,

    #[error("audio duration must be positive, got {0}")]
    NonPositiveDuration(f64),

    #[error("read response requires prompt_text in the transcript")]
    MissingPrompt,

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("n = {n} exceeds feature count {available}")]
    NTooLarge { n: usize, available: usize },

    #[error("input dimension {got} does not match model input {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("need at least {need} subjects for {need}-fold cross-validation, got {got}")]
    TooFewSubjects { need: usize, got: usize },

    #[error("n_perm = {0} is below the 1000-permutation floor")]
    TooFewPermutations(usize),

    #[error("incomplete session {subject_id}/{session_index}: {reason}")]
    IncompleteSession {
        subject_id: String,
        session_index: u32,
        reason: String,
    },

    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("malformed feature cache {path}: {reason}")]
    MalformedCache { path: PathBuf, reason: String },

    #[error("empty lexicon file {0}")]
    EmptyLexicon(PathBuf),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
