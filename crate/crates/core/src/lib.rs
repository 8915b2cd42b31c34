//! Voice-based well-being estimation pipeline.
//!
//! The library covers the full path from WAV files to evaluated predictions:
//!
//! 1. [`signal_io`] decodes audio, canonicalizes it to 16 kHz mono, and cuts
//!    25 ms / 10 ms frames.
//! 2. [`acoustic`] computes a 41-dimensional per-frame supervector (MFCC,
//!    PLP, prosody, voice quality) and stacks delta / delta-delta to 123
//!    columns.
//! 3. [`functionals`] collapses the frame matrix with 19 statistics per
//!    column into a 2,337-dimensional response vector.
//! 4. [`linguistic`] adds transcript features: 17 for every response, 3 more
//!    for read responses, 10 more for spontaneous ones.
//! 5. [`features`] assembles response vectors (2,357 read / 2,364
//!    spontaneous), session-level concatenations (16,506), and the on-disk
//!    feature caches.
//! 6. [`selection`] ranks features by absolute Pearson correlation with a
//!    target score and keeps the top n (default 88).
//! 7. [`model`] trains the FC-DNN regressor (4 x 256 ReLU, dropout 0.5,
//!    Adam, 100 epochs) from scratch.
//! 8. [`eval`] runs subject-independent 5-fold cross-validation and scores
//!    predictions with the concordance correlation coefficient plus a
//!    permutation significance test.
//! 9. [`data`] models sessions/scores, validates manifests, and generates
//!    the synthetic test corpus.
//!
//! Everything seeded is deterministic: same inputs and seeds give
//! byte-identical outputs.

pub mod acoustic;
pub mod data;
pub mod error;
pub mod features;
pub mod functionals;
pub mod linguistic;
pub mod model;
pub mod selection;
pub mod signal_io;

pub mod eval;

pub use error::{Error, Result};
