//! Feature cache extraction: one CSV per question plus one for the
//! concatenated session vectors, rows sorted by (subject, session) no
//! matter how the worker pool schedules the sessions. A state file of
//! content hashes makes reruns skip everything that hasn't changed.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::Path;
use std::sync::{mpsc, Mutex};

use serde::{Deserialize, Serialize};

use voicewell_core::data::{fnv1a_64, Dataset, SessionRef};
use voicewell_core::features::{self, FeatureRow, FeatureTable, QuestionId};
use voicewell_core::linguistic::{self, LexiconSet};
use voicewell_core::signal_io;
use voicewell_core::{Error, Result};

pub const STATE_FILE: &str = "extract_state.json";
const STATE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ExtractState {
    version: u32,
    /// "subject/session" -> content hash of its response files.
    sessions: BTreeMap<String, String>,
}

pub struct ExtractOutcome {
    pub extracted: usize,
    pub cached: usize,
    pub failed: Vec<(String, Error)>,
}

fn session_key(s: &SessionRef) -> String {
    format!("{}/{}", s.subject_id, s.session_index)
}

/// Deterministic fingerprint of everything extraction reads for a session.
fn session_hash(s: &SessionRef) -> Result<String> {
    let mut acc = String::new();
    for (q, r) in &s.responses {
        let audio = std::fs::read(&r.audio)
            .map_err(|e| Error::io(format!("reading {}", r.audio.display()), e))?;
        let transcript = std::fs::read(&r.transcript)
            .map_err(|e| Error::io(format!("reading {}", r.transcript.display()), e))?;
        acc.push_str(&format!(
            "{q}:{}:{:016x}:{:016x};",
            r.kind.as_str(),
            fnv1a_64(&audio),
            fnv1a_64(&transcript)
        ));
    }
    Ok(format!("{:016x}", fnv1a_64(acc.as_bytes())))
}

fn load_state(path: &Path) -> BTreeMap<String, String> {
    let Ok(raw) = std::fs::read_to_string(path) else {
        return BTreeMap::new();
    };
    match serde_json::from_str::<ExtractState>(&raw) {
        Ok(state) if state.version == STATE_VERSION => state.sessions,
        _ => BTreeMap::new(),
    }
}

fn cache_labels() -> Vec<String> {
    QuestionId::ALL
        .iter()
        .map(|q| q.to_string())
        .chain(std::iter::once("concatenated".to_string()))
        .collect()
}

fn cache_path(out_dir: &Path, label: &str) -> std::path::PathBuf {
    out_dir.join(format!("features_{label}.csv"))
}

/// Audio + transcript -> the session's eight rows (Q1..Q7, concatenated).
fn extract_session(
    s: &SessionRef,
    lex: &LexiconSet,
) -> Result<Vec<(String, Vec<String>, Vec<f64>)>> {
    let mut responses = Vec::with_capacity(7);
    for (&q, r) in &s.responses {
        let wave = signal_io::decode_wav(&r.audio)?;
        let transcript = linguistic::load_transcript(&r.transcript)?;
        responses.push(features::extract_response(&wave, &transcript, q, r.kind, lex)?);
    }
    let session = features::concatenate(&s.subject_id, s.session_index, responses)?;
    let mut out: Vec<(String, Vec<String>, Vec<f64>)> = session
        .per_question
        .iter()
        .map(|r| {
            (
                r.question_id.to_string(),
                r.vector.names().to_vec(),
                r.vector.values().to_vec(),
            )
        })
        .collect();
    out.push((
        "concatenated".to_string(),
        session.concatenated.names().to_vec(),
        session.concatenated.values().to_vec(),
    ));
    Ok(out)
}

pub fn run(
    dataset: &Dataset,
    lex: &LexiconSet,
    out_dir: &Path,
    force: bool,
    workers: usize,
) -> Result<ExtractOutcome> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let labels = cache_labels();
    let state_path = out_dir.join(STATE_FILE);
    let old_state = if force {
        BTreeMap::new()
    } else {
        load_state(&state_path)
    };

    let mut failed: Vec<(String, Error)> = Vec::new();
    let mut hashes: Vec<Option<String>> = Vec::with_capacity(dataset.sessions.len());
    for s in &dataset.sessions {
        match session_hash(s) {
            Ok(h) => hashes.push(Some(h)),
            Err(e) => {
                failed.push((session_key(s), e));
                hashes.push(None);
            }
        }
    }

    // Sessions the state can vouch for, if their rows survive in the caches.
    let vouched: Vec<usize> = dataset
        .sessions
        .iter()
        .enumerate()
        .filter(|(i, s)| {
            matches!(&hashes[*i], Some(h) if old_state.get(&session_key(s)) == Some(h))
        })
        .map(|(i, _)| i)
        .collect();
    let mut old_tables: HashMap<String, FeatureTable> = HashMap::new();
    if !vouched.is_empty() {
        for label in &labels {
            if let Ok(table) = features::read_csv(&cache_path(out_dir, label)) {
                old_tables.insert(label.clone(), table);
            }
        }
    }
    let old_row_of = |label: &str, s: &SessionRef| -> Option<usize> {
        let table = old_tables.get(label)?;
        table
            .rows()
            .iter()
            .position(|r| r.subject_id == s.subject_id && r.session_index == s.session_index)
    };
    let cached_idx: HashSet<usize> = vouched
        .into_iter()
        .filter(|&i| {
            labels
                .iter()
                .all(|l| old_row_of(l, &dataset.sessions[i]).is_some())
        })
        .collect();

    let jobs: Vec<usize> = (0..dataset.sessions.len())
        .filter(|i| hashes[*i].is_some() && !cached_idx.contains(i))
        .collect();

    let queue = Mutex::new(VecDeque::from(jobs.clone()));
    let (tx, rx) = mpsc::channel();
    let mut results: Vec<(usize, Result<Vec<(String, Vec<String>, Vec<f64>)>>)> =
        Vec::with_capacity(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            let tx = tx.clone();
            let queue = &queue;
            let sessions = &dataset.sessions;
            scope.spawn(move || loop {
                let next = queue.lock().unwrap().pop_front();
                let Some(i) = next else { break };
                let out = extract_session(&sessions[i], lex);
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        while let Ok(msg) = rx.recv() {
            results.push(msg);
        }
    });
    results.sort_by_key(|(i, _)| *i);

    let mut names_by_label: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut rows_by_label: BTreeMap<String, Vec<FeatureRow>> = BTreeMap::new();
    for &i in &cached_idx {
        let s = &dataset.sessions[i];
        for label in &labels {
            let table = &old_tables[label];
            let row = table.rows()[old_row_of(label, s).expect("checked above")].clone();
            names_by_label
                .entry(label.clone())
                .or_insert_with(|| table.names().to_vec());
            rows_by_label.entry(label.clone()).or_default().push(row);
        }
    }

    let mut extracted = 0usize;
    let mut succeeded: HashSet<usize> = cached_idx.clone();
    for (i, out) in results {
        let s = &dataset.sessions[i];
        match out {
            Ok(rows) => {
                extracted += 1;
                succeeded.insert(i);
                for (label, names, values) in rows {
                    match names_by_label.get(&label) {
                        Some(existing) if existing != &names => {
                            return Err(Error::MalformedCache {
                                path: cache_path(out_dir, &label),
                                reason: "cached feature names differ from the current \
                                         extraction; rerun with --force"
                                    .to_string(),
                            });
                        }
                        Some(_) => {}
                        None => {
                            names_by_label.insert(label.clone(), names);
                        }
                    }
                    rows_by_label.entry(label.clone()).or_default().push(FeatureRow {
                        subject_id: s.subject_id.clone(),
                        session_index: s.session_index,
                        question_id: label,
                        values,
                    });
                }
            }
            Err(e) => failed.push((session_key(s), e)),
        }
    }

    for label in &labels {
        let Some(names) = names_by_label.get(label) else {
            continue;
        };
        let mut table = FeatureTable::new(names.clone());
        for row in rows_by_label.remove(label).unwrap_or_default() {
            table.push(row);
        }
        table.sort_rows();
        features::write_csv(&cache_path(out_dir, label), &table)?;
    }

    let mut new_state = ExtractState {
        version: STATE_VERSION,
        sessions: BTreeMap::new(),
    };
    for &i in &succeeded {
        new_state.sessions.insert(
            session_key(&dataset.sessions[i]),
            hashes[i].clone().expect("succeeded sessions were hashed"),
        );
    }
    let json = serde_json::to_string_pretty(&new_state).expect("state serializes");
    std::fs::write(&state_path, json)
        .map_err(|e| Error::io(format!("writing {}", state_path.display()), e))?;

    failed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ExtractOutcome {
        extracted,
        cached: cached_idx.len(),
        failed,
    })
}
