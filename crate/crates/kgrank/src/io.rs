//! Newline-delimited JSON records: one dialogue turn plus its candidate pool
//! per line.
//!
//! ```json
//! {"id": "...", "topic": "...", "knowledge": "...",
//!  "history": [{"speaker": "user", "text": "..."}],
//!  "gold_response": "...",
//!  "candidates": ["...", "..."],
//!  "decode_meta": {"strategy": "beam", "n": 10, "r": 10}}
//! ```
//!
//! `gold_response` and `turn_index` are optional; `turn_index` defaults to
//! the number of user utterances in the history. Blank lines are skipped
//! but still counted, so reported line numbers match the file.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use kgrank_core::candidates::{CandidateError, ExampleError};
use kgrank_core::{CandidateSet, DecodeMeta, DialogueExample, Speaker, Utterance};
use serde::{Deserialize, Serialize};
use serde_json::Value;

const REQUIRED: [&str; 6] = ["id", "topic", "knowledge", "history", "candidates", "decode_meta"];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid JSON: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: field `{field}`: {reason}")]
    Schema {
        line: usize,
        field: String,
        reason: String,
    },
}

impl LoadError {
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Io(_) => None,
            LoadError::Parse { line, .. } | LoadError::Schema { line, .. } => Some(*line),
        }
    }
}

/// One validated input line.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// 1-based line number in the source file.
    pub line: usize,
    pub example: DialogueExample,
    pub pool: CandidateSet,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    id: String,
    topic: String,
    knowledge: String,
    history: Vec<Utterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_response: Option<String>,
    #[serde(default)]
    turn_index: Option<usize>,
    candidates: Vec<String>,
    decode_meta: DecodeMeta,
}

fn schema(line: usize, field: impl Into<String>, reason: impl ToString) -> LoadError {
    LoadError::Schema {
        line,
        field: field.into(),
        reason: reason.to_string(),
    }
}

/// Parses and validates one non-blank line.
pub fn parse_line(text: &str, line: usize) -> Result<Record, LoadError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        line,
        reason: e.to_string(),
    })?;
    let Some(obj) = value.as_object() else {
        return Err(schema(line, "<root>", "expected a JSON object"));
    };
    if let Some(missing) = REQUIRED.iter().find(|k| !obj.contains_key(**k)) {
        return Err(schema(line, *missing, "missing"));
    }

    let wire: Wire = serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        schema(line, field, e.into_inner())
    })?;

    let turn_index = wire
        .turn_index
        .unwrap_or_else(|| wire.history.iter().filter(|u| u.speaker == Speaker::User).count());
    let example = DialogueExample {
        id: wire.id,
        topic: wire.topic,
        knowledge: wire.knowledge,
        history: wire.history,
        gold_response: wire.gold_response,
        turn_index,
    };
    example.validate().map_err(|e| {
        let field = match e {
            ExampleError::ZeroTurnIndex => "turn_index",
            ExampleError::MissingKnowledge => "knowledge",
            ExampleError::EmptyHistory | ExampleError::HistoryNotEndingWithUser => "history",
        };
        schema(line, field, e)
    })?;
    let pool = CandidateSet::new(wire.candidates, wire.decode_meta).map_err(|e| {
        let field = match e {
            CandidateError::EmptyPool => "candidates",
            CandidateError::CountMismatch { .. } => "decode_meta.r",
        };
        schema(line, field, e)
    })?;
    Ok(Record { line, example, pool })
}

/// Iterates over the records of a reader, yielding one result per non-blank
/// line. Callers choose whether to stop at the first error.
pub fn read_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Record, LoadError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(LoadError::Io(e))),
            Ok(text) if text.trim().is_empty() => None,
            Ok(text) => Some(parse_line(&text, i + 1)),
        })
}

/// Loads every record of `path`, failing on the first bad line.
pub fn load_examples(path: &Path) -> Result<Vec<Record>, LoadError> {
    read_records(BufReader::new(File::open(path)?)).collect()
}

/// Writes records in the input schema, one per line.
pub fn write_records<W: Write>(mut out: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        let wire = Wire {
            id: r.example.id.clone(),
            topic: r.example.topic.clone(),
            knowledge: r.example.knowledge.clone(),
            history: r.example.history.clone(),
            gold_response: r.example.gold_response.clone(),
            turn_index: Some(r.example.turn_index),
            candidates: r.pool.candidates().to_vec(),
            decode_meta: *r.pool.meta(),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
