//! Per-turn inputs and the candidate pools produced by a decoder.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Speaker {
    User,
    System,
}

impl Speaker {
    /// Tag used when the history is serialized for a relevance scorer.
    pub fn tag(self) -> &'static str {
        match self {
            Speaker::User => "<speaker1>",
            Speaker::System => "<speaker2>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            speaker,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ExampleError {
    #[error("dialogue history is empty")]
    EmptyHistory,
    #[error("dialogue history must end with a user utterance")]
    HistoryNotEndingWithUser,
    #[error("turn index must be at least 1")]
    ZeroTurnIndex,
    #[error("knowledge is empty but a faithfulness metric is configured")]
    MissingKnowledge,
}

/// Everything known at one system turn: topic, knowledge snippet, the
/// history up to and including the latest user utterance, and optionally
/// the gold system response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueExample {
    pub id: String,
    pub topic: String,
    pub knowledge: String,
    pub history: Vec<Utterance>,
    pub gold_response: Option<String>,
    pub turn_index: usize,
}

impl DialogueExample {
    pub fn validate(&self) -> Result<(), ExampleError> {
        match self.history.last() {
            None => return Err(ExampleError::EmptyHistory),
            Some(u) if u.speaker != Speaker::User => {
                return Err(ExampleError::HistoryNotEndingWithUser)
            }
            _ => {}
        }
        if self.turn_index == 0 {
            return Err(ExampleError::ZeroTurnIndex);
        }
        Ok(())
    }

    /// The latest user utterance.
    pub fn user_utterance(&self) -> Option<&str> {
        self.history.last().map(|u| u.text.as_str())
    }

    /// History as scorer context: one `<speakerN> text` line per utterance.
    pub fn serialize_history(&self) -> String {
        serialize_history(&self.history)
    }
}

pub fn serialize_history(history: &[Utterance]) -> String {
    let mut out = String::new();
    for (i, u) in history.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(u.speaker.tag());
        out.push(' ');
        out.push_str(&u.text);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DecodeStrategy {
    Beam,
    TopK,
    TopP,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecodeMeta {
    pub strategy: DecodeStrategy,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub n: Option<u32>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub k: Option<u32>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub p: Option<f64>,
    pub r: usize,
}

impl DecodeMeta {
    pub fn beam(r: usize) -> Self {
        Self {
            strategy: DecodeStrategy::Beam,
            n: Some(r as u32),
            k: None,
            p: None,
            r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CandidateError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("decode_meta.r is {declared} but the pool has {actual} candidates")]
    CountMismatch { declared: usize, actual: usize },
}

/// A non-empty pool of generated responses. Index 0 is the decoder's top
/// hypothesis (the vanilla response).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    candidates: Vec<String>,
    meta: DecodeMeta,
}

impl CandidateSet {
    pub fn new(candidates: Vec<String>, meta: DecodeMeta) -> Result<Self, CandidateError> {
        if candidates.is_empty() {
            return Err(CandidateError::EmptyPool);
        }
        if meta.r != candidates.len() {
            return Err(CandidateError::CountMismatch {
                declared: meta.r,
                actual: candidates.len(),
            });
        }
        Ok(Self { candidates, meta })
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn meta(&self) -> &DecodeMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn vanilla(&self) -> &str {
        &self.candidates[0]
    }
}
