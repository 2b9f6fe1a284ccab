//! Candidate hygiene checks run before any scoring.

use alloc::vec::Vec;

use crate::candidates::CandidateSet;
use crate::textnorm::{normalize, raw_tokenize};

/// Thresholds for [`check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FilterPolicy {
    /// A raw token longer than this many characters fails the candidate.
    pub max_word_chars: usize,
    /// This many identical consecutive normalized tokens fail the candidate.
    pub rep_run: usize,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            max_word_chars: 30,
            rep_run: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("max_word_chars must be positive")]
    ZeroWordLimit,
    #[error("rep_run must be positive")]
    ZeroRepRun,
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.max_word_chars == 0 {
            return Err(PolicyError::ZeroWordLimit);
        }
        if self.rep_run == 0 {
            return Err(PolicyError::ZeroRepRun);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FilterReason {
    RepetitiveWords,
    OverlongWord,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterVerdict {
    pub passed: bool,
    pub reasons: Vec<FilterReason>,
}

impl FilterVerdict {
    fn from_reasons(reasons: Vec<FilterReason>) -> Self {
        Self {
            passed: reasons.is_empty(),
            reasons,
        }
    }
}

fn longest_run<'a>(tokens: impl Iterator<Item = &'a str>) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<&str> = None;
    for t in tokens {
        run = if prev == Some(t) { run + 1 } else { 1 };
        best = best.max(run);
        prev = Some(t);
    }
    best
}

/// Checks one candidate in isolation.
pub fn check(candidate: &str, policy: &FilterPolicy) -> FilterVerdict {
    let mut reasons = Vec::new();
    let normalized = normalize(candidate);
    if longest_run(normalized.iter()) >= policy.rep_run {
        reasons.push(FilterReason::RepetitiveWords);
    }
    // raw tokens: attached punctuation counts toward the length
    if raw_tokenize(candidate)
        .iter()
        .any(|t| t.chars().count() > policy.max_word_chars)
    {
        reasons.push(FilterReason::OverlongWord);
    }
    if normalized.is_empty() {
        reasons.push(FilterReason::Empty);
    }
    FilterVerdict::from_reasons(reasons)
}

/// A candidate that passed filtering, with its original decoder rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Survivor<'a> {
    pub index: usize,
    pub text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome<'a> {
    pub survivors: Vec<Survivor<'a>>,
    /// One verdict per input candidate, in pool order.
    pub verdicts: Vec<FilterVerdict>,
}

/// Filters a pool without reordering it.
pub fn apply<'a>(pool: &'a CandidateSet, policy: &FilterPolicy) -> FilterOutcome<'a> {
    let verdicts: Vec<FilterVerdict> = pool.candidates().iter().map(|c| check(c, policy)).collect();
    let survivors = pool
        .candidates()
        .iter()
        .zip(&verdicts)
        .enumerate()
        .filter(|(_, (_, v))| v.passed)
        .map(|(index, (text, _))| Survivor { index, text })
        .collect();
    FilterOutcome {
        survivors,
        verdicts,
    }
}
