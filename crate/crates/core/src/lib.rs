//! Re-ranking of generated response candidates for knowledge-grounded
//! dialogue.
//!
//! A decoder produces a pool of `r` candidate responses for a turn. This
//! crate drops degenerate candidates ([`filters`]), scores the rest for
//! faithfulness to the knowledge snippet and relevance to the dialogue
//! history ([`scoring`]), and returns the best one ([`reranker`]). The
//! overlap metrics it relies on ([`metrics`]) double as the corpus
//! evaluation harness ([`evalharness`]).
//!
//! The crate is `no_std` and needs only `alloc`. IO, configuration files,
//! the HTTP relevance client and the command line live in the `kgrank`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod candidates;
pub mod evalharness;
pub mod filters;
pub mod metrics;
pub mod reranker;
pub mod scoring;
pub mod textnorm;

pub use candidates::{CandidateSet, DecodeMeta, DecodeStrategy, DialogueExample, Speaker, Utterance};
pub use evalharness::{compare_configs, evaluate_corpus, kn_copy, ComparisonGrid, ConfigKey, CorpusReport, EvalItem, KnCopyMode};
pub use filters::{FilterPolicy, FilterReason, FilterVerdict};
pub use metrics::{corpus_bleu4, kf1, mean_rouge_l, rouge_l, sentence_bleu4, unigram_f1, CorpusBleu, F1Triple};
pub use reranker::{RerankError, RerankResult, Reranker};
pub use scoring::{
    Aggregation, FaithfulnessMetric, LoglikRequest, MockScorer, QualityDimension, RelevanceScorer, RelevanceSet,
    ScoreBreakdown, ScorerConfig, ScorerError,
};
pub use textnorm::{normalize, raw_tokenize, TokenSequence};
