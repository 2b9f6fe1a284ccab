//! Filter, score, and pick the best candidate of a pool.

use alloc::string::String;
use alloc::vec::Vec;

use crate::candidates::{CandidateSet, DialogueExample, ExampleError};
use crate::filters::{self, FilterPolicy, PolicyError};
use crate::scoring::{
    aggregate, fold_relevance, relevance_requests, score_faithfulness, select_dimensions,
    ConfigError, QualityDimension, RelevanceScorer, ScoreBreakdown, ScorerConfig, ScorerError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RerankError {
    #[error("invalid example: {0}")]
    Example(#[from] ExampleError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Outcome of re-ranking one pool.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RerankResult {
    pub selected_index: usize,
    pub selected_text: String,
    pub breakdowns: Vec<ScoreBreakdown>,
    /// Set when every candidate was filtered and rank 0 was returned as is.
    pub fallback_used: bool,
}

/// Index of the highest `mu` among unfiltered breakdowns. Ties go to the
/// lowest original index; scores are compared exactly.
pub fn select_best(breakdowns: &[ScoreBreakdown]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for b in breakdowns {
        let (false, Some(mu)) = (b.filtered, b.mu) else {
            continue;
        };
        match best {
            Some((idx, top)) if mu < top || (mu == top && b.candidate_index > idx) => {}
            _ => best = Some((b.candidate_index, mu)),
        }
    }
    best.map(|(idx, _)| idx)
}

/// A validated scorer configuration, filter policy and the quality
/// dimensions its relevance set selects.
#[derive(Debug, Clone, PartialEq)]
pub struct Reranker {
    config: ScorerConfig,
    policy: FilterPolicy,
    dimensions: Vec<QualityDimension>,
}

impl Reranker {
    /// `catalog` is the full list of known dimensions; only those in the
    /// configured relevance set are kept.
    pub fn new(
        config: ScorerConfig,
        policy: FilterPolicy,
        catalog: &[QualityDimension],
    ) -> Result<Self, SetupError> {
        config.validate()?;
        policy.validate()?;
        let dimensions = select_dimensions(catalog, config.relevance_set)?;
        Ok(Self {
            config,
            policy,
            dimensions,
        })
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn policy(&self) -> &FilterPolicy {
        &self.policy
    }

    pub fn dimensions(&self) -> &[QualityDimension] {
        &self.dimensions
    }

    fn check_example(&self, example: &DialogueExample) -> Result<(), ExampleError> {
        example.validate()?;
        if self.config.uses_faithfulness() && example.knowledge.trim().is_empty() {
            return Err(ExampleError::MissingKnowledge);
        }
        Ok(())
    }

    /// One breakdown per candidate, in pool order. Relevance queries for all
    /// surviving candidates go to the client as a single batch.
    pub fn score_pool<S: RelevanceScorer + ?Sized>(
        &self,
        example: &DialogueExample,
        pool: &CandidateSet,
        client: &S,
    ) -> Result<Vec<ScoreBreakdown>, RerankError> {
        self.check_example(example)?;
        let outcome = filters::apply(pool, &self.policy);

        let relevance: Vec<Option<f64>> = if self.config.uses_relevance() {
            let context = example.serialize_history();
            let per_candidate: Vec<_> = outcome
                .survivors
                .iter()
                .map(|s| relevance_requests(&context, s.text, &self.dimensions))
                .collect();
            let flat: Vec<_> = per_candidate.iter().flatten().cloned().collect();
            let logliks = if flat.is_empty() {
                Vec::new()
            } else {
                client.loglik_batch(&flat)?
            };
            if logliks.len() != flat.len() {
                return Err(ScorerError::Protocol(alloc::format!(
                    "batch of {} requests answered with {} values",
                    flat.len(),
                    logliks.len()
                ))
                .into());
            }
            let mut at = 0;
            let mut out = Vec::with_capacity(per_candidate.len());
            for reqs in &per_candidate {
                out.push(Some(fold_relevance(&self.dimensions, &logliks[at..at + reqs.len()])?));
                at += reqs.len();
            }
            out
        } else {
            alloc::vec![None; outcome.survivors.len()]
        };

        let mut breakdowns: Vec<ScoreBreakdown> = outcome
            .verdicts
            .into_iter()
            .enumerate()
            .map(|(i, v)| ScoreBreakdown {
                candidate_index: i,
                filtered: !v.passed,
                filter_reasons: v.reasons,
                ..Default::default()
            })
            .collect();
        for (s, mu_d) in outcome.survivors.iter().zip(relevance) {
            let mu_k = score_faithfulness(s.text, &example.knowledge, self.config.faithfulness_metric);
            let b = &mut breakdowns[s.index];
            b.mu_d = mu_d;
            b.mu_k = mu_k;
            b.mu = aggregate(mu_d, mu_k, self.config.aggregation);
        }
        Ok(breakdowns)
    }

    /// Filters, scores and selects. When nothing survives filtering the
    /// decoder's top hypothesis is returned with `fallback_used` set.
    pub fn rerank<S: RelevanceScorer + ?Sized>(
        &self,
        example: &DialogueExample,
        pool: &CandidateSet,
        client: &S,
    ) -> Result<RerankResult, RerankError> {
        let breakdowns = self.score_pool(example, pool, client)?;
        let (selected_index, fallback_used) = match select_best(&breakdowns) {
            Some(i) => (i, false),
            None => (0, true),
        };
        Ok(RerankResult {
            selected_index,
            selected_text: pool.candidates()[selected_index].clone(),
            breakdowns,
            fallback_used,
        })
    }
}
