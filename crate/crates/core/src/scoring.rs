//! Per-candidate quality scores.
//!
//! A candidate's total score `mu` combines a relevance term `mu_d` (how well
//! it continues the dialogue history) and a faithfulness term `mu_k` (how well
//! it is grounded in the knowledge snippet). Faithfulness comes from the
//! overlap metrics in [`crate::metrics`]. Relevance is follow-up likelihood:
//! a dialogue language model behind a [`RelevanceScorer`] rates how likely
//! hand-written positive and negative follow-up utterances are after the
//! candidate, per quality dimension.

use alloc::string::String;
use alloc::vec::Vec;

use crate::metrics::{kf1, rouge_l, sentence_bleu4};
use crate::textnorm::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FaithfulnessMetric {
    #[default]
    Kf1,
    SentenceBleu4,
    RougeL,
    None,
}

impl FaithfulnessMetric {
    pub const ALL: [FaithfulnessMetric; 4] = [
        FaithfulnessMetric::Kf1,
        FaithfulnessMetric::SentenceBleu4,
        FaithfulnessMetric::RougeL,
        FaithfulnessMetric::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaithfulnessMetric::Kf1 => "kf1",
            FaithfulnessMetric::SentenceBleu4 => "sentence_bleu4",
            FaithfulnessMetric::RougeL => "rouge_l",
            FaithfulnessMetric::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Level {
    Turn,
    Dialogue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Tier {
    Basic,
    Further,
}

/// Which groups of quality dimensions feed the relevance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RelevanceSet {
    #[default]
    FedTurnBasic,
    FedTurnFurther,
    FedDialogueBasic,
    FedDialogueFurther,
    FedTurnAll,
    FedDialogueAll,
    FedAll,
    None,
}

impl RelevanceSet {
    pub const ALL: [RelevanceSet; 8] = [
        RelevanceSet::FedTurnBasic,
        RelevanceSet::FedTurnFurther,
        RelevanceSet::FedDialogueBasic,
        RelevanceSet::FedDialogueFurther,
        RelevanceSet::FedTurnAll,
        RelevanceSet::FedDialogueAll,
        RelevanceSet::FedAll,
        RelevanceSet::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelevanceSet::FedTurnBasic => "fed_turn_basic",
            RelevanceSet::FedTurnFurther => "fed_turn_further",
            RelevanceSet::FedDialogueBasic => "fed_dialogue_basic",
            RelevanceSet::FedDialogueFurther => "fed_dialogue_further",
            RelevanceSet::FedTurnAll => "fed_turn_all",
            RelevanceSet::FedDialogueAll => "fed_dialogue_all",
            RelevanceSet::FedAll => "fed_all",
            RelevanceSet::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether dimensions at `(level, tier)` belong to this set.
    pub fn includes(self, level: Level, tier: Tier) -> bool {
        match self {
            RelevanceSet::FedTurnBasic => level == Level::Turn && tier == Tier::Basic,
            RelevanceSet::FedTurnFurther => level == Level::Turn && tier == Tier::Further,
            RelevanceSet::FedDialogueBasic => level == Level::Dialogue && tier == Tier::Basic,
            RelevanceSet::FedDialogueFurther => level == Level::Dialogue && tier == Tier::Further,
            RelevanceSet::FedTurnAll => level == Level::Turn,
            RelevanceSet::FedDialogueAll => level == Level::Dialogue,
            RelevanceSet::FedAll => true,
            RelevanceSet::None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Aggregation {
    #[default]
    Sum,
    WeightedSum { w_d: f64, w_k: f64 },
}

impl Aggregation {
    pub fn weights(self) -> (f64, f64) {
        match self {
            Aggregation::Sum => (1.0, 1.0),
            Aggregation::WeightedSum { w_d, w_k } => (w_d, w_k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScorerConfig {
    pub faithfulness_metric: FaithfulnessMetric,
    pub relevance_set: RelevanceSet,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("at least one of faithfulness_metric and relevance_set must be set")]
    NothingToScore,
    #[error("aggregation weights must be finite")]
    NonFiniteWeight,
    #[error("relevance set `{0}` selects no quality dimensions")]
    NoDimensions(&'static str),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.faithfulness_metric == FaithfulnessMetric::None
            && self.relevance_set == RelevanceSet::None
        {
            return Err(ConfigError::NothingToScore);
        }
        let (w_d, w_k) = self.aggregation.weights();
        if !w_d.is_finite() || !w_k.is_finite() {
            return Err(ConfigError::NonFiniteWeight);
        }
        Ok(())
    }

    pub fn faithfulness_only(metric: FaithfulnessMetric) -> Self {
        Self {
            faithfulness_metric: metric,
            relevance_set: RelevanceSet::None,
            aggregation: Aggregation::Sum,
        }
    }

    pub fn uses_relevance(&self) -> bool {
        self.relevance_set != RelevanceSet::None
    }

    pub fn uses_faithfulness(&self) -> bool {
        self.faithfulness_metric != FaithfulnessMetric::None
    }
}

/// Dimension names per `(level, tier)` group.
pub const TURN_BASIC: [&str; 3] = ["semantically appropriate", "understandable", "fluent"];
pub const TURN_FURTHER: [&str; 5] = ["interesting", "engaging", "specific", "relevant", "correct"];
pub const DIALOGUE_BASIC: [&str; 4] = ["coherent", "error recovery", "consistent", "diverse"];
pub const DIALOGUE_FURTHER: [&str; 6] = [
    "depth",
    "likeable",
    "understandable",
    "flexible",
    "informative",
    "inquisitive",
];

pub fn group_members(level: Level, tier: Tier) -> &'static [&'static str] {
    match (level, tier) {
        (Level::Turn, Tier::Basic) => &TURN_BASIC,
        (Level::Turn, Tier::Further) => &TURN_FURTHER,
        (Level::Dialogue, Tier::Basic) => &DIALOGUE_BASIC,
        (Level::Dialogue, Tier::Further) => &DIALOGUE_FURTHER,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DimensionError {
    #[error("dimension `{0}` has no follow-up utterances")]
    NoFollowups(String),
    #[error("dimension `{name}` does not belong to the {level:?}/{tier:?} group")]
    WrongGroup { name: String, level: Level, tier: Tier },
}

/// One quality the relevance scorer probes, with its follow-up utterances.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QualityDimension {
    pub name: String,
    pub level: Level,
    pub tier: Tier,
    #[cfg_attr(feature = "serde", serde(default))]
    pub positive_followups: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub negative_followups: Vec<String>,
}

impl QualityDimension {
    pub fn validate(&self) -> Result<(), DimensionError> {
        if self.positive_followups.is_empty() && self.negative_followups.is_empty() {
            return Err(DimensionError::NoFollowups(self.name.clone()));
        }
        if !group_members(self.level, self.tier).contains(&self.name.as_str()) {
            return Err(DimensionError::WrongGroup {
                name: self.name.clone(),
                level: self.level,
                tier: self.tier,
            });
        }
        Ok(())
    }

    fn followup_count(&self) -> usize {
        self.positive_followups.len() + self.negative_followups.len()
    }
}

/// The dimensions of `catalog` that belong to `set`, in catalog order.
pub fn select_dimensions(
    catalog: &[QualityDimension],
    set: RelevanceSet,
) -> Result<Vec<QualityDimension>, ConfigError> {
    let mut out = Vec::new();
    for d in catalog.iter().filter(|d| set.includes(d.level, d.tier)) {
        d.validate()?;
        out.push(d.clone());
    }
    if out.is_empty() && set != RelevanceSet::None {
        return Err(ConfigError::NoDimensions(set.name()));
    }
    Ok(out)
}

/// One follow-up likelihood query.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoglikRequest {
    pub context: String,
    pub response: String,
    pub followup: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScorerError {
    /// Transport failure that persisted through retries.
    #[error("relevance scorer unavailable: {0}")]
    Unavailable(String),
    /// The scorer answered, but not in the expected shape.
    #[error("relevance scorer protocol error: {0}")]
    Protocol(String),
}

/// Source of follow-up log-likelihoods. Implementations used from the
/// parallel pipeline must also be `Sync`.
pub trait RelevanceScorer {
    fn loglik(&self, request: &LoglikRequest) -> Result<f64, ScorerError>;

    /// Scores requests in order. The default issues them one by one.
    fn loglik_batch(&self, requests: &[LoglikRequest]) -> Result<Vec<f64>, ScorerError> {
        requests.iter().map(|r| self.loglik(r)).collect()
    }
}

impl<S: RelevanceScorer + ?Sized> RelevanceScorer for &S {
    fn loglik(&self, request: &LoglikRequest) -> Result<f64, ScorerError> {
        (**self).loglik(request)
    }

    fn loglik_batch(&self, requests: &[LoglikRequest]) -> Result<Vec<f64>, ScorerError> {
        (**self).loglik_batch(requests)
    }
}

/// Model-free scorers for tests and offline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockScorer {
    /// Every log-likelihood is 0.
    Zero,
    /// Log-likelihood is minus the follow-up's character count.
    NegLength,
}

impl MockScorer {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(MockScorer::Zero),
            "neg-length" => Some(MockScorer::NegLength),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MockScorer::Zero => "zero",
            MockScorer::NegLength => "neg-length",
        }
    }
}

impl RelevanceScorer for MockScorer {
    fn loglik(&self, request: &LoglikRequest) -> Result<f64, ScorerError> {
        Ok(match self {
            MockScorer::Zero => 0.0,
            MockScorer::NegLength => -(request.followup.chars().count() as f64),
        })
    }
}

/// Faithfulness of `candidate` to `knowledge`, in `[0, 1]`; `None` when the
/// metric is disabled. Sentence BLEU is divided by 100 to share the scale.
pub fn score_faithfulness(candidate: &str, knowledge: &str, metric: FaithfulnessMetric) -> Option<f64> {
    match metric {
        FaithfulnessMetric::Kf1 => Some(kf1(candidate, knowledge).f1),
        FaithfulnessMetric::SentenceBleu4 => {
            Some(sentence_bleu4(&normalize(candidate), &normalize(knowledge)) / 100.0)
        }
        FaithfulnessMetric::RougeL => Some(rouge_l(&normalize(candidate), &normalize(knowledge)).f1),
        FaithfulnessMetric::None => None,
    }
}

/// Requests for every follow-up of every dimension: per dimension, the
/// positives first, then the negatives.
pub fn relevance_requests(context: &str, candidate: &str, dims: &[QualityDimension]) -> Vec<LoglikRequest> {
    let mut out = Vec::with_capacity(dims.iter().map(QualityDimension::followup_count).sum());
    for d in dims {
        for f in d.positive_followups.iter().chain(&d.negative_followups) {
            out.push(LoglikRequest {
                context: String::from(context),
                response: String::from(candidate),
                followup: f.clone(),
            });
        }
    }
    out
}

/// Folds log-likelihoods laid out as by [`relevance_requests`] into the mean
/// over dimensions of `sum(positive) - sum(negative)`.
pub fn fold_relevance(dims: &[QualityDimension], logliks: &[f64]) -> Result<f64, ScorerError> {
    let expected: usize = dims.iter().map(QualityDimension::followup_count).sum();
    if logliks.len() != expected {
        return Err(ScorerError::Protocol(alloc::format!(
            "expected {expected} log-likelihoods, got {}",
            logliks.len()
        )));
    }
    if let Some(bad) = logliks.iter().find(|v| !v.is_finite()) {
        return Err(ScorerError::Protocol(alloc::format!("non-finite log-likelihood {bad}")));
    }
    let mut total = 0.0;
    let mut at = 0;
    for d in dims {
        let pos: f64 = logliks[at..at + d.positive_followups.len()].iter().sum();
        at += d.positive_followups.len();
        let neg: f64 = logliks[at..at + d.negative_followups.len()].iter().sum();
        at += d.negative_followups.len();
        total += pos - neg;
    }
    Ok(total / dims.len() as f64)
}

/// Relevance of `candidate` after `context`: mean over `dims` of summed
/// positive minus summed negative follow-up log-likelihoods.
pub fn score_relevance<S: RelevanceScorer + ?Sized>(
    context: &str,
    candidate: &str,
    dims: &[QualityDimension],
    client: &S,
) -> Result<f64, RelevanceError> {
    if dims.is_empty() {
        return Err(RelevanceError::NoDimensions);
    }
    let requests = relevance_requests(context, candidate, dims);
    let logliks = client.loglik_batch(&requests)?;
    Ok(fold_relevance(dims, &logliks)?)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RelevanceError {
    #[error("no quality dimensions to score")]
    NoDimensions,
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Combines the two terms. A missing term counts as 0; `None` only when both
/// are missing.
pub fn aggregate(mu_d: Option<f64>, mu_k: Option<f64>, aggregation: Aggregation) -> Option<f64> {
    if mu_d.is_none() && mu_k.is_none() {
        return None;
    }
    let (w_d, w_k) = aggregation.weights();
    Some(w_d * mu_d.unwrap_or(0.0) + w_k * mu_k.unwrap_or(0.0))
}

/// Scores for one candidate of a pool.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreBreakdown {
    /// Original decoder rank in the pool.
    pub candidate_index: usize,
    pub mu_d: Option<f64>,
    pub mu_k: Option<f64>,
    /// Absent for filtered candidates.
    pub mu: Option<f64>,
    pub filtered: bool,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub filter_reasons: Vec<crate::filters::FilterReason>,
}
