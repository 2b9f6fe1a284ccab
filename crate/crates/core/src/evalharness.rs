//! Corpus evaluation against gold responses, knowledge-copy detection, and
//! mean-normalized comparison of scorer configurations.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::candidates::DialogueExample;
use crate::metrics::{corpus_bleu4, kf1, order_free_mean, rouge_l, unigram_f1};
use crate::textnorm::{normalize, TokenSequence};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("example `{0}` has no gold response")]
    MissingGold(String),
    #[error("need at least 2 configurations to compare, got {0}")]
    TooFewConfigs(usize),
    #[error("configuration `{0}` appears more than once")]
    DuplicateConfig(String),
}

/// Aggregate metrics over one split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorpusReport {
    #[cfg_attr(feature = "serde", serde(rename = "split"))]
    pub split_name: String,
    #[cfg_attr(feature = "serde", serde(rename = "n"))]
    pub n_examples: usize,
    /// Corpus BLEU-4 in `[0, 100]`.
    pub bleu4: f64,
    pub rouge_l: f64,
    pub f1: f64,
    pub kf1: f64,
    pub kn_copy_rate: f64,
    pub fallback_rate: f64,
}

impl CorpusReport {
    /// The four quality metrics compared across configurations, in the
    /// order BLEU-4, ROUGE-L, F1, KF1.
    pub fn quality_metrics(&self) -> [f64; 4] {
        [self.bleu4, self.rouge_l, self.f1, self.kf1]
    }

    /// Aligned two-column text rendering.
    pub fn to_table(&self) -> String {
        let rows = [
            ("split", String::from(self.split_name.as_str())),
            ("n", alloc::format!("{}", self.n_examples)),
            ("bleu4", alloc::format!("{:.4}", self.bleu4)),
            ("rouge_l", alloc::format!("{:.6}", self.rouge_l)),
            ("f1", alloc::format!("{:.6}", self.f1)),
            ("kf1", alloc::format!("{:.6}", self.kf1)),
            ("kn_copy_rate", alloc::format!("{:.6}", self.kn_copy_rate)),
            ("fallback_rate", alloc::format!("{:.6}", self.fallback_rate)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<14} {v:>12}");
        }
        out
    }
}

/// How a selected response counts as a verbatim knowledge copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnCopyMode {
    /// The normalized response is a contiguous span of the normalized
    /// knowledge and has at least `min_tokens` tokens.
    Span { min_tokens: usize },
    /// The normalized response equals the normalized knowledge (non-empty).
    Exact,
}

impl Default for KnCopyMode {
    fn default() -> Self {
        KnCopyMode::Span { min_tokens: 3 }
    }
}

fn is_contiguous_span(needle: &TokenSequence, haystack: &TokenSequence) -> bool {
    let n = needle.tokens();
    let h = haystack.tokens();
    !n.is_empty() && n.len() <= h.len() && h.windows(n.len()).any(|w| w == n)
}

pub fn kn_copy_with(selected: &str, knowledge: &str, mode: KnCopyMode) -> bool {
    let s = normalize(selected);
    let k = normalize(knowledge);
    match mode {
        KnCopyMode::Span { min_tokens } => s.len() >= min_tokens && is_contiguous_span(&s, &k),
        KnCopyMode::Exact => !s.is_empty() && s.tokens() == k.tokens(),
    }
}

/// Whether `selected` is a verbatim copy of at least three consecutive
/// normalized knowledge tokens.
pub fn kn_copy(selected: &str, knowledge: &str) -> bool {
    kn_copy_with(selected, knowledge, KnCopyMode::default())
}

/// A selected response paired with the example it answers.
#[derive(Debug, Clone, Copy)]
pub struct EvalItem<'a> {
    pub example: &'a DialogueExample,
    pub selected: &'a str,
    pub fallback_used: bool,
}

/// BLEU-4 is corpus-level; ROUGE-L, F1 and KF1 are per-example means. KF1 is
/// measured against the knowledge snippet, the others against the gold
/// response. The result does not depend on item order.
pub fn evaluate_corpus(
    split_name: &str,
    items: &[EvalItem<'_>],
    kn_mode: KnCopyMode,
) -> Result<CorpusReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut hyps = Vec::with_capacity(items.len());
    let mut golds = Vec::with_capacity(items.len());
    for item in items {
        let gold = item
            .example
            .gold_response
            .as_deref()
            .ok_or_else(|| EvalError::MissingGold(item.example.id.clone()))?;
        hyps.push(normalize(item.selected));
        golds.push(normalize(gold));
    }

    let bleu = corpus_bleu4(hyps.iter().zip(&golds)).map_err(|_| EvalError::EmptyCorpus)?;
    let rouge: Vec<f64> = hyps.iter().zip(&golds).map(|(h, g)| rouge_l(h, g).f1).collect();
    let f1: Vec<f64> = hyps.iter().zip(&golds).map(|(h, g)| unigram_f1(h, g).f1).collect();
    let kf: Vec<f64> = items.iter().map(|i| kf1(i.selected, &i.example.knowledge).f1).collect();
    let n = items.len();
    let copies = items
        .iter()
        .filter(|i| kn_copy_with(i.selected, &i.example.knowledge, kn_mode))
        .count();
    let fallbacks = items.iter().filter(|i| i.fallback_used).count();

    let mean = |v: Vec<f64>| order_free_mean(v).unwrap_or(0.0);
    Ok(CorpusReport {
        split_name: String::from(split_name),
        n_examples: n,
        bleu4: bleu.score,
        rouge_l: mean(rouge),
        f1: mean(f1),
        kf1: mean(kf),
        kn_copy_rate: copies as f64 / n as f64,
        fallback_rate: fallbacks as f64 / n as f64,
    })
}

/// Identifies one scorer configuration in a comparison grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigKey {
    /// Dialogue-history (relevance) side, the grid row.
    pub relevance: String,
    /// Knowledge (faithfulness) side, the grid column.
    pub faithfulness: String,
}

impl ConfigKey {
    pub fn new(relevance: impl Into<String>, faithfulness: impl Into<String>) -> Self {
        Self {
            relevance: relevance.into(),
            faithfulness: faithfulness.into(),
        }
    }
}

impl core::fmt::Display for ConfigKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}+{}", self.relevance, self.faithfulness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub key: ConfigKey,
    /// z-scores of BLEU-4, ROUGE-L, F1 and KF1 across configurations.
    pub normalized: [f64; 4],
    /// Sum of `normalized`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonGrid {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `cells[row][col]`; `None` where no configuration was supplied.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Per-configuration detail, in input order.
    pub entries: Vec<ComparisonEntry>,
}

fn z_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    if std > 0.0 {
        values.iter().map(|v| (v - mean) / std).collect()
    } else {
        alloc::vec![0.0; values.len()]
    }
}

/// For each of BLEU-4, ROUGE-L, F1 and KF1, z-normalizes the metric across
/// configurations (population standard deviation; a constant metric maps to
/// zeros) and sums the four normalized values per configuration.
pub fn compare_configs(reports: &[(ConfigKey, CorpusReport)]) -> Result<ComparisonGrid, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewConfigs(reports.len()));
    }
    for (i, (k, _)) in reports.iter().enumerate() {
        if reports[..i].iter().any(|(other, _)| other == k) {
            return Err(EvalError::DuplicateConfig(alloc::format!("{k}")));
        }
    }

    let columns: Vec<Vec<f64>> = (0..4)
        .map(|m| {
            let raw: Vec<f64> = reports.iter().map(|(_, r)| r.quality_metrics()[m]).collect();
            z_scores(&raw)
        })
        .collect();

    let mut rows: Vec<String> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    for (k, _) in reports {
        if !rows.contains(&k.relevance) {
            rows.push(k.relevance.clone());
        }
        if !cols.contains(&k.faithfulness) {
            cols.push(k.faithfulness.clone());
        }
    }

    let mut cells = alloc::vec![alloc::vec![None; cols.len()]; rows.len()];
    let mut entries = Vec::with_capacity(reports.len());
    for (i, (key, _)) in reports.iter().enumerate() {
        let normalized = [columns[0][i], columns[1][i], columns[2][i], columns[3][i]];
        let total = normalized.iter().sum();
        let r = rows.iter().position(|x| *x == key.relevance).unwrap_or(0);
        let c = cols.iter().position(|x| *x == key.faithfulness).unwrap_or(0);
        cells[r][c] = Some(total);
        entries.push(ComparisonEntry {
            key: key.clone(),
            normalized,
            total,
        });
    }
    Ok(ComparisonGrid {
        rows,
        cols,
        cells,
        entries,
    })
}

impl ComparisonGrid {
    /// The configuration with the largest summed score (first on ties).
    pub fn best(&self) -> Option<&ComparisonEntry> {
        self.entries
            .iter()
            .fold(None, |best: Option<&ComparisonEntry>, e| match best {
                Some(b) if b.total >= e.total => Some(b),
                _ => Some(e),
            })
    }

    /// Heatmap as aligned text: relevance configs down, faithfulness across.
    pub fn to_table(&self) -> String {
        let first = self.rows.iter().map(String::len).max().unwrap_or(0).max(9);
        let width = self.cols.iter().map(String::len).max().unwrap_or(0).max(9);
        let mut out = String::new();
        let _ = write!(out, "{:<first$}", "");
        for c in &self.cols {
            let _ = write!(out, " {c:>width$}");
        }
        out.push('\n');
        for (r, name) in self.rows.iter().enumerate() {
            let _ = write!(out, "{name:<first$}");
            for cell in &self.cells[r] {
                match cell {
                    Some(v) => {
                        let _ = write!(out, " {v:>width$.4}");
                    }
                    None => {
                        let _ = write!(out, " {:>width$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
