//! Overlap metrics: unigram precision/recall/F1, KF1, BLEU-4 and ROUGE-L.
//!
//! All metrics operate on [`TokenSequence`]s. Callers that start from raw
//! strings should go through [`normalize`] so that every metric agrees on
//! what a word is; [`kf1`] does this itself.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::textnorm::{normalize, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Precision, recall and their harmonic mean, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct F1Triple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Triple {
    pub const ZERO: F1Triple = F1Triple {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Builds the triple from an overlap count and the two side lengths.
    /// An empty side yields all zeros.
    pub fn from_counts(overlap: usize, hyp_len: usize, ref_len: usize) -> Self {
        if hyp_len == 0 || ref_len == 0 {
            return Self::ZERO;
        }
        let precision = overlap as f64 / hyp_len as f64;
        let recall = overlap as f64 / ref_len as f64;
        Self::from_pr(precision, recall)
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn bag(seq: &TokenSequence) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for t in seq.iter() {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Size of the multiset intersection of the two token bags.
pub fn bag_overlap(hyp: &TokenSequence, reference: &TokenSequence) -> usize {
    let ref_bag = bag(reference);
    bag(hyp)
        .iter()
        .map(|(tok, &n)| n.min(ref_bag.get(tok).copied().unwrap_or(0)))
        .sum()
}

/// Unigram F1 over token bags.
pub fn unigram_f1(hyp: &TokenSequence, reference: &TokenSequence) -> F1Triple {
    F1Triple::from_counts(bag_overlap(hyp, reference), hyp.len(), reference.len())
}

/// Knowledge F1: unigram F1 of the normalized response against the
/// normalized knowledge snippet.
pub fn kf1(response: &str, knowledge: &str) -> F1Triple {
    unigram_f1(&normalize(response), &normalize(knowledge))
}

const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and total hypothesis n-grams for one order.
fn ngram_matches(hyp: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    if hyp.len() < n {
        return (0, 0);
    }
    let mut ref_counts: BTreeMap<&[&str], usize> = BTreeMap::new();
    for w in reference.windows(n) {
        *ref_counts.entry(w).or_insert(0) += 1;
    }
    let mut hyp_counts: BTreeMap<&[&str], usize> = BTreeMap::new();
    for w in hyp.windows(n) {
        *hyp_counts.entry(w).or_insert(0) += 1;
    }
    let matched = hyp_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, hyp.len() + 1 - n)
}

fn as_strs(seq: &TokenSequence) -> Vec<&str> {
    seq.iter().collect()
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        libm::exp(1.0 - ref_len as f64 / hyp_len as f64)
    }
}

/// Corpus-level BLEU-4 result.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorpusBleu {
    /// In `[0, 100]`.
    pub score: f64,
    /// Modified n-gram precisions for n = 1..=4.
    pub precisions: [f64; MAX_ORDER],
    /// `exp(1 - ref_len / hyp_len)` for short corpora, else 1. Zero only when
    /// the whole hypothesis side is empty.
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

/// Unsmoothed corpus BLEU-4 with one reference per hypothesis.
///
/// Clipped n-gram counts are summed over the corpus before the precisions
/// are formed, so a corpus with no 4-gram match anywhere scores 0.
pub fn corpus_bleu4<'a, I>(pairs: I) -> Result<CorpusBleu, MetricsError>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a TokenSequence)>,
{
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    let mut seen = false;
    for (hyp, reference) in pairs {
        seen = true;
        let h = as_strs(hyp);
        let r = as_strs(reference);
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let (m, t) = ngram_matches(&h, &r, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
    }
    if !seen {
        return Err(MetricsError::EmptyCorpus);
    }

    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if total[n] > 0 {
            precisions[n] = matched[n] as f64 / total[n] as f64;
        }
    }
    let bp = brevity_penalty(hyp_len, ref_len);
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|&p| libm::log(p)).sum::<f64>() / MAX_ORDER as f64;
        100.0 * bp * libm::exp(mean_log)
    };
    Ok(CorpusBleu {
        score,
        precisions,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
    })
}

/// Sentence BLEU-4 in `[0, 100]` with exponential smoothing.
///
/// Each order with zero clipped matches gets the count `1 / 2^k`, where `k`
/// counts the zero orders seen so far (1, 2, ...). Denominators are floored
/// at 1 for hypotheses shorter than the n-gram order.
pub fn sentence_bleu4(hyp: &TokenSequence, reference: &TokenSequence) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let h = as_strs(hyp);
    let r = as_strs(reference);
    let mut k = 0i32;
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, t) = ngram_matches(&h, &r, n);
        let denom = t.max(1) as f64;
        let p = if m == 0 {
            k += 1;
            1.0 / (libm::pow(2.0, k as f64) * denom)
        } else {
            m as f64 / denom
        };
        log_sum += libm::log(p);
    }
    100.0 * brevity_penalty(h.len(), r.len()) * libm::exp(log_sum / MAX_ORDER as f64)
}

/// Length of the longest common subsequence of two token sequences.
///
/// Bit-parallel over the positions of `a` (Allison–Dix / Hyyrö): each token
/// of `b` updates a bit-vector `V` with `V = (V + U) | (V & !U)` where
/// `U = V & match_mask`. Zero bits of `V` within the first `|a|` positions
/// count the LCS. Runs in `O(|b| * ceil(|a| / 64))` word operations.
pub fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let m = a.len();
    if m == 0 || b.is_empty() {
        return 0;
    }
    let words = m.div_ceil(64);
    let mut masks: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for (i, tok) in a.iter().enumerate() {
        masks.entry(tok).or_insert_with(|| vec![0u64; words])[i / 64] |= 1u64 << (i % 64);
    }

    let mut v = vec![u64::MAX; words];
    for tok in b {
        let Some(mask) = masks.get(tok) else {
            continue;
        };
        let mut carry = 0u64;
        for w in 0..words {
            let u = v[w] & mask[w];
            let (s1, c1) = v[w].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = (c1 | c2) as u64;
            v[w] = s2 | (v[w] & !u);
        }
    }

    let tail = m % 64;
    let mut ones = 0usize;
    for (w, &word) in v.iter().enumerate() {
        let word = if w == words - 1 && tail != 0 {
            word & ((1u64 << tail) - 1)
        } else {
            word
        };
        ones += word.count_ones() as usize;
    }
    m - ones
}

/// ROUGE-L precision/recall/F1 from the token LCS.
pub fn rouge_l(hyp: &TokenSequence, reference: &TokenSequence) -> F1Triple {
    let lcs = lcs_len(&as_strs(hyp), &as_strs(reference));
    F1Triple::from_counts(lcs, hyp.len(), reference.len())
}

/// Arithmetic mean of per-pair ROUGE-L F1.
pub fn mean_rouge_l<'a, I>(pairs: I) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a TokenSequence)>,
{
    let scores: Vec<f64> = pairs.into_iter().map(|(h, r)| rouge_l(h, r).f1).collect();
    order_free_mean(scores).ok_or(MetricsError::EmptyCorpus)
}

/// Mean of `values` that does not depend on their input order: values are
/// sorted before summation.
pub fn order_free_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Some(values.iter().sum::<f64>() / n)
}
