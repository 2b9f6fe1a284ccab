//! Tokenization shared by every overlap metric and filter.
//!
//! Two views of a string are provided. [`normalize`] is the comparison view
//! used by F1, KF1, BLEU and ROUGE-L: NFC, lowercase, punctuation stripped,
//! the articles `a`/`an`/`the` dropped, split on Unicode whitespace.
//! [`raw_tokenize`] is the surface view used by the candidate filters, which
//! must see words exactly as they were generated.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// An ordered list of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_len_chars: usize,
}

impl TokenSequence {
    /// Builds a sequence from pre-split tokens, dropping empty ones and
    /// splitting any that still contain whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut chars = 0;
        for t in tokens {
            let t = t.as_ref();
            chars += t.chars().count();
            out.extend(t.split_whitespace().map(String::from));
        }
        Self {
            tokens: out,
            source_len_chars: chars,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Character count of the raw text this sequence was produced from.
    pub fn source_len_chars(&self) -> usize {
        self.source_len_chars
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(t);
        }
        s
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = core::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// True for characters in any Unicode punctuation category (Pc, Pd, Ps, Pe,
/// Pi, Pf, Po) and for ASCII punctuation, which also covers symbols such as
/// `$`, `+` and `|`.
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Comparison view of `text`.
///
/// `"The CAT, sat!"` becomes `["cat", "sat"]`. Punctuation is deleted rather
/// than replaced by a space, so every normalized token descends from exactly
/// one raw token. A final NFC pass recomposes any combining marks that
/// punctuation removal brought next to a base character, which makes the
/// function idempotent on its own joined output.
pub fn normalize(text: &str) -> TokenSequence {
    let source_len_chars = text.chars().count();
    let lowered: String = text.nfc().flat_map(char::to_lowercase).collect();
    let stripped: String = lowered
        .chars()
        .filter(|c| !is_punctuation(*c))
        .nfc()
        .collect();
    let tokens = stripped
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .map(String::from)
        .collect();
    TokenSequence {
        tokens,
        source_len_chars,
    }
}

/// Surface view of `text`: whitespace split, case and punctuation kept.
pub fn raw_tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: text.split_whitespace().map(String::from).collect(),
        source_len_chars: text.chars().count(),
    }
}
