//! Report serialization and the prediction files `eval` consumes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use kgrank_core::{ComparisonGrid, ConfigKey, CorpusReport};
use serde::Deserialize;

/// Plain decimal with at least nine significant digits, never exponent
/// notation.
pub fn decimal(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{:.6}", if v.is_finite() { v } else { 0.0 });
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (8 - magnitude).max(1) as usize;
    format!("{v:.decimals$}")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

/// `{split, n, bleu4, rouge_l, f1, kf1, kn_copy_rate, fallback_rate}`.
pub fn report_json(r: &CorpusReport) -> String {
    format!(
        "{{\"split\": {}, \"n\": {}, \"bleu4\": {}, \"rouge_l\": {}, \"f1\": {}, \"kf1\": {}, \"kn_copy_rate\": {}, \"fallback_rate\": {}}}",
        json_string(&r.split_name),
        r.n_examples,
        decimal(r.bleu4),
        decimal(r.rouge_l),
        decimal(r.f1),
        decimal(r.kf1),
        decimal(r.kn_copy_rate),
        decimal(r.fallback_rate),
    )
}

pub fn grid_json(g: &ComparisonGrid) -> String {
    let list = |v: &[String]| v.iter().map(|s| json_string(s)).collect::<Vec<_>>().join(", ");
    let mut out = String::from("{");
    let _ = write!(out, "\"rows\": [{}], \"cols\": [{}], \"cells\": [", list(&g.rows), list(&g.cols));
    for (i, row) in g.cells.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map_or_else(|| "null".to_string(), decimal))
            .collect();
        let _ = write!(out, "[{}]", cells.join(", "));
    }
    out.push_str("], \"entries\": [");
    for (i, e) in g.entries.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let n: Vec<String> = e.normalized.iter().map(|v| decimal(*v)).collect();
        let _ = write!(
            out,
            "{{\"relevance\": {}, \"faithfulness\": {}, \"normalized\": [{}], \"total\": {}}}",
            json_string(&e.key.relevance),
            json_string(&e.key.faithfulness),
            n.join(", "),
            decimal(e.total)
        );
    }
    out.push_str("]}");
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("{0}: report file names must look like <relevance>__<faithfulness>.json")]
    BadName(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_report(path: &Path) -> Result<CorpusReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Invalid {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads every `<relevance>__<faithfulness>.json` in `dir`, sorted by name.
pub fn load_report_dir(dir: &Path) -> Result<Vec<(ConfigKey, CorpusReport)>, ReportError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let Some((rel, faith)) = stem.split_once("__") else {
                return Err(ReportError::BadName(p.clone()));
            };
            let key = ConfigKey::new(rel, faith);
            Ok((key, load_report(&p)?))
        })
        .collect()
}

/// The part of a `rerank` output line that evaluation needs.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub selected_text: String,
    #[serde(default)]
    pub fallback_used: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("predictions line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("predictions line {line}: record `{id}` failed during re-ranking: {error}")]
    FailedRecord { line: usize, id: String, error: String },
    #[error("predictions line {line}: duplicate id `{id}`")]
    Duplicate { line: usize, id: String },
}

#[derive(Deserialize)]
struct Line {
    id: Option<String>,
    selected_text: Option<String>,
    #[serde(default)]
    fallback_used: bool,
    error: Option<String>,
}

/// Predictions keyed by example id. Error lines written by a lenient run are
/// rejected, since their examples have no selection to score.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<HashMap<String, Prediction>, PredictionError> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let invalid = |reason: String| PredictionError::Invalid { line: line_no, reason };
        let l: Line = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let id = l.id.ok_or_else(|| invalid("missing `id`".into()))?;
        if let Some(error) = l.error {
            return Err(PredictionError::FailedRecord { line: line_no, id, error });
        }
        let selected_text = l.selected_text.ok_or_else(|| invalid("missing `selected_text`".into()))?;
        let p = Prediction {
            id: id.clone(),
            selected_text,
            fallback_used: l.fallback_used,
        };
        if out.insert(id.clone(), p).is_some() {
            return Err(PredictionError::Duplicate { line: line_no, id });
        }
    }
    Ok(out)
}
