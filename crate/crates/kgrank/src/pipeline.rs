//! Parallel, order-preserving re-ranking of a record stream.

use std::io::Write;

use kgrank_core::{RelevanceScorer, RerankError, RerankResult, Reranker};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Mode;
use crate::io::{LoadError, Record};

/// Records handed to the worker pool at a time.
const CHUNK: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error(transparent)]
    Load(LoadError),
    #[error("line {line} ({id}): {source}")]
    Rerank {
        line: usize,
        id: String,
        source: RerankError,
    },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("starting worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamSummary {
    pub written: usize,
    pub failed: usize,
    pub fallbacks: usize,
}

#[derive(Serialize)]
struct ResultLine<'a> {
    id: &'a str,
    line: usize,
    #[serde(flatten)]
    result: &'a RerankResult,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    id: Option<&'a str>,
    line: Option<usize>,
    error: String,
}

enum Outcome {
    Done(Record, RerankResult),
    Failed(Record, RerankError),
    Unreadable(LoadError),
}

/// Re-ranks every record and writes one JSON line per record, in input
/// order, whatever the thread count. `concurrency` worker threads each keep
/// at most one scorer call in flight.
///
/// In strict mode the first failure (in input order) stops the run; lines
/// before it have already been written. In lenient mode a failure becomes an
/// `{id, line, error}` line. I/O errors always stop the run.
pub fn rerank_stream<I, S, W>(
    records: I,
    reranker: &Reranker,
    scorer: &S,
    concurrency: usize,
    mode: Mode,
    mut out: W,
) -> Result<StreamSummary, StreamError>
where
    I: IntoIterator<Item = Result<Record, LoadError>>,
    S: RelevanceScorer + Sync + ?Sized,
    W: Write,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()?;
    let mut summary = StreamSummary::default();
    let mut records = records.into_iter().peekable();
    let mut buf = Vec::new();

    while records.peek().is_some() {
        let chunk: Vec<_> = records.by_ref().take(CHUNK).collect();
        let outcomes: Vec<Outcome> = pool.install(|| {
            chunk
                .into_par_iter()
                .map(|r| match r {
                    Err(e) => Outcome::Unreadable(e),
                    Ok(rec) => match reranker.rerank(&rec.example, &rec.pool, scorer) {
                        Ok(res) => Outcome::Done(rec, res),
                        Err(e) => Outcome::Failed(rec, e),
                    },
                })
                .collect()
        });

        for o in outcomes {
            buf.clear();
            match o {
                Outcome::Done(rec, res) => {
                    summary.fallbacks += usize::from(res.fallback_used);
                    let line = ResultLine {
                        id: &rec.example.id,
                        line: rec.line,
                        result: &res,
                    };
                    serde_json::to_writer(&mut buf, &line).map_err(std::io::Error::from)?;
                }
                Outcome::Unreadable(LoadError::Io(e)) => return Err(StreamError::Io(e)),
                Outcome::Unreadable(e) => {
                    if mode == Mode::Strict {
                        return Err(StreamError::Load(e));
                    }
                    summary.failed += 1;
                    let line = ErrorLine {
                        id: None,
                        line: e.line(),
                        error: e.to_string(),
                    };
                    serde_json::to_writer(&mut buf, &line).map_err(std::io::Error::from)?;
                }
                Outcome::Failed(rec, e) => {
                    if mode == Mode::Strict {
                        return Err(StreamError::Rerank {
                            line: rec.line,
                            id: rec.example.id,
                            source: e,
                        });
                    }
                    summary.failed += 1;
                    let line = ErrorLine {
                        id: Some(&rec.example.id),
                        line: Some(rec.line),
                        error: e.to_string(),
                    };
                    serde_json::to_writer(&mut buf, &line).map_err(std::io::Error::from)?;
                }
            }
            buf.push(b'\n');
            out.write_all(&buf)?;
            summary.written += 1;
        }
    }
    out.flush()?;
    Ok(summary)
}
