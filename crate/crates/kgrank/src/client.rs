//! HTTP client for a follow-up log-likelihood service.
//!
//! Wire protocol:
//! - `POST {base}/v1/loglik` with `{context, response, followup}` answers
//!   `{log_likelihood}`.
//! - `POST {base}/v1/loglik_batch` with an array of requests answers an
//!   array of `{log_likelihood}` objects in the same order.
//! - `GET {base}/v1/health` answers `{model, version, ready}`.
//!
//! Transport failures and 503 (model still loading) are retried; anything
//! else that is not a well-formed 200 reply is a protocol error.

use std::thread;
use std::time::Duration;

use kgrank_core::{LoglikRequest, MockScorer, RelevanceScorer, ScorerError};
use reqwest::blocking::{Client, Response};
use reqwest::{StatusCode, Url};
use serde::Deserialize;

use crate::config::Endpoint;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoglikReply {
    log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub model: String,
    pub version: String,
    pub ready: bool,
}

#[derive(Debug, Clone)]
pub struct HttpScorer {
    base: Url,
    client: Client,
    retries: u32,
    backoff: Duration,
}

enum Attempt {
    Retry(String),
    Fail(ScorerError),
}

impl HttpScorer {
    pub fn new(base: Url, timeout: Duration, retries: u32) -> Result<Self, ScorerError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScorerError::Unavailable(e.to_string()))?;
        Ok(Self {
            base,
            client,
            retries,
            backoff: Duration::from_millis(200),
        })
    }

    /// Delay before the first retry; doubles on each further attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn url(&self, path: &str) -> Result<Url, ScorerError> {
        let mut base = self.base.clone();
        if !base.path().ends_with('/') {
            let p = format!("{}/", base.path());
            base.set_path(&p);
        }
        base.join(path).map_err(|e| ScorerError::Protocol(e.to_string()))
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, Attempt>) -> Result<T, ScorerError> {
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match call() {
                Ok(v) => return Ok(v),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(ScorerError::Unavailable(format!(
            "{} attempt(s) failed, last: {last}",
            self.retries + 1
        )))
    }

    fn post<B: serde::Serialize + ?Sized, T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ScorerError> {
        let url = self.url(path)?;
        self.with_retries(|| {
            let resp = self
                .client
                .post(url.clone())
                .json(body)
                .send()
                .map_err(|e| Attempt::Retry(e.to_string()))?;
            decode(resp)
        })
    }

    pub fn health(&self) -> Result<Health, ScorerError> {
        let url = self.url("v1/health")?;
        self.with_retries(|| {
            let resp = self
                .client
                .get(url.clone())
                .send()
                .map_err(|e| Attempt::Retry(e.to_string()))?;
            decode(resp)
        })
    }
}

fn decode<T: serde::de::DeserializeOwned>(resp: Response) -> Result<T, Attempt> {
    let status = resp.status();
    if status == StatusCode::SERVICE_UNAVAILABLE {
        return Err(Attempt::Retry(format!("HTTP {status}")));
    }
    let body = resp.bytes().map_err(|e| Attempt::Retry(e.to_string()))?;
    if status != StatusCode::OK {
        let text = String::from_utf8_lossy(&body);
        return Err(Attempt::Fail(ScorerError::Protocol(format!("HTTP {status}: {}", text.trim()))));
    }
    serde_json::from_slice(&body)
        .map_err(|e| Attempt::Fail(ScorerError::Protocol(format!("malformed reply: {e}"))))
}

fn finite(v: f64) -> Result<f64, ScorerError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScorerError::Protocol(format!("non-finite log-likelihood {v}")))
    }
}

impl RelevanceScorer for HttpScorer {
    fn loglik(&self, request: &LoglikRequest) -> Result<f64, ScorerError> {
        let reply: LoglikReply = self.post("v1/loglik", request)?;
        finite(reply.log_likelihood)
    }

    fn loglik_batch(&self, requests: &[LoglikRequest]) -> Result<Vec<f64>, ScorerError> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let replies: Vec<LoglikReply> = self.post("v1/loglik_batch", requests)?;
        if replies.len() != requests.len() {
            return Err(ScorerError::Protocol(format!(
                "sent {} requests, got {} replies",
                requests.len(),
                replies.len()
            )));
        }
        replies.into_iter().map(|r| finite(r.log_likelihood)).collect()
    }
}

/// A scorer chosen at run time.
#[derive(Debug, Clone)]
pub enum Scorer {
    Mock(MockScorer),
    Http(HttpScorer),
}

impl Scorer {
    pub fn connect(endpoint: &Endpoint, timeout: Duration, retries: u32) -> Result<Self, ScorerError> {
        Ok(match endpoint {
            Endpoint::Mock(m) => Scorer::Mock(*m),
            Endpoint::Http(u) => Scorer::Http(HttpScorer::new(u.clone(), timeout, retries)?),
        })
    }
}

impl RelevanceScorer for Scorer {
    fn loglik(&self, request: &LoglikRequest) -> Result<f64, ScorerError> {
        match self {
            Scorer::Mock(m) => m.loglik(request),
            Scorer::Http(h) => h.loglik(request),
        }
    }

    fn loglik_batch(&self, requests: &[LoglikRequest]) -> Result<Vec<f64>, ScorerError> {
        match self {
            Scorer::Mock(m) => m.loglik_batch(requests),
            Scorer::Http(h) => h.loglik_batch(requests),
        }
    }
}
