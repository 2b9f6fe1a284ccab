//! Run configuration: one TOML or JSON document, overridable from the
//! command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use kgrank_core::{FilterPolicy, MockScorer, ScorerConfig};
use reqwest::Url;
use serde::Deserialize;

/// Environment variable holding the default relevance scorer endpoint.
pub const SCORER_URL_ENV: &str = "PICK_SCORER_URL";

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("{0}: config must end in .toml or .json")]
    UnknownFormat(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EndpointError {
    #[error("unknown mock scorer `{0}` (expected zero or neg-length)")]
    UnknownMock(String),
    #[error("endpoint `{0}` is not an http(s) URL")]
    NotHttp(String),
}

/// Where relevance log-likelihoods come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Mock(MockScorer),
    Http(Url),
}

impl FromStr for Endpoint {
    type Err = EndpointError;

    /// Accepts `mock:<name>` or an `http://` / `https://` base URL.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix("mock:") {
            return MockScorer::from_name(name)
                .map(Endpoint::Mock)
                .ok_or_else(|| EndpointError::UnknownMock(name.to_string()));
        }
        match Url::parse(s) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => Ok(Endpoint::Http(u)),
            _ => Err(EndpointError::NotHttp(s.to_string())),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Mock(m) => write!(f, "mock:{}", m.name()),
            Endpoint::Http(u) => write!(f, "{u}"),
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The first failing record aborts the run.
    Strict,
    /// Failing records become error lines; the run continues.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scorer: ScorerConfig,
    pub filter: FilterPolicy,
    pub scorer_endpoint: Option<Endpoint>,
    /// Worker threads, hence the maximum number of scorer requests in flight.
    pub concurrency: usize,
    pub mode: Mode,
    /// Replacement follow-up catalog; the bundled one when absent.
    pub followups: Option<PathBuf>,
    pub timeout_secs: f64,
    /// Extra attempts after a transport failure.
    pub retries: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scorer: ScorerConfig::default(),
            filter: FilterPolicy::default(),
            scorer_endpoint: None,
            concurrency: 1,
            mode: Mode::default(),
            followups: None,
            timeout_secs: 30.0,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunConfigError {
    #[error("concurrency must be at least 1")]
    ZeroConcurrency,
    #[error("timeout_secs must be positive and finite")]
    BadTimeout,
    #[error("relevance set `{0}` needs a scorer endpoint (--scorer-url, --mock-scorer or {SCORER_URL_ENV})")]
    NoEndpoint(&'static str),
    #[error(transparent)]
    Scorer(#[from] kgrank_core::scoring::ConfigError),
    #[error(transparent)]
    Filter(#[from] kgrank_core::filters::PolicyError),
}

impl RunConfig {
    /// Reads a config document; the format follows the file extension.
    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let invalid = |reason: String| ConfigFileError::Invalid {
            path: path.to_path_buf(),
            reason,
        };
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => {
                let de = toml::Deserializer::parse(&text).map_err(|e| invalid(e.to_string()))?;
                serde_path_to_error::deserialize(de).map_err(|e| invalid(e.to_string()))
            }
            Some("json") => {
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de).map_err(|e| invalid(e.to_string()))
            }
            _ => Err(ConfigFileError::UnknownFormat(path.to_path_buf())),
        }
    }

    /// Fills a missing endpoint from the environment value, if any.
    pub fn with_env_endpoint(mut self, env_value: Option<&str>) -> Result<Self, EndpointError> {
        if self.scorer_endpoint.is_none() {
            if let Some(v) = env_value.filter(|v| !v.trim().is_empty()) {
                self.scorer_endpoint = Some(v.trim().parse()?);
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), RunConfigError> {
        self.scorer.validate()?;
        self.filter.validate()?;
        if self.concurrency == 0 {
            return Err(RunConfigError::ZeroConcurrency);
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(RunConfigError::BadTimeout);
        }
        if self.scorer.uses_relevance() && self.scorer_endpoint.is_none() {
            return Err(RunConfigError::NoEndpoint(self.scorer.relevance_set.name()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgrank_core::{Aggregation, FaithfulnessMetric, RelevanceSet};
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn endpoint_forms() {
        assert_eq!("mock:zero".parse(), Ok(Endpoint::Mock(MockScorer::Zero)));
        assert_eq!("mock:neg-length".parse(), Ok(Endpoint::Mock(MockScorer::NegLength)));
        assert!(matches!("mock:x".parse::<Endpoint>(), Err(EndpointError::UnknownMock(_))));
        assert!(matches!("ftp://h".parse::<Endpoint>(), Err(EndpointError::NotHttp(_))));
        assert!(matches!("localhost:8000".parse::<Endpoint>(), Err(EndpointError::NotHttp(_))));
        assert!(matches!("http://127.0.0.1:8000".parse::<Endpoint>(), Ok(Endpoint::Http(_))));
    }

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            &dir,
            "c.toml",
            r#"
scorer_endpoint = "mock:neg-length"
concurrency = 4
mode = "strict"
[scorer]
faithfulness_metric = "rouge_l"
relevance_set = "fed_all"
aggregation = { weighted_sum = { w_d = 0.5, w_k = 2.0 } }
[filter]
max_word_chars = 20
"#,
        );
        let j = write(
            &dir,
            "c.json",
            r#"{"scorer_endpoint": "mock:neg-length", "concurrency": 4, "mode": "strict",
                "scorer": {"faithfulness_metric": "rouge_l", "relevance_set": "fed_all",
                           "aggregation": {"weighted_sum": {"w_d": 0.5, "w_k": 2.0}}},
                "filter": {"max_word_chars": 20}}"#,
        );
        let a = RunConfig::load(&t).unwrap();
        assert_eq!(a, RunConfig::load(&j).unwrap());
        assert_eq!(a.scorer.faithfulness_metric, FaithfulnessMetric::RougeL);
        assert_eq!(a.scorer.relevance_set, RelevanceSet::FedAll);
        assert_eq!(a.scorer.aggregation, Aggregation::WeightedSum { w_d: 0.5, w_k: 2.0 });
        assert_eq!(a.filter.rep_run, 3);
        assert_eq!(a.mode, Mode::Strict);
        a.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_extensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.toml", "concurrancy = 2\n");
        let err = RunConfig::load(&p).unwrap_err().to_string();
        assert!(err.contains("concurrancy"), "{err}");
        let p = write(&dir, "c.yaml", "");
        assert!(matches!(RunConfig::load(&p), Err(ConfigFileError::UnknownFormat(_))));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert_eq!(c.validate(), Err(RunConfigError::NoEndpoint("fed_turn_basic")));
        c = c.with_env_endpoint(Some("http://localhost:9000")).unwrap();
        assert!(c.validate().is_ok());
        c.concurrency = 0;
        assert_eq!(c.validate(), Err(RunConfigError::ZeroConcurrency));
        c.concurrency = 1;
        c.scorer = ScorerConfig {
            faithfulness_metric: FaithfulnessMetric::None,
            relevance_set: RelevanceSet::None,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(RunConfigError::Scorer(_))));
    }

    #[test]
    fn explicit_endpoint_beats_environment() {
        let c = RunConfig {
            scorer_endpoint: Some(Endpoint::Mock(MockScorer::Zero)),
            ..Default::default()
        };
        let c = c.with_env_endpoint(Some("http://elsewhere:1")).unwrap();
        assert_eq!(c.scorer_endpoint, Some(Endpoint::Mock(MockScorer::Zero)));
    }
}
