//! Follow-up utterance catalog for the relevance scorer.

use std::path::{Path, PathBuf};

use kgrank_core::QualityDimension;
use serde::Deserialize;

/// The bundled catalog, covering every dimension of all four groups.
pub const DEFAULT_FOLLOWUPS: &str = include_str!("../data/fed_followups.toml");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("reading follow-up catalog {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing follow-up catalog: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("follow-up catalog: {0}")]
    Invalid(#[from] kgrank_core::scoring::DimensionError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    dimension: Vec<QualityDimension>,
}

pub fn parse_catalog(text: &str) -> Result<Vec<QualityDimension>, CatalogError> {
    let file: CatalogFile = toml::from_str(text)?;
    for d in &file.dimension {
        d.validate()?;
    }
    Ok(file.dimension)
}

/// Loads `path`, or the bundled catalog when `None`.
pub fn load_catalog(path: Option<&Path>) -> Result<Vec<QualityDimension>, CatalogError> {
    match path {
        None => parse_catalog(DEFAULT_FOLLOWUPS),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CatalogError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_catalog(&text)
        }
    }
}
