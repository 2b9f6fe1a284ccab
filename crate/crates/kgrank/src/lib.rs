//! IO, configuration, the HTTP relevance client, the parallel pipeline and
//! the command line around `kgrank-core`.

pub mod cli;
pub mod client;
pub mod config;
pub mod followups;
pub mod io;
pub mod pipeline;
pub mod report;

pub use client::{HttpScorer, Scorer};
pub use config::{Endpoint, Mode, RunConfig};
pub use io::{load_examples, read_records, write_records, LoadError, Record};
pub use pipeline::{rerank_stream, StreamError, StreamSummary};
