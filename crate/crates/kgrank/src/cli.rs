//! Command-line front end. Exit codes: 0 success, 1 runtime or strict-mode
//! failure, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgrank_core::{
    compare_configs, evaluate_corpus, EvalItem, FaithfulnessMetric, KnCopyMode, MockScorer, RelevanceSet,
    Reranker,
};

use crate::client::Scorer;
use crate::config::{Endpoint, Mode, RunConfig, SCORER_URL_ENV};
use crate::followups::load_catalog;
use crate::io::{load_examples, read_records};
use crate::pipeline::rerank_stream;
use crate::report::{grid_json, load_report_dir, read_predictions, report_json};

#[derive(Debug, Parser)]
#[command(name = "kgrank", version, about = "Re-rank knowledge-grounded dialogue candidates and evaluate the picks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, score and pick one candidate per input record.
    Rerank(RerankArgs),
    /// Score selected responses against gold responses and knowledge.
    Eval(EvalArgs),
    /// Sum of per-metric z-scores across several evaluation reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct RerankArgs {
    /// Input records, one JSON object per line.
    #[arg(long)]
    input: PathBuf,
    /// Run configuration (.toml or .json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Base URL of the log-likelihood service.
    #[arg(long, conflicts_with = "mock_scorer")]
    scorer_url: Option<String>,
    /// Model-free relevance scorer.
    #[arg(long, value_parser = ["zero", "neg-length"])]
    mock_scorer: Option<String>,
    /// fed_turn_basic, fed_turn_further, fed_dialogue_basic,
    /// fed_dialogue_further, fed_turn_all, fed_dialogue_all, fed_all or none.
    #[arg(long, value_parser = parse_relevance)]
    relevance_set: Option<RelevanceSet>,
    /// kf1, sentence_bleu4, rouge_l or none.
    #[arg(long, value_parser = parse_faithfulness)]
    faithfulness: Option<FaithfulnessMetric>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Stop at the first failing record.
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Write failing records as error lines and continue.
    #[arg(long)]
    lenient: bool,
    /// Follow-up utterance catalog replacing the bundled one.
    #[arg(long)]
    followups: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KnCopyArg {
    Span,
    Exact,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Output of `rerank`.
    #[arg(long, required_unless_present = "vanilla")]
    pred: Option<PathBuf>,
    /// The input records the predictions were made for.
    #[arg(long)]
    input: PathBuf,
    /// Evaluate each pool's first candidate instead of predictions.
    #[arg(long, conflicts_with = "pred")]
    vanilla: bool,
    /// Split name in the report; the input file stem by default.
    #[arg(long)]
    split: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KnCopyArg::Span)]
    kn_copy: KnCopyArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Directory of `<relevance>__<faithfulness>.json` reports.
    #[arg(long)]
    reports: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_relevance(s: &str) -> Result<RelevanceSet, String> {
    RelevanceSet::from_name(s).ok_or_else(|| format!("unknown relevance set `{s}`"))
}

fn parse_faithfulness(s: &str) -> Result<FaithfulnessMetric, String> {
    FaithfulnessMetric::from_name(s).ok_or_else(|| format!("unknown faithfulness metric `{s}`"))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Rerank(a) => rerank(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

fn resolve_config(a: &RerankArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(url) = &a.scorer_url {
        cfg.scorer_endpoint = Some(url.parse().map_err(usage)?);
    }
    if let Some(name) = &a.mock_scorer {
        let m = MockScorer::from_name(name).ok_or_else(|| usage(format!("unknown mock scorer `{name}`")))?;
        cfg.scorer_endpoint = Some(Endpoint::Mock(m));
    }
    if let Some(set) = a.relevance_set {
        cfg.scorer.relevance_set = set;
    }
    if let Some(metric) = a.faithfulness {
        cfg.scorer.faithfulness_metric = metric;
    }
    if let Some(n) = a.concurrency {
        cfg.concurrency = n;
    }
    if a.strict {
        cfg.mode = Mode::Strict;
    }
    if a.lenient {
        cfg.mode = Mode::Lenient;
    }
    if a.followups.is_some() {
        cfg.followups = a.followups.clone();
    }
    let env = std::env::var(SCORER_URL_ENV).ok();
    let cfg = cfg.with_env_endpoint(env.as_deref()).map_err(usage)?;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes()).map_err(runtime)?;
    if !text.ends_with('\n') {
        out.write_all(b"\n").map_err(runtime)?;
    }
    out.flush().map_err(runtime)
}

fn rerank(a: RerankArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&a)?;
    let catalog = load_catalog(cfg.followups.as_deref()).map_err(usage)?;
    let reranker = Reranker::new(cfg.scorer, cfg.filter, &catalog).map_err(usage)?;
    let scorer = match (&cfg.scorer_endpoint, cfg.scorer.uses_relevance()) {
        (Some(ep), true) => Scorer::connect(ep, cfg.timeout(), cfg.retries).map_err(runtime)?,
        // never queried without a relevance set
        _ => Scorer::Mock(MockScorer::Zero),
    };

    let input = File::open(&a.input).map_err(|e| runtime(format!("{}: {e}", a.input.display())))?;
    let out = open_output(a.output.as_deref())?;
    let summary = rerank_stream(
        read_records(BufReader::new(input)),
        &reranker,
        &scorer,
        cfg.concurrency,
        cfg.mode,
        out,
    )
    .map_err(runtime)?;
    eprintln!(
        "{} record(s) written, {} failed, {} fell back to the first candidate",
        summary.written, summary.failed, summary.fallbacks
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let records = load_examples(&a.input).map_err(|e| runtime(format!("{}: {e}", a.input.display())))?;
    let split = a.split.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let kn_mode = match a.kn_copy {
        KnCopyArg::Span => KnCopyMode::default(),
        KnCopyArg::Exact => KnCopyMode::Exact,
    };

    let preds = match a.pred.as_deref() {
        Some(path) if !a.vanilla => {
            let file = File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            read_predictions(BufReader::new(file)).map_err(runtime)?
        }
        _ => Default::default(),
    };
    let items: Vec<EvalItem> = if a.vanilla {
        records
            .iter()
            .map(|r| EvalItem {
                example: &r.example,
                selected: r.pool.vanilla(),
                fallback_used: false,
            })
            .collect()
    } else {
        let mut items = Vec::with_capacity(records.len());
        for r in &records {
            let p = preds
                .get(&r.example.id)
                .ok_or_else(|| runtime(format!("no prediction for `{}`", r.example.id)))?;
            items.push(EvalItem {
                example: &r.example,
                selected: &p.selected_text,
                fallback_used: p.fallback_used,
            });
        }
        if preds.len() != items.len() {
            return Err(runtime(format!(
                "{} prediction(s) have no matching input record",
                preds.len() - items.len()
            )));
        }
        items
    };

    let report = evaluate_corpus(&split, &items, kn_mode).map_err(runtime)?;
    let text = match a.format {
        Format::Json => report_json(&report),
        Format::Table => report.to_table(),
    };
    write_text(a.output.as_deref(), &text)
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let reports = load_report_dir(&a.reports).map_err(runtime)?;
    let grid = compare_configs(&reports).map_err(runtime)?;
    let text = match a.format {
        Format::Json => grid_json(&grid),
        Format::Table => grid.to_table(),
    };
    write_text(a.output.as_deref(), &text)
}
