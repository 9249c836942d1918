//! The `edutree` command line: segment, decompose, compress, eval, answer.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 when a pipeline
//! stage or remote backend fails.

pub mod config;
pub mod corpus;
pub mod harness;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edutree_core::rank::Query;
use edutree_core::segment::{segment, FormatHint, SourceDocument};
use edutree_core::tree::{serialize, ParseMode};

use crate::config::{DecomposerKind, RunConfig, ScorerKind};
use crate::corpus::read_corpus;
use crate::harness::Predictor;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "edutree", version, about = "Structure-then-select context compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the tab-separated EDU dump of a document.
    Segment {
        input: PathBuf,
        #[arg(long)]
        format: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the canonical augmented-markdown tree of a document.
    Decompose {
        input: PathBuf,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        format: Option<String>,
        /// Also write the JSON tree here.
        #[arg(long)]
        tree_json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the compressed document; statistics go to a side file.
    Compress {
        input: PathBuf,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        format: Option<String>,
        /// Statistics file [default: <input>.stats.json].
        #[arg(long)]
        stats: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predicted trees against a gold corpus.
    Eval {
        corpus: PathBuf,
        /// JSON lines of precomputed outlines; otherwise the backend runs.
        #[arg(long, conflicts_with = "backend")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for report.json and report.txt.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compress a corpus for a query and answer from the compressed context.
    Answer {
        corpus: PathBuf,
        #[arg(long)]
        query: String,
        /// Restrict to these documents.
        #[arg(long = "doc-id")]
        doc_ids: Vec<String>,
        #[arg(long)]
        backend: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn parse_format(flag: Option<&str>, path: &Path) -> Result<FormatHint, CliError> {
    match flag {
        Some("plain") => Ok(FormatHint::Plain),
        Some("markdown") => Ok(FormatHint::Markdown),
        Some("html-derived") => Ok(FormatHint::HtmlDerived),
        Some(other) => Err(CliError::Usage(format!("unknown format `{other}`"))),
        None => Ok(match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => FormatHint::Plain,
            _ => FormatHint::Markdown,
        }),
    }
}

fn read_document(path: &Path, format: Option<&str>) -> Result<SourceDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let doc_id = path.file_stem().map_or_else(|| "doc".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(SourceDocument::new(doc_id, text).with_format(parse_format(format, path)?))
}

fn decomposer_kind(flag: Option<&str>, config: &RunConfig) -> Result<DecomposerKind, CliError> {
    match flag {
        Some(s) => s.parse().map_err(CliError::Usage),
        None => Ok(config.decomposer.kind),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn io(e: std::io::Error) -> CliError {
    CliError::Pipeline(format!("cannot write output: {e}"))
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 2;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Segment { input, format, common } => {
            let config = load_config(&common)?;
            let doc = read_document(&input, format.as_deref())?;
            let seq = segment(&doc, &config.segmentation);
            stdout.write_all(seq.dump().as_bytes()).map_err(io)
        }
        Command::Decompose {
            input,
            backend,
            mode,
            format,
            tree_json,
            common,
        } => {
            let config = load_config(&common)?;
            let mode: ParseMode = match mode {
                Some(m) => m.parse().map_err(CliError::Usage)?,
                None => config.parse_mode,
            };
            let kind = decomposer_kind(backend.as_deref(), &config)?;
            let doc = read_document(&input, format.as_deref())?;
            let decomposer = harness::build_decomposer(&config, kind, mode)?;
            let (_, out) = harness::decompose_document(&doc, &config, decomposer.as_ref())?;
            for d in &out.diagnostics {
                let _ = writeln!(stderr, "{d}");
            }
            let tree = out.tree.with_doc_id(&doc.doc_id);
            let mut text = serialize(&tree);
            if !text.is_empty() {
                text.push('\n');
            }
            stdout.write_all(text.as_bytes()).map_err(io)?;
            if let Some(path) = tree_json {
                let mut json = tree.to_json();
                json.push('\n');
                write_file(&path, &json)?;
            }
            Ok(())
        }
        Command::Compress {
            input,
            query,
            backend,
            format,
            stats,
            common,
        } => {
            let config = load_config(&common)?;
            let query = match (query, config.scorer.kind) {
                (Some(q), _) => q,
                (None, ScorerKind::Random) => String::new(),
                (None, _) => return Err(CliError::Usage("--query is required unless scorer = random".into())),
            };
            let kind = decomposer_kind(backend.as_deref(), &config)?;
            let doc = read_document(&input, format.as_deref())?;
            let decomposer = harness::build_decomposer(&config, kind, config.parse_mode)?;
            let scorer = harness::build_scorer(&config)?;
            let run = harness::run_compress(&doc, &Query::new(query), &config, decomposer.as_ref(), scorer.as_ref())?;
            let mut text = run.result.linearized.clone();
            if !text.is_empty() {
                text.push('\n');
            }
            stdout.write_all(text.as_bytes()).map_err(io)?;
            let stats_path = stats.unwrap_or_else(|| {
                let mut p = input.clone().into_os_string();
                p.push(".stats.json");
                PathBuf::from(p)
            });
            let mut json = serde_json::to_string_pretty(&harness::compress_stats(&run)).expect("stats serialize");
            json.push('\n');
            write_file(&stats_path, &json)
        }
        Command::Eval {
            corpus,
            predictions,
            backend,
            workers,
            out,
            common,
        } => {
            let mut config = load_config(&common)?;
            if let Some(w) = workers {
                if w == 0 {
                    return Err(CliError::Usage("--workers must be at least 1".into()));
                }
                config.workers = w;
            }
            let records = read_corpus(&corpus)?;
            let report = match predictions {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
                    let map = harness::parse_predictions(&text)?;
                    harness::run_eval(&records, &config, &Predictor::Stored(&map))?
                }
                None => {
                    let kind = decomposer_kind(backend.as_deref(), &config)?;
                    let decomposer = harness::build_decomposer(&config, kind, config.parse_mode)?;
                    harness::run_eval(&records, &config, &Predictor::Backend(kind, decomposer.as_ref()))?
                }
            };
            std::fs::create_dir_all(&out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
            write_file(&out.join("report.json"), &report.to_json())?;
            let table = report.to_table();
            write_file(&out.join("report.txt"), &table)?;
            if !report.excluded.is_empty() {
                let _ = writeln!(stderr, "warning: {} record(s) excluded", report.excluded.len());
            }
            stdout.write_all(table.as_bytes()).map_err(io)
        }
        Command::Answer {
            corpus,
            query,
            doc_ids,
            backend,
            common,
        } => {
            let config = load_config(&common)?;
            let records = read_corpus(&corpus)?;
            let kind = decomposer_kind(backend.as_deref(), &config)?;
            let decomposer = harness::build_decomposer(&config, kind, config.parse_mode)?;
            let scorer = harness::build_scorer(&config)?;
            let generator = harness::build_generator(&config)?;
            let mut q = Query::new(query);
            if !doc_ids.is_empty() {
                q.doc_ids = Some(doc_ids);
            }
            let record = harness::run_answer(&records, &q, &config, decomposer.as_ref(), scorer.as_ref(), generator.as_ref())?;
            let mut json = serde_json::to_string_pretty(&record).expect("answer serializes");
            json.push('\n');
            stdout.write_all(json.as_bytes()).map_err(io)
        }
    }
}
