//! Backend construction and the per-command pipelines.

use std::collections::BTreeMap;

use edutree_backends::{
    solver_critic_refine, BackendError, ChatClient, LayoutDecomposer, RefineOptions, RemoteDecomposer, RemoteGenerator,
    RemoteScorer, RerankClient,
};
use edutree_core::decompose::{BoxError, Decomposer, Decomposition, Generator, Scorer};
use edutree_core::metrics::{
    compression_rate, ted, to_labeled_tree, CostBreakdown, EvalRecord, EvalReport, StageCost,
};
use edutree_core::metrics::report::{ExcludedRecord, ReportHeader};
use edutree_core::prompts;
use edutree_core::rank::{answer_pipeline, compress, AnswerRecord, Bm25Scorer, CompressionRun, Query, RandomScorer};
use edutree_core::segment::{segment, EduSequence, SourceDocument};
use edutree_core::tree::{backbone, parse_augmented_markdown, serialize, validate, ParseMode};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{DecomposerKind, PromptChoice, RunConfig, ScorerKind};
use crate::corpus::{CorpusRecord, GoldTree};
use crate::CliError;

fn backend_error(e: BackendError) -> CliError {
    match e {
        BackendError::Config(_) | BackendError::MissingCredential(_) => CliError::Usage(e.to_string()),
        other => CliError::Pipeline(other.to_string()),
    }
}

/// Remote solver run through the solver-critic loop.
pub struct RefiningDecomposer {
    pub solver: RemoteDecomposer,
    pub critic: Option<RemoteScorer>,
    pub options: RefineOptions,
}

impl Decomposer for RefiningDecomposer {
    fn decompose(&self, doc: &SourceDocument, seq: &EduSequence, _feedback: Option<&str>) -> Result<Decomposition, BoxError> {
        let critic = self.critic.as_ref().map(|c| c as &dyn Scorer);
        let out = solver_critic_refine(doc, seq, &self.solver, critic, &self.options)?;
        let mut diagnostics = out.diagnostics;
        if let Some(last) = out.reports.last() {
            diagnostics.extend(last.deterministic_findings.iter().cloned());
        }
        Ok(Decomposition {
            tree: out.tree,
            diagnostics,
            usage: out.usage,
        })
    }
}

fn chat_client(config: &RunConfig, endpoint: &Option<String>, role: &str) -> Result<ChatClient, CliError> {
    let ep = config
        .endpoint(endpoint)
        .ok_or_else(|| CliError::Usage(format!("{role} needs a configured endpoint")))?;
    ChatClient::new(ep.clone()).map_err(backend_error)
}

pub fn build_decomposer(config: &RunConfig, kind: DecomposerKind, mode: ParseMode) -> Result<Box<dyn Decomposer>, CliError> {
    let d = &config.decomposer;
    let remote = || -> Result<RemoteDecomposer, CliError> {
        let mut r = RemoteDecomposer::new(chat_client(config, &d.endpoint, "decomposer")?, mode);
        if d.prompt == PromptChoice::Outline {
            r.template = prompts::outline_baseline();
        }
        Ok(r)
    };
    Ok(match kind {
        DecomposerKind::Layout => Box::new(LayoutDecomposer),
        DecomposerKind::Remote => Box::new(remote()?),
        DecomposerKind::Refine => {
            let critic = match config.endpoint(&d.critic_endpoint) {
                Some(ep) => Some(RemoteScorer {
                    client: RerankClient::new(ep.clone()).map_err(backend_error)?,
                }),
                None => None,
            };
            Box::new(RefiningDecomposer {
                solver: remote()?,
                critic,
                options: config.refine_options(),
            })
        }
    })
}

pub fn build_scorer(config: &RunConfig) -> Result<Box<dyn Scorer>, CliError> {
    let s = &config.scorer;
    Ok(match s.kind {
        ScorerKind::Bm25 => Box::new(Bm25Scorer { k1: s.k1, b: s.b }),
        ScorerKind::Random => Box::new(RandomScorer {
            seed: config.seed.ok_or_else(|| CliError::Usage("scorer = random requires a seed".into()))?,
        }),
        ScorerKind::Remote => {
            let ep = config
                .endpoint(&s.endpoint)
                .ok_or_else(|| CliError::Usage("scorer = remote needs scorer.endpoint".into()))?;
            Box::new(RemoteScorer {
                client: RerankClient::new(ep.clone()).map_err(backend_error)?,
            })
        }
    })
}

pub fn build_generator(config: &RunConfig) -> Result<Box<dyn Generator>, CliError> {
    Ok(Box::new(RemoteGenerator {
        client: chat_client(config, &config.generator.endpoint, "generator")?,
    }))
}

/// Model id billed for decomposition, if the backend is remote.
fn decomposer_model(config: &RunConfig, kind: DecomposerKind) -> Option<String> {
    match kind {
        DecomposerKind::Layout => None,
        _ => config.endpoint(&config.decomposer.endpoint).map(|e| e.model_id.clone()),
    }
}

/// Where predicted trees come from during evaluation.
pub enum Predictor<'a> {
    Backend(DecomposerKind, &'a dyn Decomposer),
    /// Precomputed outlines keyed by doc_id.
    Stored(&'a BTreeMap<String, GoldTree>),
}

/// Reads a predictions file: JSON lines with `doc_id` and a tree under
/// `prediction`, `tree` or `gold_tree`.
pub fn parse_predictions(text: &str) -> Result<BTreeMap<String, GoldTree>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Input(format!("predictions line {}: {m}", i + 1));
        let v: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let id = match v.get("doc_id").or_else(|| v.get("id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(bad("missing doc_id".into())),
        };
        let tree = ["prediction", "tree", "gold_tree"]
            .iter()
            .find_map(|k| v.get(*k))
            .ok_or_else(|| bad("missing prediction".into()))?;
        let tree: GoldTree = serde_json::from_value(tree.clone()).map_err(|e| bad(e.to_string()))?;
        out.insert(id, tree);
    }
    Ok(out)
}

enum Outcome {
    Scored(EvalRecord),
    Excluded(ExcludedRecord),
}

fn predicted_tree(
    record: &CorpusRecord,
    doc: &SourceDocument,
    seq: &EduSequence,
    predictor: &Predictor<'_>,
    mode: ParseMode,
) -> Result<Result<Decomposition, String>, CliError> {
    match predictor {
        Predictor::Backend(_, d) => {
            let out = d
                .decompose(doc, seq, None)
                .map_err(|e| CliError::Pipeline(format!("decompose stage failed for `{}`: {e}", record.doc_id)))?;
            let errors = validate(&out.tree, seq.len()).into_iter().filter(|d| d.is_error()).count();
            if errors > 0 {
                return Err(CliError::Pipeline(format!(
                    "decompose stage failed for `{}`: tree has {errors} integrity error(s)",
                    record.doc_id
                )));
            }
            Ok(Ok(out))
        }
        Predictor::Stored(map) => Ok(match map.get(&record.doc_id) {
            None => Err("no prediction".into()),
            Some(GoldTree::Markdown(text)) => parse_augmented_markdown(text, seq.len(), mode)
                .map(|(tree, diagnostics)| Decomposition { tree, diagnostics, ..Default::default() })
                .map_err(|e| format!("unparseable prediction: {e}")),
            Some(g @ GoldTree::Nodes(_)) => g
                .resolve(seq.len())
                .map(Decomposition::from_tree)
                .map_err(|e| format!("invalid prediction: {e}")),
        }),
    }
}

fn eval_one(record: &CorpusRecord, config: &RunConfig, predictor: &Predictor<'_>) -> Result<Outcome, CliError> {
    let exclude = |reason: String| {
        Outcome::Excluded(ExcludedRecord {
            doc_id: record.doc_id.clone(),
            reason,
        })
    };
    let doc = record.document();
    let seq = segment(&doc, &config.segmentation);
    let gold = match &record.gold_tree {
        None => return Ok(exclude("no gold tree".into())),
        Some(g) => match g.resolve(seq.len()) {
            Ok(t) => t,
            Err(e) => return Ok(exclude(format!("unparseable gold tree: {e}"))),
        },
    };
    let pred = match predicted_tree(record, &doc, &seq, predictor, config.parse_mode)? {
        Ok(p) => p,
        Err(reason) => return Ok(exclude(reason)),
    };

    let norm = &config.metrics.normalization;
    let distance = ted(
        &to_labeled_tree(&pred.tree, norm),
        &to_labeled_tree(&gold, norm),
        &config.metrics.edit_costs,
    );
    let backbone_match = to_labeled_tree(&backbone(&pred.tree), norm) == to_labeled_tree(&backbone(&gold), norm);
    let unit = config.length_unit()?;
    let doc_len = unit.measure(&record.text);
    let outline_len = unit.measure(&serialize(&pred.tree));
    Ok(Outcome::Scored(EvalRecord {
        doc_id: record.doc_id.clone(),
        doc_token_length: doc_len,
        ted: distance,
        backbone_match,
        compression_rate: compression_rate(outline_len, doc_len).unwrap_or(0.0),
        token_usage: pred.usage,
    }))
}

/// Scores every record and aggregates a report whose content does not
/// depend on `config.workers`.
pub fn run_eval(records: &[CorpusRecord], config: &RunConfig, predictor: &Predictor<'_>) -> Result<EvalReport, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Pipeline(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        records
            .par_iter()
            .map(|r| eval_one(r, config, predictor))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut scored = Vec::new();
    let mut excluded = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Scored(r) => scored.push(r),
            Outcome::Excluded(e) => excluded.push(e),
        }
    }
    let (backend, model) = match predictor {
        Predictor::Backend(kind, _) => (kind.name().to_string(), decomposer_model(config, *kind)),
        Predictor::Stored(_) => ("predictions".to_string(), None),
    };
    let mut costs = CostBreakdown::default();
    if let Some(rates) = model.as_ref().and_then(|m| config.costs.get(m)) {
        let usage = scored.iter().map(|r| r.token_usage).sum();
        costs.push(StageCost::metered("decompose", usage, rates));
    }
    let header = ReportHeader {
        seed: config.seed.unwrap_or(0),
        backend,
        parse_mode: match config.parse_mode {
            ParseMode::Strict => "strict".into(),
            ParseMode::Lenient => "lenient".into(),
        },
    };
    Ok(EvalReport::assemble(header, scored, excluded, config.metrics.n_bins, costs))
}

pub fn run_compress(
    doc: &SourceDocument,
    query: &Query,
    config: &RunConfig,
    decomposer: &dyn Decomposer,
    scorer: &dyn Scorer,
) -> Result<CompressionRun, CliError> {
    let cc = config.compress_config()?;
    compress(doc, query, &cc, decomposer, scorer).map_err(|e| CliError::Pipeline(e.to_string()))
}

/// Side-file statistics for one compression run.
pub fn compress_stats(run: &CompressionRun) -> Value {
    let r = &run.result;
    json!({
        "doc_id": run.sequence.doc_id,
        "n_edus": run.sequence.len(),
        "n_nodes": run.tree.node_count(),
        "tree_coverage": run.tree.coverage(),
        "selected": r.chosen.iter().map(|n| json!({
            "index": n.index,
            "title": n.title,
            "level": n.level,
            "span": n.span,
            "score": n.score,
        })).collect::<Vec<_>>(),
        "intervals": r.intervals,
        "original_length": r.original_length,
        "compressed_length": r.compressed_length,
        "compression_rate": r.compression_rate,
        "length_unit": r.length_unit,
        "usage": run.usage,
        "diagnostics": run.diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

pub fn run_answer(
    records: &[CorpusRecord],
    query: &Query,
    config: &RunConfig,
    decomposer: &dyn Decomposer,
    scorer: &dyn Scorer,
    generator: &dyn Generator,
) -> Result<AnswerRecord, CliError> {
    let docs: Vec<SourceDocument> = records.iter().map(CorpusRecord::document).collect();
    let cc = config.compress_config()?;
    answer_pipeline(&docs, query, &cc, decomposer, scorer, generator).map_err(|e| CliError::Pipeline(e.to_string()))
}

/// Canonical outline plus JSON tree for one document.
pub fn decompose_document(
    doc: &SourceDocument,
    config: &RunConfig,
    decomposer: &dyn Decomposer,
) -> Result<(EduSequence, Decomposition), CliError> {
    let seq = segment(doc, &config.segmentation);
    let out = decomposer
        .decompose(doc, &seq, None)
        .map_err(|e| CliError::Pipeline(format!("decompose stage failed for `{}`: {}", doc.doc_id, describe(&*e))))?;
    Ok((seq, out))
}

/// Error message including strict-mode diagnostics when present.
fn describe(e: &(dyn std::error::Error + 'static)) -> String {
    if let Some(BackendError::Schema(s)) = e.downcast_ref::<BackendError>() {
        let lines: Vec<String> = s.0.iter().map(ToString::to_string).collect();
        return format!("{s}\n{}", lines.join("\n"));
    }
    e.to_string()
}
