//! End-to-end compression and citation-checked answering.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::select::{select_budget, select_topk, CompressionResult, OverflowPolicy, SelectionBudget, DEFAULT_TOP_K};
use super::{score_nodes, Query, ScoringOptions};
use crate::decompose::{BoxError, Decomposer, Generator, Scorer, TokenUsage};
use crate::length::LengthUnit;
use crate::prompts;
use crate::segment::{segment, EduSequence, SegmentationRules, SourceDocument};
use crate::tree::{validate, Diagnostic, SpanRef, StructureTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum SelectionRule {
    Budget {
        b_max: usize,
        #[serde(default)]
        overflow: OverflowPolicy,
    },
    TopK {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_k() -> usize {
    DEFAULT_TOP_K
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::TopK { k: DEFAULT_TOP_K }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompressConfig {
    pub segmentation: SegmentationRules,
    pub scoring: ScoringOptions,
    pub selection: SelectionRule,
    pub length_unit: LengthUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Segment,
    Decompose,
    Score,
    Select,
    Generate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Segment => "segment",
            Stage::Decompose => "decompose",
            Stage::Score => "score",
            Stage::Select => "select",
            Stage::Generate => "generate",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed for `{doc_id}`: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub doc_id: String,
    #[source]
    pub source: BoxError,
}

impl PipelineError {
    fn new(stage: Stage, doc_id: &str, source: impl Into<BoxError>) -> Self {
        Self {
            stage,
            doc_id: doc_id.to_string(),
            source: source.into(),
        }
    }
}

/// Everything a compression run produced, not just the selected text.
#[derive(Debug, Clone)]
pub struct CompressionRun {
    pub sequence: EduSequence,
    pub tree: StructureTree,
    pub diagnostics: Vec<Diagnostic>,
    pub usage: TokenUsage,
    pub result: CompressionResult,
}

#[derive(Debug, thiserror::Error)]
#[error("decomposer returned a tree with {0} integrity error(s)")]
struct IntegrityError(usize);

/// Segment, decompose, score, select and linearize one document.
pub fn compress(
    doc: &SourceDocument,
    query: &Query,
    config: &CompressConfig,
    decomposer: &dyn Decomposer,
    scorer: &dyn Scorer,
) -> Result<CompressionRun, PipelineError> {
    let sequence = segment(doc, &config.segmentation);
    if sequence.is_empty() {
        return Ok(CompressionRun {
            tree: StructureTree::new(0, Vec::new()).with_doc_id(&doc.doc_id),
            sequence,
            diagnostics: Vec::new(),
            usage: TokenUsage::default(),
            result: CompressionResult::empty(&config.length_unit),
        });
    }

    let decomposition = decomposer
        .decompose(doc, &sequence, None)
        .map_err(|e| PipelineError::new(Stage::Decompose, &doc.doc_id, e))?;
    let errors = validate(&decomposition.tree, sequence.len())
        .into_iter()
        .filter(Diagnostic::is_error)
        .count();
    if errors > 0 {
        return Err(PipelineError::new(Stage::Decompose, &doc.doc_id, IntegrityError(errors)));
    }

    let ranked = score_nodes(&query.text, &decomposition.tree, &sequence, scorer, &config.scoring)
        .map_err(|e| PipelineError::new(Stage::Score, &doc.doc_id, e))?;

    let chosen = match config.selection {
        SelectionRule::Budget { b_max, overflow } => select_budget(
            &ranked,
            &sequence,
            &SelectionBudget::new(b_max, config.length_unit.clone()),
            overflow,
        ),
        SelectionRule::TopK { k } => select_topk(&ranked, k),
    };
    let result = CompressionResult::build(chosen, ranked, &sequence, &config.length_unit)
        .map_err(|e| PipelineError::new(Stage::Select, &doc.doc_id, e))?;

    Ok(CompressionRun {
        sequence,
        tree: decomposition.tree.with_doc_id(&doc.doc_id),
        diagnostics: decomposition.diagnostics,
        usage: decomposition.usage,
        result,
    })
}

/// Context block for one or more compressed documents.
///
/// Ids are shifted so that they stay unique across documents: the units of
/// the k-th document are numbered after all units of the previous ones.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnswerContext {
    pub text: String,
    /// Global id intervals present in `text`, ascending.
    pub intervals: Vec<SpanRef>,
}

impl AnswerContext {
    pub fn contains(&self, id: usize) -> bool {
        self.intervals.iter().any(|s| s.start <= id && id <= s.end)
    }
}

pub fn build_context(runs: &[CompressionRun]) -> AnswerContext {
    let mut offset = 0;
    let mut blocks = Vec::new();
    let mut intervals = Vec::new();
    for run in runs {
        for iv in &run.result.intervals {
            let text = run
                .sequence
                .retrieve(*iv)
                .expect("intervals come from the same sequence");
            let global = SpanRef::new(iv.start + offset, iv.end + offset);
            blocks.push(format!("[{}] {}", global.start, text));
            intervals.push(global);
        }
        offset += run.sequence.len();
    }
    AnswerContext {
        text: blocks.join("\n\n"),
        intervals,
    }
}

static CITATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[\s*([0-9]+(?:\s*(?:,|;|，|-|–|--)\s*[0-9]+)*)\s*\]").unwrap()
});
static CITATION_PART: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(--|-|–)?\s*([0-9]+)").unwrap());

const MAX_RANGE_EXPANSION: usize = 1000;

/// Bracketed node ids cited in `reply`, e.g. `[3]`, `[12, 15]` or `[4-6]`;
/// sorted and deduplicated.
pub fn extract_citations(reply: &str) -> Vec<usize> {
    let mut ids = Vec::new();
    for caps in CITATION.captures_iter(reply) {
        let mut prev: Option<usize> = None;
        for part in CITATION_PART.captures_iter(&caps[1]) {
            let Ok(id) = part[2].parse::<usize>() else { continue };
            match (part.get(1), prev) {
                (Some(_), Some(p)) if p < id && id - p <= MAX_RANGE_EXPANSION => ids.extend(p..=id),
                _ => ids.push(id),
            }
            prev = Some(id);
        }
    }
    ids.sort_unstable();
    ids.dedup();
    ids
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageUsage {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query: String,
    pub answer: String,
    pub context: AnswerContext,
    pub citations: Vec<usize>,
    /// Cited ids that do not occur in the provided context.
    pub hallucinated: Vec<usize>,
    pub usage: TokenUsage,
    pub stage_usage: Vec<StageUsage>,
}

/// Answers `query` from already compressed documents.
pub fn answer_from_runs(
    runs: &[CompressionRun],
    query: &Query,
    generator: &dyn Generator,
) -> Result<AnswerRecord, PipelineError> {
    let context = build_context(runs);
    let prompt = prompts::qa_user().render(&[("query", &query.text), ("context", &context.text)]);
    let (answer, gen_usage) = generator
        .generate(Some(prompts::QA_SYSTEM), &prompt)
        .map_err(|e| PipelineError::new(Stage::Generate, "", e))?;

    let citations = extract_citations(&answer);
    let hallucinated = citations.iter().copied().filter(|&id| !context.contains(id)).collect();
    let mut stage_usage: Vec<StageUsage> = runs
        .iter()
        .map(|r| StageUsage {
            stage: Stage::Decompose,
            doc_id: Some(r.sequence.doc_id.clone()),
            usage: r.usage,
        })
        .collect();
    stage_usage.push(StageUsage {
        stage: Stage::Generate,
        doc_id: None,
        usage: gen_usage,
    });
    let usage = stage_usage.iter().map(|s| s.usage).sum();

    Ok(AnswerRecord {
        query: query.text.clone(),
        answer,
        context,
        citations,
        hallucinated,
        usage,
        stage_usage,
    })
}

/// Compresses every in-scope document, then answers from the combined
/// context.
pub fn answer_pipeline(
    docs: &[SourceDocument],
    query: &Query,
    config: &CompressConfig,
    decomposer: &dyn Decomposer,
    scorer: &dyn Scorer,
    generator: &dyn Generator,
) -> Result<AnswerRecord, PipelineError> {
    let runs = docs
        .iter()
        .filter(|d| query.in_scope(&d.doc_id))
        .map(|d| compress(d, query, config, decomposer, scorer))
        .collect::<Result<Vec<_>, _>>()?;
    answer_from_runs(&runs, query, generator)
}
