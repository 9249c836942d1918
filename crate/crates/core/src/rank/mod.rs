//! Query-driven node scoring, budgeted selection and source-order
//! linearization.

pub mod bm25;
pub mod pipeline;
pub mod select;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::{BoxError, Scorer};
use crate::segment::{EduSequence, RangeError};
use crate::tree::{SpanRef, StructureNode, StructureTree};

pub use bm25::{bm25_score, Bm25Scorer};
pub use pipeline::{answer_pipeline, compress, AnswerRecord, CompressConfig, CompressionRun, SelectionRule};
pub use select::{
    linearize, merge_spans, random_select, select_budget, select_topk, CompressionResult, Linearized,
    OverflowPolicy, SelectionBudget, DEFAULT_TOP_K,
};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default)]
    pub doc_ids: Option<Vec<String>>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            doc_ids: None,
        }
    }

    pub fn in_scope(&self, doc_id: &str) -> bool {
        self.doc_ids
            .as_ref()
            .map_or(true, |ids| ids.iter().any(|d| d == doc_id))
    }
}

/// Which part of a span stands in for it when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepPolicy {
    #[default]
    FirstEdu,
    /// First and last units, each given half the cap.
    HeadTail,
    FullSpan,
}

impl std::str::FromStr for RepPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first-edu" => Ok(RepPolicy::FirstEdu),
            "head-tail" => Ok(RepPolicy::HeadTail),
            "full-span" => Ok(RepPolicy::FullSpan),
            other => Err(format!("unknown t_rep policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepConfig {
    pub policy: RepPolicy,
    pub cap: usize,
}

impl Default for RepConfig {
    fn default() -> Self {
        Self {
            policy: RepPolicy::FirstEdu,
            cap: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringScope {
    #[default]
    AllNodes,
    LeavesOnly,
}

pub const CANDIDATE_SEPARATOR: &str = " :: ";

/// Cuts `text` to at most `cap` characters, preferring the last whitespace
/// before the cap; falls back to a hard cut for unbroken text.
pub fn truncate_at_whitespace(text: &str, cap: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= cap {
        return text.to_string();
    }
    let window = &chars[..=cap];
    let cut = window
        .iter()
        .rposition(|c| c.is_whitespace())
        .filter(|&p| p > 0)
        .unwrap_or(cap);
    chars[..cut].iter().collect::<String>().trim_end().to_string()
}

/// Title, `" :: "`, then the representative snippet; the snippet alone when
/// the title is empty.
pub fn build_candidate_text(
    node: &StructureNode,
    seq: &EduSequence,
    rep: &RepConfig,
) -> Result<String, RangeError> {
    let units = seq.slice(node.span)?;
    let snippet = match rep.policy {
        RepPolicy::FirstEdu => truncate_at_whitespace(&units[0].text, rep.cap),
        RepPolicy::HeadTail => {
            let half = rep.cap / 2;
            let head = truncate_at_whitespace(&units[0].text, half);
            if units.len() == 1 {
                head
            } else {
                let tail = truncate_at_whitespace(&units[units.len() - 1].text, half);
                format!("{head} … {tail}")
            }
        }
        RepPolicy::FullSpan => {
            let joined = units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
            truncate_at_whitespace(&joined, rep.cap)
        }
    };
    let snippet = snippet.split_whitespace().collect::<Vec<_>>().join(" ");
    let title = node.title.trim();
    Ok(if title.is_empty() {
        snippet
    } else {
        format!("{title}{CANDIDATE_SEPARATOR}{snippet}")
    })
}

/// A tree node with its relevance score. `index` is the node's position in
/// the tree's pre-order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub index: usize,
    pub title: String,
    pub level: u8,
    pub span: SpanRef,
    pub score: f64,
    pub candidate_text: String,
}

impl ScoredNode {
    pub fn from_node(index: usize, node: &StructureNode, score: f64) -> Self {
        Self {
            index,
            title: node.title.clone(),
            level: node.level,
            span: node.span,
            score,
            candidate_text: String::new(),
        }
    }
}

/// Score descending, then earlier `id_start`, then shallower level.
pub fn rank_order(a: &ScoredNode, b: &ScoredNode) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.span.start.cmp(&b.span.start))
        .then(a.level.cmp(&b.level))
        .then(a.index.cmp(&b.index))
}

pub fn sort_ranked(nodes: &mut [ScoredNode]) {
    nodes.sort_by(rank_order);
}

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("node span out of range: {0}")]
    Range(#[from] RangeError),
    #[error("scorer failed: {0}")]
    Scorer(#[source] BoxError),
    #[error("scorer returned {got} scores for {expected} candidates")]
    ScoreCount { expected: usize, got: usize },
    #[error("scorer returned a non-finite score for node {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringOptions {
    pub rep: RepConfig,
    pub scope: ScoringScope,
}

/// One scored entry per node (or per leaf), sorted by [`rank_order`].
pub fn score_nodes(
    query: &str,
    tree: &StructureTree,
    seq: &EduSequence,
    scorer: &dyn Scorer,
    options: &ScoringOptions,
) -> Result<Vec<ScoredNode>, RankError> {
    let mut nodes = Vec::new();
    let mut candidates = Vec::new();
    for visit in tree.preorder() {
        if options.scope == ScoringScope::LeavesOnly && !visit.node.children.is_empty() {
            continue;
        }
        let text = build_candidate_text(visit.node, seq, &options.rep)?;
        let mut scored = ScoredNode::from_node(visit.index, visit.node, 0.0);
        scored.candidate_text = text.clone();
        nodes.push(scored);
        candidates.push(text);
    }
    if nodes.is_empty() {
        return Ok(nodes);
    }
    let scores = scorer.score(query, &candidates).map_err(RankError::Scorer)?;
    if scores.len() != nodes.len() {
        return Err(RankError::ScoreCount {
            expected: nodes.len(),
            got: scores.len(),
        });
    }
    for (node, score) in nodes.iter_mut().zip(scores) {
        if !score.is_finite() {
            return Err(RankError::NonFinite { index: node.index });
        }
        node.score = score;
    }
    sort_ranked(&mut nodes);
    Ok(nodes)
}

/// Same score for every candidate.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError> {
        Ok(vec![self.0; candidates.len()])
    }
}

/// Uniform scores in `[0, 1)` from a seeded generator; ranking by them is a
/// uniform shuffle. Each call restarts from the seed.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, _query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(candidates.iter().map(|_| rng.gen::<f64>()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{segment, SegmentationRules, SourceDocument};

    fn seq(text: &str) -> EduSequence {
        segment(&SourceDocument::new("d", text), &SegmentationRules::default())
    }

    #[test]
    fn candidate_text_policies() {
        let s = seq("One. Two. Costs rise fast. More detail. Last one.");
        let node = StructureNode::new(1, SpanRef::new(3, 5), "Budget");
        let rep = RepConfig::default();
        assert_eq!(build_candidate_text(&node, &s, &rep).unwrap(), "Budget :: Costs rise fast.");

        let untitled = StructureNode::new(1, SpanRef::new(3, 5), "");
        assert_eq!(build_candidate_text(&untitled, &s, &rep).unwrap(), "Costs rise fast.");

        let ht = RepConfig { policy: RepPolicy::HeadTail, cap: 120 };
        assert_eq!(build_candidate_text(&node, &s, &ht).unwrap(), "Budget :: Costs rise fast. … Last one.");

        let full = RepConfig { policy: RepPolicy::FullSpan, cap: 25 };
        assert_eq!(build_candidate_text(&node, &s, &full).unwrap(), "Budget :: Costs rise fast. More");
    }

    #[test]
    fn snippet_cap_truncates_at_whitespace() {
        let long = "word ".repeat(40);
        let t = truncate_at_whitespace(&long, 120);
        assert!(t.chars().count() <= 120);
        assert_eq!(t, "word ".repeat(24).trim_end());
        assert_eq!(truncate_at_whitespace(&"x".repeat(130), 120).chars().count(), 120);
        assert_eq!(truncate_at_whitespace("short", 120), "short");
    }

    #[test]
    fn empty_tree_scores_nothing() {
        let s = seq("A.");
        let tree = StructureTree::new(1, vec![]);
        let got = score_nodes("q", &tree, &s, &ConstantScorer(0.5), &ScoringOptions::default()).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn constant_scores_tie_break_by_start_then_level() {
        let s = seq("A. B. C. D.");
        let tree = StructureTree::new(
            4,
            vec![
                StructureNode::new(1, SpanRef::new(1, 2), "a")
                    .with_children(vec![StructureNode::new(2, SpanRef::new(1, 1), "b")]),
                StructureNode::new(1, SpanRef::new(3, 4), "c"),
            ],
        );
        let got = score_nodes("q", &tree, &s, &ConstantScorer(0.5), &ScoringOptions::default()).unwrap();
        let order: Vec<_> = got.iter().map(|n| n.title.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn leaves_only_scope() {
        let s = seq("A. B. C.");
        let tree = StructureTree::new(
            3,
            vec![StructureNode::new(1, SpanRef::new(1, 3), "p")
                .with_children(vec![StructureNode::new(2, SpanRef::new(2, 3), "leaf")])],
        );
        let opts = ScoringOptions { scope: ScoringScope::LeavesOnly, ..Default::default() };
        let got = score_nodes("q", &tree, &s, &ConstantScorer(1.0), &opts).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].title, "leaf");
        assert_eq!(got[0].index, 1);
    }

    #[test]
    fn bm25_prefers_matching_node() {
        // Candidates: "Alpha :: The budget grew." and "Beta :: Weather was mild."
        // Only A contains "budget", so only A gets a positive score.
        let s = seq("The budget grew. Weather was mild.");
        let tree = StructureTree::new(
            2,
            vec![
                StructureNode::new(1, SpanRef::new(1, 1), "Alpha"),
                StructureNode::new(1, SpanRef::new(2, 2), "Beta"),
            ],
        );
        let got = score_nodes("budget", &tree, &s, &Bm25Scorer::default(), &ScoringOptions::default()).unwrap();
        assert_eq!(got[0].title, "Alpha");
        // Both candidates have 4 tokens, so the length norm is 1 and the
        // score reduces to idf = ln(1 + 1.5 / 1.5).
        assert!((got[0].score - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(got[1].score, 0.0);
    }

    struct BadScorer(Vec<f64>);
    impl Scorer for BadScorer {
        fn score(&self, _: &str, _: &[String]) -> Result<Vec<f64>, BoxError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn scorer_contract_violations() {
        let s = seq("A.");
        let tree = StructureTree::new(1, vec![StructureNode::new(1, SpanRef::new(1, 1), "a")]);
        let opts = ScoringOptions::default();
        assert!(matches!(
            score_nodes("q", &tree, &s, &BadScorer(vec![]), &opts),
            Err(RankError::ScoreCount { .. })
        ));
        assert!(matches!(
            score_nodes("q", &tree, &s, &BadScorer(vec![f64::NAN]), &opts),
            Err(RankError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn random_scorer_is_seeded() {
        let c = vec!["a".to_string(); 5];
        let a = RandomScorer { seed: 3 }.score("", &c).unwrap();
        let b = RandomScorer { seed: 3 }.score("", &c).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, RandomScorer { seed: 4 }.score("", &c).unwrap());
    }
}
