use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScoredNode;
use crate::length::LengthUnit;
use crate::segment::{EduSequence, RangeError};
use crate::tree::SpanRef;

pub const DEFAULT_TOP_K: usize = 10;

/// What to do when the next node in rank order does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowPolicy {
    /// Keep scanning; lower-ranked nodes that still fit are accepted.
    #[default]
    Skip,
    /// Stop at the first node that does not fit.
    Stop,
}

impl std::str::FromStr for OverflowPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(OverflowPolicy::Skip),
            "stop" => Ok(OverflowPolicy::Stop),
            other => Err(format!("unknown overflow policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelectionBudget {
    pub b_max: usize,
    pub unit: LengthUnit,
}

impl SelectionBudget {
    pub fn new(b_max: usize, unit: LengthUnit) -> Self {
        Self { b_max, unit }
    }
}

/// Greedy selection in the given order under `budget.b_max`.
///
/// A node costs only the length of its units not already covered by an
/// accepted node, so nested or overlapping picks are never billed twice.
/// Nodes whose span is already fully covered cost nothing and are accepted.
pub fn select_budget(
    ranked: &[ScoredNode],
    seq: &EduSequence,
    budget: &SelectionBudget,
    overflow: OverflowPolicy,
) -> Vec<ScoredNode> {
    let lengths: Vec<usize> = seq.units.iter().map(|u| budget.unit.measure(&u.text)).collect();
    let mut covered = vec![false; seq.len() + 1];
    let mut used = 0usize;
    let mut chosen = Vec::new();
    for node in ranked {
        let span = node.span;
        if span.start < 1 || span.start > span.end || span.end > seq.len() {
            continue;
        }
        let extra: usize = span
            .ids()
            .filter(|&id| !covered[id])
            .map(|id| lengths[id - 1])
            .sum();
        if used + extra <= budget.b_max {
            used += extra;
            for id in span.ids() {
                covered[id] = true;
            }
            chosen.push(node.clone());
        } else if overflow == OverflowPolicy::Stop {
            break;
        }
    }
    chosen
}

/// The first `k` nodes of an already ranked list.
pub fn select_topk(ranked: &[ScoredNode], k: usize) -> Vec<ScoredNode> {
    ranked.iter().take(k).cloned().collect()
}

/// Baseline: uniform shuffle, then the same budget-greedy acceptance.
pub fn random_select(
    nodes: &[ScoredNode],
    seq: &EduSequence,
    budget: &SelectionBudget,
    seed: u64,
) -> CompressionResult {
    let mut order = nodes.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let chosen = select_budget(&order, seq, budget, OverflowPolicy::Skip);
    CompressionResult::build(chosen, order, seq, &budget.unit)
        .expect("select_budget only accepts in-range spans")
}

/// Sorts spans and merges overlapping or adjacent ones.
pub fn merge_spans(spans: impl IntoIterator<Item = SpanRef>) -> Vec<SpanRef> {
    let mut spans: Vec<SpanRef> = spans.into_iter().filter(|s| s.start <= s.end).collect();
    spans.sort();
    let mut merged: Vec<SpanRef> = Vec::with_capacity(spans.len());
    for s in spans {
        match merged.last_mut() {
            Some(last) if s.start <= last.end + 1 => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }
    merged
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Linearized {
    /// Intervals joined by a blank line; units inside one by a newline.
    pub text: String,
    pub intervals: Vec<SpanRef>,
    /// Length of the unit texts only; separators are not counted.
    pub content_length: usize,
}

pub const INTERVAL_SEPARATOR: &str = "\n\n";

/// Merges the chosen spans and emits them in source order.
pub fn linearize(
    spans: impl IntoIterator<Item = SpanRef>,
    seq: &EduSequence,
    unit: &LengthUnit,
) -> Result<Linearized, RangeError> {
    let intervals = merge_spans(spans);
    let mut parts = Vec::with_capacity(intervals.len());
    let mut content_length = 0;
    for &iv in &intervals {
        let units = seq.slice(iv)?;
        content_length += units.iter().map(|u| unit.measure(&u.text)).sum::<usize>();
        parts.push(seq.retrieve(iv)?);
    }
    Ok(Linearized {
        text: parts.join(INTERVAL_SEPARATOR),
        intervals,
        content_length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    /// Chosen nodes in source order.
    pub chosen: Vec<ScoredNode>,
    pub linearized: String,
    pub intervals: Vec<SpanRef>,
    pub original_length: usize,
    pub compressed_length: usize,
    /// `1 - compressed/original`; 0 when the original is empty.
    pub compression_rate: f64,
    pub per_node_scores: Vec<ScoredNode>,
    pub length_unit: String,
}

impl CompressionResult {
    pub fn build(
        mut chosen: Vec<ScoredNode>,
        per_node_scores: Vec<ScoredNode>,
        seq: &EduSequence,
        unit: &LengthUnit,
    ) -> Result<Self, RangeError> {
        let lin = linearize(chosen.iter().map(|n| n.span), seq, unit)?;
        chosen.sort_by(|a, b| {
            a.span
                .start
                .cmp(&b.span.start)
                .then(a.level.cmp(&b.level))
                .then(a.index.cmp(&b.index))
        });
        let original_length: usize = seq.units.iter().map(|u| unit.measure(&u.text)).sum();
        let compression_rate = if original_length > 0 {
            1.0 - lin.content_length as f64 / original_length as f64
        } else {
            0.0
        };
        Ok(Self {
            chosen,
            linearized: lin.text,
            intervals: lin.intervals,
            original_length,
            compressed_length: lin.content_length,
            compression_rate,
            per_node_scores,
            length_unit: unit.name().to_string(),
        })
    }

    pub fn empty(unit: &LengthUnit) -> Self {
        Self {
            chosen: Vec::new(),
            linearized: String::new(),
            intervals: Vec::new(),
            original_length: 0,
            compressed_length: 0,
            compression_rate: 0.0,
            per_node_scores: Vec::new(),
            length_unit: unit.name().to_string(),
        }
    }

    /// Ids of every unit present in the output, ascending.
    pub fn edu_ids(&self) -> Vec<usize> {
        self.intervals.iter().flat_map(|s| s.ids()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{Edu, EduKind, CharSpan};

    /// Units whose character lengths are given; texts are `x` repeated.
    fn seq_of_lengths(lengths: &[usize]) -> EduSequence {
        let mut pos = 0;
        let units = lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| {
                let e = Edu {
                    id: i + 1,
                    text: "x".repeat(len),
                    span: CharSpan { start: pos, end: pos + len },
                    kind: EduKind::Prose,
                };
                pos += len + 1;
                e
            })
            .collect();
        EduSequence { doc_id: "d".into(), units }
    }

    fn scored(index: usize, a: usize, b: usize, score: f64) -> ScoredNode {
        ScoredNode {
            index,
            title: format!("n{index}"),
            level: 1,
            span: SpanRef::new(a, b),
            score,
            candidate_text: String::new(),
        }
    }

    fn chars(b_max: usize) -> SelectionBudget {
        SelectionBudget::new(b_max, LengthUnit::Characters)
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let s = seq_of_lengths(&[5, 5]);
        let ranked = vec![scored(0, 1, 1, 0.9)];
        assert!(select_budget(&ranked, &s, &chars(0), OverflowPolicy::Skip).is_empty());
    }

    #[test]
    fn second_node_would_overflow() {
        // Lengths 40 and 80 with b_max 100: 40 fits, 40 + 80 = 120 does not.
        let s = seq_of_lengths(&[40, 80]);
        let ranked = vec![scored(0, 1, 1, 0.9), scored(1, 2, 2, 0.8)];
        let got = select_budget(&ranked, &s, &chars(100), OverflowPolicy::Skip);
        assert_eq!(got.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn skip_versus_stop() {
        let s = seq_of_lengths(&[60, 50, 40]);
        let ranked = vec![scored(0, 1, 1, 0.9), scored(1, 2, 2, 0.8), scored(2, 3, 3, 0.7)];
        let skip = select_budget(&ranked, &s, &chars(100), OverflowPolicy::Skip);
        assert_eq!(skip.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 2]);
        let stop = select_budget(&ranked, &s, &chars(100), OverflowPolicy::Stop);
        assert_eq!(stop.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn skip_policy_is_not_budget_monotone() {
        // With budget 110 the 50-long node fits and crowds out the 40-long one
        // that was picked at budget 100.
        let s = seq_of_lengths(&[60, 50, 40]);
        let ranked = vec![scored(0, 1, 1, 0.9), scored(1, 2, 2, 0.8), scored(2, 3, 3, 0.7)];
        let small = select_budget(&ranked, &s, &chars(100), OverflowPolicy::Skip);
        let large = select_budget(&ranked, &s, &chars(110), OverflowPolicy::Skip);
        assert!(small.iter().any(|n| n.index == 2));
        assert!(!large.iter().any(|n| n.index == 2));
    }

    #[test]
    fn nested_child_is_absorbed_for_free() {
        let s = seq_of_lengths(&[10, 10, 10]);
        let ranked = vec![scored(0, 1, 3, 0.9), scored(1, 2, 2, 0.8)];
        let got = select_budget(&ranked, &s, &chars(30), OverflowPolicy::Skip);
        assert_eq!(got.len(), 2);
        let result = CompressionResult::build(got, ranked, &s, &LengthUnit::Characters).unwrap();
        assert_eq!(result.compressed_length, 30);
        assert_eq!(result.intervals, vec![SpanRef::new(1, 3)]);
    }

    #[test]
    fn partial_overlap_bills_only_new_units() {
        let s = seq_of_lengths(&[10, 10, 10, 10]);
        let ranked = vec![scored(0, 1, 2, 0.9), scored(1, 2, 4, 0.8)];
        // Second node adds units 3 and 4 only: 20 + 20 = 40.
        assert_eq!(select_budget(&ranked, &s, &chars(40), OverflowPolicy::Skip).len(), 2);
        assert_eq!(select_budget(&ranked, &s, &chars(39), OverflowPolicy::Skip).len(), 1);
    }

    #[test]
    fn topk() {
        let ranked: Vec<_> = (0..5).map(|i| scored(i, i + 1, i + 1, 1.0 - i as f64 / 10.0)).collect();
        assert!(select_topk(&ranked, 0).is_empty());
        assert_eq!(select_topk(&ranked, 3).iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(select_topk(&ranked, 50).len(), 5);
    }

    #[test]
    fn merge_and_linearize() {
        assert!(merge_spans(vec![]).is_empty());
        assert_eq!(
            merge_spans(vec![SpanRef::new(5, 6), SpanRef::new(1, 2)]),
            vec![SpanRef::new(1, 2), SpanRef::new(5, 6)]
        );
        assert_eq!(
            merge_spans(vec![SpanRef::new(3, 6), SpanRef::new(1, 4)]),
            vec![SpanRef::new(1, 6)]
        );
        assert_eq!(
            merge_spans(vec![SpanRef::new(1, 2), SpanRef::new(3, 3)]),
            vec![SpanRef::new(1, 3)]
        );

        let s = crate::segment::segment(
            &crate::segment::SourceDocument::new("d", "A1. A2. A3. A4. A5. A6."),
            &Default::default(),
        );
        let unit = LengthUnit::WhitespaceTokens;
        assert_eq!(linearize(vec![], &s, &unit).unwrap().text, "");
        let lin = linearize(vec![SpanRef::new(5, 6), SpanRef::new(1, 2)], &s, &unit).unwrap();
        assert_eq!(lin.text, "A1.\nA2.\n\nA5.\nA6.");
        assert_eq!(lin.content_length, 4);
        let lin = linearize(vec![SpanRef::new(1, 4), SpanRef::new(3, 6)], &s, &unit).unwrap();
        assert_eq!(lin.text, "A1.\nA2.\nA3.\nA4.\nA5.\nA6.");
        assert_eq!(lin.intervals, vec![SpanRef::new(1, 6)]);
    }

    #[test]
    fn random_select_is_seeded_and_bounded() {
        let s = seq_of_lengths(&[10, 20, 30, 40, 50]);
        let nodes: Vec<_> = (0..5).map(|i| scored(i, i + 1, i + 1, 0.0)).collect();
        assert!(random_select(&nodes, &s, &chars(0), 1).chosen.is_empty());
        let a = random_select(&nodes, &s, &chars(60), 9);
        let b = random_select(&nodes, &s, &chars(60), 9);
        assert_eq!(a, b);
        for seed in 0..100 {
            let r = random_select(&nodes, &s, &chars(60), seed);
            assert!(r.compressed_length <= 60);
        }
    }

    #[test]
    fn empty_sequence_rate_is_zero() {
        let s = EduSequence::default();
        let r = CompressionResult::build(vec![], vec![], &s, &LengthUnit::WhitespaceTokens).unwrap();
        assert_eq!(r.compression_rate, 0.0);
        assert_eq!(r.linearized, "");
    }
}
