//! Structural fidelity, compression and cost metrics.

pub mod cost;
pub mod report;
pub mod ted;

use crate::decompose::TokenUsage;
use crate::rank::CompressionResult;

pub use cost::{cost_estimate, CostBreakdown, CostModel, Dollars, StageCost};
pub use report::{EvalRecord, EvalReport, LengthBin};
pub use ted::{normalize_title, ted, to_labeled_tree, EditCosts, LabeledTree, Normalization};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{0} is undefined for empty input")]
    EmptyInput(&'static str),
}

/// Fraction of pairs whose predicted backbone equals the gold backbone.
pub fn dla(pairs: &[(LabeledTree, LabeledTree)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput("document-level accuracy"));
    }
    let matched = pairs.iter().filter(|(pred, gold)| pred == gold).count();
    Ok(matched as f64 / pairs.len() as f64)
}

/// `1 - compressed / original`.
pub fn compression_stats(result: &CompressionResult) -> Result<f64, MetricError> {
    compression_rate(result.compressed_length, result.original_length)
}

pub fn compression_rate(compressed: usize, original: usize) -> Result<f64, MetricError> {
    if original == 0 {
        return Err(MetricError::EmptyInput("compression rate"));
    }
    Ok(1.0 - compressed as f64 / original as f64)
}

/// Per-bin aggregate of an equal-frequency split by document length.
pub fn bin_by_length(records: &[EvalRecord], n_bins: usize) -> Vec<LengthBin> {
    let n_bins = n_bins.max(1);
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.doc_token_length
            .cmp(&b.doc_token_length)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    // The first `n % bins` bins take one extra record.
    let base = sorted.len() / n_bins;
    let extra = sorted.len() % n_bins;
    let mut bins = Vec::with_capacity(n_bins);
    let mut cursor = 0;
    for index in 0..n_bins {
        let size = base + usize::from(index < extra);
        let members = &sorted[cursor..cursor + size];
        cursor += size;
        let mean_ted = (!members.is_empty())
            .then(|| members.iter().map(|r| r.ted).sum::<f64>() / members.len() as f64);
        bins.push(LengthBin {
            index,
            count: members.len(),
            min_length: members.first().map(|r| r.doc_token_length),
            max_length: members.last().map(|r| r.doc_token_length),
            mean_ted,
        });
    }
    bins
}

/// Token usage summed over records.
pub fn total_usage(records: &[EvalRecord]) -> TokenUsage {
    records.iter().map(|r| r.token_usage).sum()
}
