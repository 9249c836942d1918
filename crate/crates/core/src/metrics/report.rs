use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cost::CostBreakdown;
use super::{bin_by_length, total_usage};
use crate::decompose::TokenUsage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub doc_id: String,
    pub doc_token_length: usize,
    pub ted: f64,
    pub backbone_match: bool,
    pub compression_rate: f64,
    pub token_usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub index: usize,
    pub count: usize,
    pub min_length: Option<usize>,
    pub max_length: Option<usize>,
    pub mean_ted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedRecord {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportHeader {
    pub seed: u64,
    pub backend: String,
    pub parse_mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub documents: usize,
    pub excluded: Vec<ExcludedRecord>,
    pub mean_ted: Option<f64>,
    pub dla: Option<f64>,
    pub bins: Vec<LengthBin>,
    pub usage: TokenUsage,
    pub costs: CostBreakdown,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    /// Aggregates records; output is ordered by `doc_id` regardless of the
    /// order records arrive in.
    pub fn assemble(
        header: ReportHeader,
        mut records: Vec<EvalRecord>,
        mut excluded: Vec<ExcludedRecord>,
        n_bins: usize,
        costs: CostBreakdown,
    ) -> Self {
        records.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        excluded.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let n = records.len();
        let mean_ted = (n > 0).then(|| records.iter().map(|r| r.ted).sum::<f64>() / n as f64);
        let dla = (n > 0).then(|| records.iter().filter(|r| r.backbone_match).count() as f64 / n as f64);
        let bins = if n > 0 { bin_by_length(&records, n_bins) } else { Vec::new() };
        Self {
            header,
            documents: n,
            excluded,
            mean_ted,
            dla,
            bins,
            usage: total_usage(&records),
            costs,
            records,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |x| format!("{:.4}", x * scale));
        let _ = writeln!(out, "backend: {}  parse mode: {}  seed: {}", self.header.backend, self.header.parse_mode, self.header.seed);
        let _ = writeln!(out, "documents: {}  excluded: {}", self.documents, self.excluded.len());
        let _ = writeln!(out, "mean TED: {}", fmt_opt(self.mean_ted, 1.0));
        let _ = writeln!(out, "DLA (%): {}", fmt_opt(self.dla, 100.0));
        let _ = writeln!(
            out,
            "tokens: {} in / {} out",
            self.usage.prompt_tokens, self.usage.completion_tokens
        );
        for stage in &self.costs.stages {
            let _ = writeln!(out, "cost [{}]: {}", stage.stage, stage.amount);
        }
        let _ = writeln!(out, "cost total: {}", self.costs.total());
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<5} {:>6} {:>10} {:>10} {:>10}", "bin", "count", "min len", "max len", "mean TED");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{:<5} {:>6} {:>10} {:>10} {:>10}",
                b.index,
                b.count,
                b.min_length.map_or("-".into(), |v| v.to_string()),
                b.max_length.map_or("-".into(), |v| v.to_string()),
                fmt_opt(b.mean_ted, 1.0)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<24} {:>8} {:>8} {:>6}", "doc_id", "length", "TED", "match");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8.2} {:>6}",
                r.doc_id,
                r.doc_token_length,
                r.ted,
                if r.backbone_match { "yes" } else { "no" }
            );
        }
        for e in &self.excluded {
            let _ = writeln!(out, "excluded {}: {}", e.doc_id, e.reason);
        }
        out
    }
}
