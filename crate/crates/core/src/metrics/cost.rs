//! Dollar cost of token usage under per-million-token rates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decompose::TokenUsage;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dollars(pub f64);

impl Dollars {
    /// Whole cents, rounded half away from zero.
    pub fn cents(self) -> i64 {
        (self.0 * 100.0).round() as i64
    }

    pub fn rounded(self) -> Dollars {
        Dollars(self.cents() as f64 / 100.0)
    }
}

impl fmt::Display for Dollars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cents = self.cents();
        let sign = if cents < 0 { "-" } else { "" };
        write!(f, "{sign}${}.{:02}", cents.abs() / 100, cents.abs() % 100)
    }
}

/// Rates in dollars per one million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostModel {
    pub input_rate: f64,
    pub output_rate: f64,
}

impl CostModel {
    pub const fn new(input_rate: f64, output_rate: f64) -> Self {
        Self {
            input_rate,
            output_rate,
        }
    }

    /// $2.00 input / $8.00 output per 1M tokens.
    pub const GPT_4_1: CostModel = CostModel::new(2.0, 8.0);

    pub fn is_valid(&self) -> bool {
        self.input_rate >= 0.0 && self.output_rate >= 0.0
    }
}

pub fn cost_estimate(usage: TokenUsage, model: &CostModel) -> Dollars {
    Dollars(
        usage.prompt_tokens as f64 * model.input_rate / 1e6
            + usage.completion_tokens as f64 * model.output_rate / 1e6,
    )
}

/// One line of a cost table: either metered usage or a flat amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    pub amount: Dollars,
}

impl StageCost {
    pub fn metered(stage: impl Into<String>, usage: TokenUsage, model: &CostModel) -> Self {
        Self {
            stage: stage.into(),
            usage: Some(usage),
            amount: cost_estimate(usage, model),
        }
    }

    pub fn flat(stage: impl Into<String>, amount: Dollars) -> Self {
        Self {
            stage: stage.into(),
            usage: None,
            amount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub stages: Vec<StageCost>,
}

impl CostBreakdown {
    pub fn push(&mut self, stage: StageCost) -> &mut Self {
        self.stages.push(stage);
        self
    }

    /// Sum of the per-stage amounts after each is rounded to the cent, the
    /// way an itemized table adds up.
    pub fn total(&self) -> Dollars {
        Dollars(self.stages.iter().map(|s| s.amount.cents()).sum::<i64>() as f64 / 100.0)
    }

    /// Unrounded sum.
    pub fn exact_total(&self) -> Dollars {
        Dollars(self.stages.iter().map(|s| s.amount.0).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_llm_answering() {
        let c = cost_estimate(TokenUsage::new(5_955_972, 1_357), &CostModel::GPT_4_1);
        assert_eq!(c.cents(), 1192);
        assert_eq!(c.to_string(), "$11.92");
    }

    #[test]
    fn pipeline_parsing() {
        let c = cost_estimate(TokenUsage::new(5_955_972, 1_314_406), &CostModel::GPT_4_1);
        assert_eq!(c.cents(), 2243);
    }

    #[test]
    fn zero_usage() {
        assert_eq!(cost_estimate(TokenUsage::default(), &CostModel::GPT_4_1).to_string(), "$0.00");
    }

    #[test]
    fn linear_in_counts() {
        let m = CostModel::new(3.0, 11.0);
        let a = cost_estimate(TokenUsage::new(1000, 0), &m).0;
        let b = cost_estimate(TokenUsage::new(0, 500), &m).0;
        let ab = cost_estimate(TokenUsage::new(1000, 500), &m).0;
        assert!((a + b - ab).abs() < 1e-12);
        let double = cost_estimate(TokenUsage::new(2000, 1000), &m).0;
        assert!((2.0 * ab - double).abs() < 1e-12);
    }

    #[test]
    fn totals_add_rounded_stages() {
        let mut b = CostBreakdown::default();
        b.push(StageCost::flat("a", Dollars(0.004)))
            .push(StageCost::flat("b", Dollars(0.004)));
        assert_eq!(b.total().cents(), 0);
        assert_eq!(b.exact_total().cents(), 1);
    }
}
