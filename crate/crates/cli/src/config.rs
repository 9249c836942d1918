//! Run configuration, read from a TOML file.

use std::collections::BTreeMap;
use std::path::Path;

use edutree_backends::{InferenceEndpointConfig, RefineOptions};
use edutree_core::length::LengthUnit;
use edutree_core::metrics::{CostModel, EditCosts, Normalization};
use edutree_core::rank::{CompressConfig, OverflowPolicy, RepConfig, ScoringOptions, ScoringScope, SelectionRule};
use edutree_core::segment::SegmentationRules;
use edutree_core::tree::ParseMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecomposerKind {
    #[default]
    Layout,
    Remote,
    /// Remote solver wrapped in the solver-critic loop.
    Refine,
}

impl std::str::FromStr for DecomposerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "layout" => Ok(DecomposerKind::Layout),
            "remote" => Ok(DecomposerKind::Remote),
            "refine" => Ok(DecomposerKind::Refine),
            other => Err(format!("unknown backend `{other}` (expected layout, remote or refine)")),
        }
    }
}

impl DecomposerKind {
    pub fn name(self) -> &'static str {
        match self {
            DecomposerKind::Layout => "layout",
            DecomposerKind::Remote => "remote",
            DecomposerKind::Refine => "refine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptChoice {
    #[default]
    Decompose,
    /// Heading-only outline prompt of the direct-LLM baseline.
    Outline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposerSection {
    pub kind: DecomposerKind,
    pub endpoint: Option<String>,
    pub prompt: PromptChoice,
    pub critic_endpoint: Option<String>,
    pub max_rounds: usize,
    pub threshold: f64,
    pub require_titles: bool,
}

impl Default for DecomposerSection {
    fn default() -> Self {
        let r = RefineOptions::default();
        Self {
            kind: DecomposerKind::Layout,
            endpoint: None,
            prompt: PromptChoice::Decompose,
            critic_endpoint: None,
            max_rounds: r.max_rounds,
            threshold: r.threshold,
            require_titles: r.require_titles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Bm25,
    Random,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub kind: ScorerKind,
    pub endpoint: Option<String>,
    pub k1: f64,
    pub b: f64,
    pub scope: ScoringScope,
}

impl Default for ScorerSection {
    fn default() -> Self {
        Self {
            kind: ScorerKind::Bm25,
            endpoint: None,
            k1: 1.2,
            b: 0.75,
            scope: ScoringScope::AllNodes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Budget,
    Topk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub rule: RuleName,
    pub b_max: Option<usize>,
    pub overflow: OverflowPolicy,
    pub k: Option<usize>,
    pub length_unit: String,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            rule: RuleName::Topk,
            b_max: None,
            overflow: OverflowPolicy::Skip,
            k: None,
            length_unit: "whitespace-tokens".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub n_bins: usize,
    pub normalization: Normalization,
    pub edit_costs: EditCosts,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            n_bins: 10,
            normalization: Normalization::default(),
            edit_costs: EditCosts::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub parse_mode: ParseMode,
    pub segmentation: SegmentationRules,
    pub decomposer: DecomposerSection,
    pub scorer: ScorerSection,
    pub selection: SelectionSection,
    pub t_rep: RepConfig,
    pub generator: GeneratorSection,
    pub endpoints: BTreeMap<String, InferenceEndpointConfig>,
    /// Per-1M-token prices keyed by model id.
    pub costs: BTreeMap<String, CostModel>,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            workers: 1,
            parse_mode: ParseMode::Lenient,
            segmentation: SegmentationRules::default(),
            decomposer: DecomposerSection::default(),
            scorer: ScorerSection::default(),
            selection: SelectionSection::default(),
            t_rep: RepConfig::default(),
            generator: GeneratorSection::default(),
            endpoints: BTreeMap::new(),
            costs: BTreeMap::new(),
            metrics: MetricsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Cross-field invariants that serde cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.workers == 0 {
            return usage("workers must be at least 1".into());
        }
        if self.scorer.kind == ScorerKind::Random && self.seed.is_none() {
            return usage("scorer = random requires a seed".into());
        }
        for (section, name) in [
            ("decomposer.endpoint", &self.decomposer.endpoint),
            ("decomposer.critic_endpoint", &self.decomposer.critic_endpoint),
            ("scorer.endpoint", &self.scorer.endpoint),
            ("generator.endpoint", &self.generator.endpoint),
        ] {
            if let Some(n) = name {
                if !self.endpoints.contains_key(n) {
                    return usage(format!("{section} refers to undefined endpoint `{n}`"));
                }
            }
        }
        if self.decomposer.kind != DecomposerKind::Layout && self.decomposer.endpoint.is_none() {
            return usage(format!("decomposer `{}` needs decomposer.endpoint", self.decomposer.kind.name()));
        }
        if self.scorer.kind == ScorerKind::Remote && self.scorer.endpoint.is_none() {
            return usage("scorer = remote needs scorer.endpoint".into());
        }
        if self.decomposer.max_rounds == 0 {
            return usage("decomposer.max_rounds must be at least 1".into());
        }
        if self.selection.rule == RuleName::Budget && self.selection.b_max.is_none() {
            return usage("selection.rule = budget needs selection.b_max".into());
        }
        self.length_unit()?;
        for (name, ep) in &self.endpoints {
            ep.validate().map_err(|e| CliError::Usage(format!("endpoints.{name}: {e}")))?;
        }
        for (model, c) in &self.costs {
            if !c.is_valid() {
                return usage(format!("costs.{model}: rates must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn length_unit(&self) -> Result<LengthUnit, CliError> {
        self.selection.length_unit.parse().map_err(CliError::Usage)
    }

    pub fn endpoint(&self, name: &Option<String>) -> Option<&InferenceEndpointConfig> {
        name.as_ref().and_then(|n| self.endpoints.get(n))
    }

    pub fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            max_rounds: self.decomposer.max_rounds,
            threshold: self.decomposer.threshold,
            require_titles: self.decomposer.require_titles,
        }
    }

    pub fn compress_config(&self) -> Result<CompressConfig, CliError> {
        let selection = match self.selection.rule {
            RuleName::Topk => SelectionRule::TopK {
                k: self.selection.k.unwrap_or(edutree_core::rank::DEFAULT_TOP_K),
            },
            RuleName::Budget => SelectionRule::Budget {
                b_max: self.selection.b_max.unwrap_or(0),
                overflow: self.selection.overflow,
            },
        };
        Ok(CompressConfig {
            segmentation: self.segmentation.clone(),
            scoring: ScoringOptions {
                rep: self.t_rep,
                scope: self.scorer.scope,
            },
            selection,
            length_unit: self.length_unit()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_full_file() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.compress_config().unwrap().selection, SelectionRule::TopK { k: 10 });

        let text = r#"
            seed = 7
            workers = 4
            parse_mode = "strict"

            [segmentation]
            max_unit_chars = 300

            [decomposer]
            kind = "refine"
            endpoint = "llm"
            max_rounds = 2

            [scorer]
            kind = "random"

            [selection]
            rule = "budget"
            b_max = 100
            overflow = "stop"

            [t_rep]
            policy = "head-tail"
            cap = 80

            [endpoints.llm]
            base_url = "http://127.0.0.1:9"
            model_id = "gpt-4.1"
            credential_env_var_name = "OPENAI_API_KEY"

            [costs."gpt-4.1"]
            input_rate = 2.0
            output_rate = 8.0
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.decomposer.kind, DecomposerKind::Refine);
        assert_eq!(c.costs["gpt-4.1"], CostModel::GPT_4_1);
        assert_eq!(
            c.compress_config().unwrap().selection,
            SelectionRule::Budget { b_max: 100, overflow: OverflowPolicy::Stop }
        );
        assert_eq!(c.refine_options().max_rounds, 2);
    }

    #[test]
    fn invariants() {
        for bad in [
            "[scorer]\nkind = \"random\"",
            "[decomposer]\nkind = \"remote\"",
            "[decomposer]\nkind = \"remote\"\nendpoint = \"missing\"",
            "[selection]\nrule = \"budget\"",
            "[selection]\nlength_unit = \"furlongs\"",
            "workers = 0",
            "unknown_key = 1",
            "[endpoints.x]\nbase_url = \"http://a\"\nmodel_id = \"m\"\ntimeout_secs = 0",
        ] {
            assert!(matches!(RunConfig::from_toml(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }
}
