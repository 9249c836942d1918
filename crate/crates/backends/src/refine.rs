//! Propose-and-audit loop around a decomposer.

use edutree_core::decompose::{BoxError, Decomposer, Scorer, TokenUsage};
use edutree_core::segment::{EduSequence, SourceDocument};
use edutree_core::tree::{validate, DiagCode, Diagnostic, Severity, StructureTree};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    pub max_rounds: usize,
    /// Minimum critic score for a title to count as faithful.
    pub threshold: f64,
    /// Treat empty titles as errors.
    pub require_titles: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_rounds: 3,
            threshold: 0.5,
            require_titles: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritiqueReport {
    pub round: usize,
    pub accepted: bool,
    pub deterministic_findings: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_findings: Option<String>,
    /// Fraction of units covered by some root.
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    /// The first accepted proposal, or the last one if none was accepted.
    pub tree: StructureTree,
    /// Parser diagnostics of the returned proposal.
    pub diagnostics: Vec<Diagnostic>,
    pub reports: Vec<CritiqueReport>,
    pub usage: TokenUsage,
}

impl Refinement {
    pub fn accepted(&self) -> bool {
        self.reports.last().is_some_and(|r| r.accepted)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("solver failed in round {round}: {source}")]
    Solver { round: usize, source: BoxError },
    #[error("critic failed in round {round}: {source}")]
    Critic { round: usize, source: BoxError },
}

/// Deterministic findings: every integrity error plus, optionally, empty titles.
pub fn audit(tree: &StructureTree, n_edus: usize, require_titles: bool) -> Vec<Diagnostic> {
    let mut findings = validate(tree, n_edus);
    if require_titles {
        for visit in tree.preorder() {
            if visit.node.title.trim().is_empty() {
                findings.push(Diagnostic::new(
                    Severity::Error,
                    DiagCode::EmptyTitle,
                    visit.index + 1,
                    format!("node {} has no title", visit.node.span),
                ));
            }
        }
        findings.sort_by_key(|d| d.line);
    }
    findings
}

/// Titles the critic scores below `threshold` against their own spans.
fn critique(tree: &StructureTree, seq: &EduSequence, critic: &dyn Scorer, threshold: f64) -> Result<Vec<String>, BoxError> {
    let mut flagged = Vec::new();
    for visit in tree.preorder() {
        let node = visit.node;
        let text = seq.retrieve(node.span)?;
        let score = critic.score(&node.title, &[text])?;
        let s = *score.first().ok_or("critic returned no score")?;
        if s.is_nan() || s < threshold {
            flagged.push(format!(
                "line {}: title `{}` scored {s:.2} against span {}; below {threshold}",
                visit.index + 1,
                node.title,
                node.span
            ));
        }
    }
    Ok(flagged)
}

/// Proposes with `solver`, audits, and on rejection feeds the findings back
/// verbatim, for at most `options.max_rounds` rounds.
///
/// The model critic only runs on proposals that pass the deterministic audit.
pub fn solver_critic_refine(
    doc: &SourceDocument,
    seq: &EduSequence,
    solver: &dyn Decomposer,
    critic: Option<&dyn Scorer>,
    options: &RefineOptions,
) -> Result<Refinement, RefineError> {
    if options.max_rounds == 0 {
        return Err(RefineError::NoRounds);
    }
    let mut reports = Vec::new();
    let mut usage = TokenUsage::default();
    let mut feedback: Option<String> = None;
    let mut last = None;
    for round in 1..=options.max_rounds {
        let proposal = solver
            .decompose(doc, seq, feedback.as_deref())
            .map_err(|source| RefineError::Solver { round, source })?;
        usage += proposal.usage;
        let findings = audit(&proposal.tree, seq.len(), options.require_titles);
        let deterministic_ok = !findings.iter().any(Diagnostic::is_error);
        let flagged = match critic {
            Some(c) if deterministic_ok => {
                critique(&proposal.tree, seq, c, options.threshold).map_err(|source| RefineError::Critic { round, source })?
            }
            _ => Vec::new(),
        };
        let accepted = deterministic_ok && flagged.is_empty();
        let model_findings = (!flagged.is_empty()).then(|| flagged.join("\n"));
        let report = CritiqueReport {
            round,
            accepted,
            coverage: proposal.tree.coverage(),
            deterministic_findings: findings,
            model_findings,
        };
        if !accepted {
            let mut lines: Vec<String> = report.deterministic_findings.iter().map(ToString::to_string).collect();
            lines.extend(flagged);
            feedback = Some(lines.join("\n"));
        }
        reports.push(report);
        last = Some(proposal);
        if accepted {
            break;
        }
    }
    let last = last.expect("at least one round ran");
    Ok(Refinement {
        tree: last.tree,
        diagnostics: last.diagnostics,
        reports,
        usage,
    })
}
