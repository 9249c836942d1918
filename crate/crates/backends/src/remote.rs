//! Decomposition, scoring and generation through remote models.

use std::sync::LazyLock;

use edutree_core::decompose::{BoxError, Decomposer, Decomposition, Generator, Scorer, TokenUsage};
use edutree_core::prompts::{PromptTemplate, REVISION_FEEDBACK};
use edutree_core::segment::{EduSequence, SourceDocument};
use edutree_core::tree::{parse_augmented_markdown, ParseMode};
use regex::Regex;

use crate::client::{BackendError, ChatClient, RerankClient};

static THINK_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think(?:ing)?>.*?(?:</think(?:ing)?>|\z)").unwrap());

/// Removes reasoning blocks and code-fence lines from a model reply.
pub fn strip_reply_markup(reply: &str) -> String {
    let without_think = THINK_BLOCK.replace_all(reply, "");
    without_think
        .lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

/// Asks a chat model for the augmented-markdown outline of `seq`.
///
/// `feedback`, when present, is appended to the prompt so that a rejected
/// proposal can be revised.
pub fn decompose_remote(
    seq: &EduSequence,
    client: &ChatClient,
    template: &PromptTemplate,
    mode: ParseMode,
    feedback: Option<&str>,
) -> Result<Decomposition, BackendError> {
    template
        .require(&["input"])
        .map_err(|e| BackendError::InvalidInput(e.to_string()))?;
    let n_units = seq.len().to_string();
    let mut prompt = template.render(&[("input", &seq.render_indexed()), ("n_units", &n_units)]);
    if let Some(fb) = feedback {
        prompt.push_str(&PromptTemplate::new("feedback", REVISION_FEEDBACK).render(&[("feedback", fb)]));
    }
    let reply = client.complete(None, &prompt)?;
    let outline = strip_reply_markup(&reply.content);
    let (tree, diagnostics) = parse_augmented_markdown(&outline, seq.len(), mode).map_err(BackendError::Schema)?;
    Ok(Decomposition {
        tree: tree.with_doc_id(&seq.doc_id),
        diagnostics,
        usage: reply.usage,
    })
}

#[derive(Debug, Clone)]
pub struct RemoteDecomposer {
    pub client: ChatClient,
    pub template: PromptTemplate,
    pub mode: ParseMode,
}

impl RemoteDecomposer {
    pub fn new(client: ChatClient, mode: ParseMode) -> Self {
        Self {
            client,
            template: edutree_core::prompts::decompose(),
            mode,
        }
    }
}

impl Decomposer for RemoteDecomposer {
    fn decompose(&self, _doc: &SourceDocument, seq: &EduSequence, feedback: Option<&str>) -> Result<Decomposition, BoxError> {
        Ok(decompose_remote(seq, &self.client, &self.template, self.mode, feedback)?)
    }
}

/// Relevance of one candidate text to `query`, clamped to `[0, 1]`.
pub fn score_remote(query: &str, candidate_text: &str, client: &RerankClient) -> Result<f64, BackendError> {
    Ok(score_batch(query, &[candidate_text.to_string()], client)?[0])
}

fn score_batch(query: &str, candidates: &[String], client: &RerankClient) -> Result<Vec<f64>, BackendError> {
    if query.trim().is_empty() {
        return Err(BackendError::InvalidInput("query is empty".into()));
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    Ok(client
        .rerank(query, candidates)?
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect())
}

/// Reranker-backed [`Scorer`]; all candidates go out in one request.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    pub client: RerankClient,
}

impl Scorer for RemoteScorer {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError> {
        Ok(score_batch(query, candidates, &self.client)?)
    }
}

/// Raw completion text and its token usage.
pub fn generate(system: Option<&str>, prompt: &str, client: &ChatClient) -> Result<(String, TokenUsage), BackendError> {
    let reply = client.complete(system, prompt)?;
    Ok((reply.content, reply.usage))
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    pub client: ChatClient,
}

impl Generator for RemoteGenerator {
    fn generate(&self, system: Option<&str>, prompt: &str) -> Result<(String, TokenUsage), BoxError> {
        Ok(generate(system, prompt, &self.client)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_reasoning_and_fences() {
        let reply = "<think>let me see\n# [9--9] no</think>\n```markdown\n# [1--2] A\n```\n";
        assert_eq!(strip_reply_markup(reply), "# [1--2] A");
        assert_eq!(strip_reply_markup("<think>never closed"), "");
        assert_eq!(strip_reply_markup("# [1--1] T"), "# [1--1] T");
    }
}
