//! Prompt templates with `{name}` placeholders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template `{template}` is missing placeholder {{{placeholder}}}")]
pub struct MissingPlaceholder {
    pub template: String,
    pub placeholder: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, name) in scan(&self.text) {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        }
        out
    }

    pub fn require(&self, names: &[&str]) -> Result<(), MissingPlaceholder> {
        let present = self.placeholders();
        for name in names {
            if !present.iter().any(|p| p == name) {
                return Err(MissingPlaceholder {
                    template: self.name.clone(),
                    placeholder: name.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Substitutes every known placeholder in one pass; values are inserted
    /// literally, so braces inside them are never re-expanded. Unknown
    /// placeholders are left untouched.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let vars: BTreeMap<&str, &str> = vars.iter().copied().collect();
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for (pos, name) in scan(&self.text) {
            if let Some(value) = vars.get(name) {
                out.push_str(&self.text[last..pos]);
                out.push_str(value);
                last = pos + name.len() + 2;
            }
        }
        out.push_str(&self.text[last..]);
        out
    }
}

/// Byte offsets and names of `{identifier}` placeholders.
fn scan(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            if j > start && j < bytes.len() && bytes[j] == b'}' {
                out.push((i, &text[start..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Zero-shot outline extraction instruction for general chat models.
pub const OUTLINE_BASELINE: &str = "Work your way down through the article's heading structure, outputting each level of heading in Markdown format.

- First, use only the original headings—do not include body text, do not summarize, and do not rewrite.

- If a heading is split into multiple sentences due to punctuation, combine them into a single complete heading and output it as one entry.

- Output the heading structure top-down, carefully identifying hierarchical relationships and determining whether overly detailed levels are necessary to output.

- Finally, return only the final result without any additional explanations.

Article: {input}";

/// Outline extraction that asks for span-anchored headings over numbered units.
pub const DECOMPOSE: &str = "The article below has been split into {n_units} numbered units, one per line as `[id] text`.

Work your way down through the article's heading structure and output it in augmented Markdown, one heading per line:

<#...#> [start--end] title

- The number of `#` is the heading level.
- `start` and `end` are the first and last unit ids covered by the heading, with 1 <= start <= end <= {n_units}.
- A heading's span must lie inside its parent's span; sibling spans must not overlap and must appear in order.
- Do not include body text. Return only the heading lines without any additional explanations.

Article:
{input}";

/// Appended to a decomposer prompt after an audit rejects a proposal.
pub const REVISION_FEEDBACK: &str = "

Your previous outline was rejected by an audit with these findings:
{feedback}
Output the complete corrected outline.";

pub const SUMMARIZE_SYSTEM: &str = "You are a professional content analyst. Please always output valid JSON.";

pub const SUMMARIZE_USER: &str = "Please generate a professional retrieval content based on the following:
- Source: {source_desc}
- Title: {title}
- Hierarchical Content:
{content_text}

Summarization Requirements:
1) Provide a 150-250 word summary.
2) List 3-5 key points.
3) Outline the main purpose/function.
4) Briefly describe content structure characteristics.

Output JSON Format:
{ \"summary\": \"...\", \"key_points\": [\"...\"], \"main_purpose\": \"...\", \"content_structure\": \"...\", \"information_value\": \"High/Medium/Low\" }";

pub const QA_SYSTEM: &str = "You are a rigorous retrieval QA assistant.";

pub const QA_USER: &str = "You are a rigorous retrieval QA assistant. Answer only based on the provided context. Do not fabricate information.

Question:
{query}

Context (indexed by node ID):
{context}

Please provide:
- Direct answer (if derivable).
- Concise explanation (based on the context).
- Citations of the node indices used (e.g., [12, 15]).

Requirements:
- If the context is insufficient, explicitly state \"Insufficient to answer\".
- Do not introduce information outside the provided context.";

pub fn outline_baseline() -> PromptTemplate {
    PromptTemplate::new("outline-baseline", OUTLINE_BASELINE)
}

pub fn decompose() -> PromptTemplate {
    PromptTemplate::new("decompose", DECOMPOSE)
}

pub fn qa_user() -> PromptTemplate {
    PromptTemplate::new("qa", QA_USER)
}

pub fn summarize_user() -> PromptTemplate {
    PromptTemplate::new("summarize", SUMMARIZE_USER)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_and_render() {
        let t = PromptTemplate::new("t", "Q: {query}\nC: {context}\n{query}");
        assert_eq!(t.placeholders(), vec!["query", "context"]);
        assert_eq!(
            t.render(&[("query", "why {context}?"), ("context", "[1] x")]),
            "Q: why {context}?\nC: [1] x\nwhy {context}?"
        );
    }

    #[test]
    fn json_braces_are_not_placeholders() {
        let t = summarize_user();
        assert_eq!(t.placeholders(), vec!["source_desc", "title", "content_text"]);
    }

    #[test]
    fn shipped_templates_carry_their_inputs() {
        assert!(outline_baseline().require(&["input"]).is_ok());
        assert!(decompose().require(&["input", "n_units"]).is_ok());
        assert!(qa_user().require(&["query", "context"]).is_ok());
        let err = qa_user().require(&["input"]).unwrap_err();
        assert_eq!(err.placeholder, "input");
    }
}
