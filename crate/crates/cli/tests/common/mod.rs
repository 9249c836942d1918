#![allow(dead_code)]

use std::sync::LazyLock;

use edutree_backends::mock::{MockReply, MockServer};
use edutree_core::decompose::TokenUsage;
use edutree_core::length::LengthUnit;
use regex::Regex;

static UNIT_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\[([0-9]+)\] (#{1,2}) (.*)$").unwrap());
static UNIT_COUNT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"split into ([0-9]+) numbered units").unwrap());

/// Outline a careful model might return: level-1 and level-2 headings read
/// from the indexed units; deeper headings are missed.
pub fn mock_outline(prompt: &str) -> String {
    let n: usize = UNIT_COUNT.captures(prompt).map_or(0, |c| c[1].parse().unwrap());
    let heads: Vec<(usize, usize, String)> = UNIT_LINE
        .captures_iter(prompt)
        .map(|c| (c[1].parse().unwrap(), c[2].len(), c[3].trim().to_string()))
        .collect();
    let mut lines = Vec::new();
    for (i, (id, level, title)) in heads.iter().enumerate() {
        let end = heads[i + 1..]
            .iter()
            .find(|(_, l, _)| l <= level)
            .map_or(n, |(next, _, _)| next - 1);
        lines.push(format!("{} [{id}--{end}] {title}", "#".repeat(*level)));
    }
    lines.join("\n")
}

/// Chat server answering decomposition prompts with [`mock_outline`];
/// usage is the whitespace token count of prompt and reply.
pub fn outline_server() -> MockServer {
    MockServer::with_handler(|req| {
        let prompt = req.last_message().unwrap_or_default();
        let outline = mock_outline(&prompt);
        let unit = LengthUnit::WhitespaceTokens;
        MockReply::chat(
            &outline,
            TokenUsage::new(unit.measure(&prompt) as u64, unit.measure(&outline) as u64),
        )
    })
}

pub fn remote_config(server: &MockServer, extra: &str) -> String {
    format!(
        r#"
seed = 1
{extra}

[decomposer]
kind = "remote"
endpoint = "llm"

[endpoints.llm]
base_url = "{}"
model_id = "mock-model"
retry_backoff_ms = 1
max_retries = 0

[costs.mock-model]
input_rate = 2.0
output_rate = 8.0
"#,
        server.url()
    )
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
