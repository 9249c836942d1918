//! JSON-lines corpus: one document per line, optionally with a gold tree.

use std::path::Path;

use edutree_core::segment::{FormatHint, LanguageHint, SourceDocument};
use edutree_core::tree::{parse_augmented_markdown, validate, ParseMode, StructureNode, StructureTree};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Gold structure as augmented markdown or as nested node objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldTree {
    Markdown(String),
    Nodes(Vec<StructureNode>),
}

impl GoldTree {
    /// The gold tree checked strictly against a sequence of `n_edus` units.
    pub fn resolve(&self, n_edus: usize) -> Result<StructureTree, String> {
        match self {
            GoldTree::Markdown(text) => parse_augmented_markdown(text, n_edus, ParseMode::Strict)
                .map(|(tree, _)| tree)
                .map_err(|e| e.0.iter().filter(|d| d.is_error()).map(ToString::to_string).collect::<Vec<_>>().join("; ")),
            GoldTree::Nodes(nodes) => {
                let tree = StructureTree::new(n_edus, nodes.clone());
                let errors: Vec<String> = validate(&tree, n_edus)
                    .iter()
                    .filter(|d| d.is_error())
                    .map(ToString::to_string)
                    .collect();
                if errors.is_empty() {
                    Ok(tree)
                } else {
                    Err(errors.join("; "))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub format_hint: FormatHint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_hint: Option<LanguageHint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_tree: Option<GoldTree>,
}

impl CorpusRecord {
    pub fn document(&self) -> SourceDocument {
        SourceDocument {
            doc_id: self.doc_id.clone(),
            text: self.text.clone(),
            format_hint: self.format_hint,
            language_hint: self.language_hint,
        }
    }
}

const KEY_ALIASES: &[(&str, &[&str])] = &[
    ("doc_id", &["doc_id", "id", "docid", "document_id", "uid"]),
    ("text", &["text", "content", "document", "body", "markdown"]),
    ("format_hint", &["format_hint", "format"]),
    ("language_hint", &["language_hint", "language", "lang"]),
    ("gold_tree", &["gold_tree", "gold", "tree", "outline", "structure", "label"]),
];

/// Maps a record with foreign key names onto the corpus schema.
///
/// Unknown keys are ignored; the first alias present wins; numeric ids are
/// stringified.
pub fn import_record(value: Value) -> Result<CorpusRecord, String> {
    let Value::Object(obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let mut canonical = Map::new();
    for (key, aliases) in KEY_ALIASES {
        if let Some(v) = aliases.iter().find_map(|a| obj.get(*a)) {
            let v = match (*key, v) {
                ("doc_id", Value::Number(n)) => Value::String(n.to_string()),
                _ => v.clone(),
            };
            if !v.is_null() {
                canonical.insert((*key).to_string(), v);
            }
        }
    }
    serde_json::from_value(Value::Object(canonical)).map_err(|e| e.to_string())
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, CliError> {
    let mut records = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Input(format!("corpus line {}: {m}", i + 1));
        let value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let record = import_record(value).map_err(bad)?;
        if !seen.insert(record.doc_id.clone()) {
            return Err(bad(format!("duplicate doc_id `{}`", record.doc_id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read corpus {}: {e}", path.display())))?;
    parse_corpus(&text)
}

pub fn write_corpus(records: &[CorpusRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use edutree_core::tree::SpanRef;

    #[test]
    fn round_trip_preserves_records() {
        let records = vec![
            CorpusRecord {
                doc_id: "a".into(),
                text: "# T\nline\twith tab\n".into(),
                format_hint: FormatHint::Markdown,
                language_hint: Some(LanguageHint::En),
                gold_tree: Some(GoldTree::Markdown("# [1--2] T".into())),
            },
            CorpusRecord {
                doc_id: "b".into(),
                text: "中文。".into(),
                format_hint: FormatHint::Plain,
                language_hint: None,
                gold_tree: Some(GoldTree::Nodes(vec![StructureNode::new(1, SpanRef::new(1, 1), "x")])),
            },
            CorpusRecord {
                doc_id: "c".into(),
                text: String::new(),
                format_hint: FormatHint::HtmlDerived,
                language_hint: None,
                gold_tree: None,
            },
        ];
        assert_eq!(parse_corpus(&write_corpus(&records)).unwrap(), records);
    }

    #[test]
    fn aliases_and_errors() {
        let r = import_record(serde_json::json!({"id": 17, "content": "x", "outline": "# [1--1] x", "extra": true})).unwrap();
        assert_eq!(r.doc_id, "17");
        assert_eq!(r.gold_tree, Some(GoldTree::Markdown("# [1--1] x".into())));
        assert!(import_record(serde_json::json!({"text": "no id"})).is_err());
        assert!(parse_corpus("{\"doc_id\":\"a\",\"text\":\"\"}\n{\"doc_id\":\"a\",\"text\":\"\"}").is_err());
        assert!(parse_corpus("not json").is_err());
    }

    #[test]
    fn gold_resolution() {
        assert!(GoldTree::Markdown("# [1--2] T".into()).resolve(2).is_ok());
        assert!(GoldTree::Markdown("# [1--3] T".into()).resolve(2).is_err());
        assert!(GoldTree::Nodes(vec![StructureNode::new(1, SpanRef::new(2, 1), "x")]).resolve(2).is_err());
    }
}
