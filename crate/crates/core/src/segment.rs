//! Elementary discourse unit segmentation.
//!
//! A document is cut into a flat, ordered partition of units. Every unit keeps
//! its exact source text together with its character span, so that any id
//! interval can later be resolved back to verbatim source content.
//!
//! Offsets are counted in Unicode scalar values (`char`s), not bytes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tree::SpanRef;

/// How the source text was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatHint {
    Plain,
    #[default]
    Markdown,
    HtmlDerived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageHint {
    En,
    Zh,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub format_hint: FormatHint,
    #[serde(default)]
    pub language_hint: Option<LanguageHint>,
}

impl SourceDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            format_hint: FormatHint::default(),
            language_hint: None,
        }
    }

    pub fn with_format(mut self, hint: FormatHint) -> Self {
        self.format_hint = hint;
        self
    }
}

/// Half-open character range `[start, end)` into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// The markdown role of a unit, as seen by the segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "level")]
pub enum EduKind {
    Heading(u8),
    ListItem,
    TableRow,
    Code,
    Prose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edu {
    /// 1-based position in the sequence.
    pub id: usize,
    pub text: String,
    pub span: CharSpan,
    pub kind: EduKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EduSequence {
    pub doc_id: String,
    pub units: Vec<Edu>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RangeError {
    #[error("span [{start}, {end}] is inverted")]
    Inverted { start: usize, end: usize },
    #[error("span [{start}, {end}] is outside [1, {n}]")]
    OutOfRange { start: usize, end: usize, n: usize },
}

impl EduSequence {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Looks up a unit by its 1-based id.
    pub fn get(&self, id: usize) -> Option<&Edu> {
        id.checked_sub(1).and_then(|i| self.units.get(i))
    }

    /// Units covered by the closed id interval `span`.
    pub fn slice(&self, span: SpanRef) -> Result<&[Edu], RangeError> {
        self.check(span)?;
        Ok(&self.units[span.start - 1..span.end])
    }

    fn check(&self, span: SpanRef) -> Result<(), RangeError> {
        if span.start > span.end {
            return Err(RangeError::Inverted {
                start: span.start,
                end: span.end,
            });
        }
        if span.start < 1 || span.end > self.len() {
            return Err(RangeError::OutOfRange {
                start: span.start,
                end: span.end,
                n: self.len(),
            });
        }
        Ok(())
    }

    /// Verbatim text of the units in `span`, joined by a single newline.
    pub fn retrieve(&self, span: SpanRef) -> Result<String, RangeError> {
        let units = self.slice(span)?;
        Ok(units
            .iter()
            .map(|u| u.text.as_str())
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// One `[id] text` line per unit, suitable as decomposer input.
    pub fn render_indexed(&self) -> String {
        self.units
            .iter()
            .map(|u| format!("[{}] {}", u.id, flatten_newlines(&u.text)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Tab-separated debug dump: `id<TAB>start<TAB>end<TAB>escaped text`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for u in &self.units {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                u.id,
                u.span.start,
                u.span.end,
                escape_field(&u.text)
            ));
        }
        out
    }

    /// Rebuilds the source text from units and the original gap characters.
    pub fn reconstruct(&self, source: &str) -> String {
        let chars: Vec<char> = source.chars().collect();
        let mut out = String::with_capacity(source.len());
        let mut cursor = 0;
        for u in &self.units {
            out.extend(&chars[cursor..u.span.start]);
            out.push_str(&u.text);
            cursor = u.span.end;
        }
        out.extend(&chars[cursor.min(chars.len())..]);
        out
    }
}

fn flatten_newlines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_break = false;
    for c in text.chars() {
        if c == '\n' || c == '\r' {
            pending_break = true;
            continue;
        }
        if pending_break {
            out.push(' ');
            pending_break = false;
        }
        out.push(c);
    }
    out
}

pub fn escape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

pub fn unescape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationRules {
    /// Treat headings, list items, table rows and fenced code as their own
    /// units. Ignored for [`FormatHint::Plain`] documents.
    pub markdown_structure: bool,
    /// Units longer than this many characters are force-split at the last
    /// whitespace before the cap. Fenced code blocks are never split.
    pub max_unit_chars: usize,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        Self {
            markdown_structure: true,
            max_unit_chars: 500,
        }
    }
}

const ASCII_TERMINATORS: [char; 3] = ['.', '!', '?'];
const WIDE_TERMINATORS: [char; 4] = ['。', '！', '？', '；'];
const CLOSERS: [char; 8] = ['"', '\'', ')', ']', '”', '’', '」', '』'];

#[derive(Debug, Clone, Copy)]
enum LineClass {
    Blank,
    Fence,
    Structural(EduKind),
    Prose,
}

struct Line {
    start: usize,
    /// Exclusive, not counting the newline.
    end: usize,
}

/// Segments `doc` into units. Pure and deterministic in `(doc, rules)`.
pub fn segment(doc: &SourceDocument, rules: &SegmentationRules) -> EduSequence {
    let chars: Vec<char> = doc.text.chars().collect();
    let markdown = rules.markdown_structure && doc.format_hint != FormatHint::Plain;

    let mut lines = Vec::new();
    let mut start = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            lines.push(Line { start, end: i });
            start = i + 1;
        }
    }
    if start < chars.len() {
        lines.push(Line {
            start,
            end: chars.len(),
        });
    }

    let mut raw: Vec<(CharSpan, EduKind)> = Vec::new();
    let mut paragraph: Option<CharSpan> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        let content = &chars[line.start..line.end];
        let class = classify(content, markdown);
        if !matches!(class, LineClass::Prose) {
            if let Some(p) = paragraph.take() {
                split_prose(&chars, p, &mut raw);
            }
        }
        match class {
            LineClass::Blank => {}
            LineClass::Fence => {
                let marker = fence_marker(content);
                let mut j = i + 1;
                while j < lines.len() {
                    let inner = &chars[lines[j].start..lines[j].end];
                    if closes_fence(inner, marker) {
                        break;
                    }
                    j += 1;
                }
                let last = j.min(lines.len() - 1);
                if let Some(span) = trim_span(&chars, line.start, lines[last].end) {
                    raw.push((span, EduKind::Code));
                }
                i = last;
            }
            LineClass::Structural(kind) => {
                if let Some(span) = trim_span(&chars, line.start, line.end) {
                    raw.push((span, kind));
                }
            }
            LineClass::Prose => {
                paragraph = Some(match paragraph {
                    Some(p) => CharSpan {
                        start: p.start,
                        end: line.end,
                    },
                    None => CharSpan {
                        start: line.start,
                        end: line.end,
                    },
                });
            }
        }
        i += 1;
    }
    if let Some(p) = paragraph.take() {
        split_prose(&chars, p, &mut raw);
    }

    let mut units = Vec::with_capacity(raw.len());
    for (span, kind) in raw {
        let pieces = if kind == EduKind::Code {
            vec![span]
        } else {
            cap_span(&chars, span, rules.max_unit_chars)
        };
        for piece in pieces {
            units.push(Edu {
                id: units.len() + 1,
                text: chars[piece.start..piece.end].iter().collect(),
                span: piece,
                kind,
            });
        }
    }

    EduSequence {
        doc_id: doc.doc_id.clone(),
        units,
    }
}

fn classify(line: &[char], markdown: bool) -> LineClass {
    let trimmed: Vec<char> = line
        .iter()
        .copied()
        .skip_while(|c| c.is_whitespace())
        .collect();
    if trimmed.iter().all(|c| c.is_whitespace()) {
        return LineClass::Blank;
    }
    if !markdown {
        return LineClass::Prose;
    }
    let indent = line.len() - trimmed.len();
    if fence_marker(line).is_some() {
        return LineClass::Fence;
    }
    if indent <= 3 {
        if let Some(level) = heading_level(&trimmed) {
            return LineClass::Structural(EduKind::Heading(level));
        }
    }
    if trimmed[0] == '|' {
        return LineClass::Structural(EduKind::TableRow);
    }
    if is_list_item(&trimmed) {
        return LineClass::Structural(EduKind::ListItem);
    }
    LineClass::Prose
}

/// Level of an ATX heading line (leading whitespace already removed).
pub fn heading_level(line: &[char]) -> Option<u8> {
    let hashes = line.iter().take_while(|&&c| c == '#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    match line.get(hashes) {
        None => Some(hashes as u8),
        Some(c) if c.is_whitespace() => Some(hashes as u8),
        _ => None,
    }
}

fn is_list_item(line: &[char]) -> bool {
    let followed_by_space = |i: usize| line.get(i).is_some_and(|c| c.is_whitespace());
    match line[0] {
        '-' | '*' | '+' => followed_by_space(1),
        c if c.is_ascii_digit() => {
            let digits = line.iter().take_while(|c| c.is_ascii_digit()).count();
            digits <= 9
                && matches!(line.get(digits), Some('.') | Some(')'))
                && followed_by_space(digits + 1)
        }
        _ => false,
    }
}

fn fence_marker(line: &[char]) -> Option<char> {
    let indent = line.iter().take_while(|&&c| c == ' ').count();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let marker = *rest.first()?;
    if marker != '`' && marker != '~' {
        return None;
    }
    if rest.iter().take_while(|&&c| c == marker).count() >= 3 {
        Some(marker)
    } else {
        None
    }
}

fn closes_fence(line: &[char], opener: Option<char>) -> bool {
    let Some(marker) = opener else { return false };
    let trimmed: Vec<char> = line
        .iter()
        .copied()
        .filter(|c| !c.is_whitespace())
        .collect();
    trimmed.len() >= 3 && trimmed.iter().all(|&c| c == marker)
}

fn trim_span(chars: &[char], mut start: usize, mut end: usize) -> Option<CharSpan> {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    (start < end).then_some(CharSpan { start, end })
}

fn split_prose(chars: &[char], para: CharSpan, out: &mut Vec<(CharSpan, EduKind)>) {
    let mut start = para.start;
    let mut i = para.start;
    while i < para.end {
        let c = chars[i];
        let wide = WIDE_TERMINATORS.contains(&c);
        if wide || ASCII_TERMINATORS.contains(&c) {
            let mut j = i + 1;
            while j < para.end && (CLOSERS.contains(&chars[j]) || chars[j] == c) {
                j += 1;
            }
            let boundary = j == para.end || chars[j].is_whitespace() || wide;
            if boundary {
                if let Some(span) = trim_span(chars, start, j) {
                    out.push((span, EduKind::Prose));
                }
                start = j;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    if let Some(span) = trim_span(chars, start, para.end) {
        out.push((span, EduKind::Prose));
    }
}

fn cap_span(chars: &[char], span: CharSpan, cap: usize) -> Vec<CharSpan> {
    let mut pieces = Vec::new();
    let mut rest = span;
    if cap == 0 {
        return vec![span];
    }
    while rest.len() > cap {
        let window = &chars[rest.start..=rest.start + cap];
        let cut = window
            .iter()
            .rposition(|c| c.is_whitespace())
            .filter(|&p| p > 0)
            .map(|p| rest.start + p)
            .unwrap_or(rest.start + cap);
        if let Some(piece) = trim_span(chars, rest.start, cut) {
            pieces.push(piece);
        }
        match trim_span(chars, cut, rest.end) {
            Some(next) => rest = next,
            None => return pieces,
        }
    }
    pieces.push(rest);
    pieces
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}
