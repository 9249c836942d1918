//! Span-anchored structure trees and the augmented markdown schema.
//!
//! Each heading line has the shape `## [12--15] Concept Title`: the number of
//! `#` is the level, the bracketed closed interval points at EDU ids, and the
//! remainder is the title. Trees built from such lines are checked for
//! referential integrity against the number of units they were built for.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Closed interval `[start, end]` of 1-based EDU ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
}

impl SpanRef {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, other: &SpanRef) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &SpanRef) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Number of ids covered; zero for inverted spans.
    pub fn width(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn ids(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl From<[usize; 2]> for SpanRef {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<SpanRef> for [usize; 2] {
    fn from(s: SpanRef) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for SpanRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}--{}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureNode {
    #[serde(default)]
    pub title: String,
    pub level: u8,
    pub span: SpanRef,
    #[serde(default)]
    pub children: Vec<StructureNode>,
}

impl StructureNode {
    pub fn new(level: u8, span: SpanRef, title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            level,
            span,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<StructureNode>) -> Self {
        self.children = children;
        self
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(StructureNode::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(StructureNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructureTree {
    #[serde(default)]
    pub doc_id: String,
    pub n_edus: usize,
    pub roots: Vec<StructureNode>,
}

/// A node visited in pre-order, with its position in that order.
#[derive(Debug, Clone, Copy)]
pub struct NodeVisit<'a> {
    pub index: usize,
    pub depth: usize,
    pub node: &'a StructureNode,
}

impl StructureTree {
    pub fn new(n_edus: usize, roots: Vec<StructureNode>) -> Self {
        Self {
            doc_id: String::new(),
            n_edus,
            roots,
        }
    }

    pub fn with_doc_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.roots.iter().map(StructureNode::size).sum()
    }

    pub fn depth(&self) -> usize {
        self.roots.iter().map(StructureNode::depth).max().unwrap_or(0)
    }

    /// All nodes in pre-order.
    pub fn preorder(&self) -> Vec<NodeVisit<'_>> {
        fn walk<'a>(nodes: &'a [StructureNode], depth: usize, out: &mut Vec<NodeVisit<'a>>) {
            for node in nodes {
                out.push(NodeVisit {
                    index: out.len(),
                    depth,
                    node,
                });
                walk(&node.children, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.roots, 0, &mut out);
        out
    }

    /// Ids in `[1, n_edus]` covered by at least one node.
    pub fn covered_ids(&self) -> usize {
        let mut covered = vec![false; self.n_edus + 1];
        for visit in self.preorder() {
            let span = visit.node.span;
            for id in span.start.max(1)..=span.end.min(self.n_edus) {
                covered[id] = true;
            }
        }
        covered.iter().filter(|&&c| c).count()
    }

    /// Fraction of units covered by some node; 1.0 for an empty sequence.
    pub fn coverage(&self) -> f64 {
        if self.n_edus == 0 {
            return 1.0;
        }
        self.covered_ids() as f64 / self.n_edus as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagCode {
    BadSyntax,
    SpanOutOfRange,
    SpanInverted,
    Overlap,
    NonNested,
    LevelJump,
    EmptyTitle,
}

impl DiagCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagCode::BadSyntax => "bad-syntax",
            DiagCode::SpanOutOfRange => "span-out-of-range",
            DiagCode::SpanInverted => "span-inverted",
            DiagCode::Overlap => "overlap",
            DiagCode::NonNested => "non-nested",
            DiagCode::LevelJump => "level-jump",
            DiagCode::EmptyTitle => "empty-title",
        }
    }
}

/// A schema problem. `line` is the 1-based source line for parsed input, or
/// the node's line in canonical serialization for trees built in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub line: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(severity: Severity, code: DiagCode, line: usize, message: impl Into<String>) -> Self {
        Self {
            severity,
            code,
            line,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {sev}[{}]: {}", self.line, self.code.as_str(), self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

impl std::str::FromStr for ParseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            other => Err(format!("unknown parse mode `{other}`")),
        }
    }
}

/// Strict-mode rejection: every error found, plus any warnings.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("augmented markdown rejected with {} error(s)", .0.iter().filter(|d| d.is_error()).count())]
pub struct SchemaError(pub Vec<Diagnostic>);

/// One heading line before tree realization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatHeading {
    pub level: u8,
    pub span: SpanRef,
    pub title: String,
    pub line: usize,
}

static HEADING_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(#{1,6})[ \t]*\[[ \t]*([0-9]+)[ \t]*(?:--|-|–|—)[ \t]*([0-9]+)[ \t]*\](.*)$").unwrap()
});

fn parse_id(digits: &str) -> usize {
    digits.parse().unwrap_or(usize::MAX)
}

/// Parses augmented markdown against a sequence of `n_edus` units.
///
/// Strict mode rejects the input on any error-severity problem. Lenient mode
/// repairs what it can (clamping, swapping inverted endpoints, trimming
/// overlaps, dropping unrecoverable nodes) and reports each repair as a
/// warning; the returned tree always passes [`validate`].
pub fn parse_augmented_markdown(
    text: &str,
    n_edus: usize,
    mode: ParseMode,
) -> Result<(StructureTree, Vec<Diagnostic>), SchemaError> {
    let mut diags = Vec::new();
    let mut flat = Vec::new();
    let bad_severity = match mode {
        ParseMode::Strict => Severity::Error,
        ParseMode::Lenient => Severity::Warning,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let Some(caps) = HEADING_LINE.captures(raw) else {
            diags.push(Diagnostic::new(
                bad_severity,
                DiagCode::BadSyntax,
                line_no,
                format!("not a `#.. [a--b] title` heading: {:?}", truncate_for_message(raw)),
            ));
            continue;
        };
        let rest = &caps[4];
        if !rest.is_empty() && !rest.starts_with([' ', '\t']) {
            diags.push(Diagnostic::new(
                bad_severity,
                DiagCode::BadSyntax,
                line_no,
                "title must be separated from the span by whitespace",
            ));
            continue;
        }
        let level = caps[1].len() as u8;
        let mut span = SpanRef::new(parse_id(&caps[2]), parse_id(&caps[3]));
        let title = rest.trim().to_string();
        if title.is_empty() {
            diags.push(Diagnostic::new(
                Severity::Warning,
                DiagCode::EmptyTitle,
                line_no,
                "heading has no title",
            ));
        }

        if mode == ParseMode::Lenient {
            if span.start > span.end {
                diags.push(Diagnostic::new(
                    Severity::Warning,
                    DiagCode::SpanInverted,
                    line_no,
                    format!("swapped inverted span {span}"),
                ));
                span = SpanRef::new(span.end, span.start);
            }
            if span.start < 1 || span.end > n_edus {
                if span.end < 1 || span.start > n_edus || n_edus == 0 {
                    diags.push(Diagnostic::new(
                        Severity::Warning,
                        DiagCode::SpanOutOfRange,
                        line_no,
                        format!("dropped node: span {span} lies outside [1, {n_edus}]"),
                    ));
                    continue;
                }
                let clamped = SpanRef::new(span.start.max(1), span.end.min(n_edus));
                diags.push(Diagnostic::new(
                    Severity::Warning,
                    DiagCode::SpanOutOfRange,
                    line_no,
                    format!("clamped span {span} to {clamped}"),
                ));
                span = clamped;
            }
        }
        flat.push(FlatHeading {
            level,
            span,
            title,
            line: line_no,
        });
    }

    match mode {
        ParseMode::Strict => {
            for h in &flat {
                if let Some(d) = bound_error(h.span, n_edus, h.line) {
                    diags.push(d);
                }
            }
            let (tree, realize_diags) = realize_tree(&flat, n_edus);
            diags.extend(realize_diags);
            diags.sort_by_key(|d| d.line);
            if has_errors(&diags) {
                Err(SchemaError(diags))
            } else {
                Ok((tree, diags))
            }
        }
        ParseMode::Lenient => {
            let (mut tree, realize_diags) = realize_tree(&flat, n_edus);
            diags.extend(realize_diags.into_iter().filter(|d| !d.is_error()));
            let lines: Vec<usize> = flat.iter().map(|h| h.line).collect();
            repair_structure(&mut tree, &lines, &mut diags);
            diags.sort_by_key(|d| d.line);
            Ok((tree, diags))
        }
    }
}

fn truncate_for_message(s: &str) -> String {
    const MAX: usize = 60;
    if s.chars().count() <= MAX {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(MAX).collect();
        t.push('…');
        t
    }
}

fn bound_error(span: SpanRef, n_edus: usize, line: usize) -> Option<Diagnostic> {
    if span.start > span.end {
        Some(Diagnostic::new(
            Severity::Error,
            DiagCode::SpanInverted,
            line,
            format!("span {span} is inverted"),
        ))
    } else if span.start < 1 || span.end > n_edus {
        Some(Diagnostic::new(
            Severity::Error,
            DiagCode::SpanOutOfRange,
            line,
            format!("span {span} is outside [1, {n_edus}]"),
        ))
    } else {
        None
    }
}

/// Builds the hierarchy from headings in document order.
///
/// A heading of level `L` becomes a child of the nearest preceding heading
/// with a level below `L`, otherwise a root. Skipped levels are legal and
/// produce a `level-jump` warning; nesting and sibling-order violations are
/// reported as errors but the tree is still returned.
pub fn realize_tree(flat: &[FlatHeading], n_edus: usize) -> (StructureTree, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let min_level = flat.iter().map(|h| h.level).min().unwrap_or(1);

    // Arena of (heading index, child indices); roots collected separately.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); flat.len()];
    let mut roots = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for (i, h) in flat.iter().enumerate() {
        while stack.last().is_some_and(|&top| flat[top].level >= h.level) {
            stack.pop();
        }
        match stack.last() {
            Some(&parent) => {
                if h.level > flat[parent].level + 1 {
                    diags.push(Diagnostic::new(
                        Severity::Warning,
                        DiagCode::LevelJump,
                        h.line,
                        format!(
                            "level {} heading directly under level {}",
                            h.level, flat[parent].level
                        ),
                    ));
                }
                children[parent].push(i);
            }
            None => {
                if h.level > min_level {
                    diags.push(Diagnostic::new(
                        Severity::Warning,
                        DiagCode::LevelJump,
                        h.line,
                        format!("top-level heading at level {} but the outline starts at level {min_level}", h.level),
                    ));
                }
                roots.push(i);
            }
        }
        stack.push(i);
    }

    fn build(i: usize, flat: &[FlatHeading], children: &[Vec<usize>]) -> StructureNode {
        let h = &flat[i];
        StructureNode {
            title: h.title.clone(),
            level: h.level,
            span: h.span,
            children: children[i].iter().map(|&c| build(c, flat, children)).collect(),
        }
    }
    let tree = StructureTree::new(
        n_edus,
        roots.iter().map(|&r| build(r, flat, &children)).collect(),
    );

    let lines: Vec<usize> = flat.iter().map(|h| h.line).collect();
    diags.extend(structural_errors(&tree, &lines));
    (tree, diags)
}

/// Nesting and sibling-order checks. `lines[k]` is the source line of the
/// k-th node in pre-order.
fn structural_errors(tree: &StructureTree, lines: &[usize]) -> Vec<Diagnostic> {
    fn walk(
        nodes: &[StructureNode],
        parent: Option<&StructureNode>,
        lines: &[usize],
        counter: &mut usize,
        out: &mut Vec<Diagnostic>,
    ) {
        let mut prev: Option<&StructureNode> = None;
        for node in nodes {
            let line = lines.get(*counter).copied().unwrap_or(*counter + 1);
            *counter += 1;
            if let Some(p) = parent {
                if !p.span.contains(&node.span) {
                    out.push(Diagnostic::new(
                        Severity::Error,
                        DiagCode::NonNested,
                        line,
                        format!("span {} is not inside parent span {}", node.span, p.span),
                    ));
                }
                if node.level <= p.level {
                    out.push(Diagnostic::new(
                        Severity::Error,
                        DiagCode::LevelJump,
                        line,
                        format!("level {} is not deeper than parent level {}", node.level, p.level),
                    ));
                }
            }
            if node.level == 0 {
                out.push(Diagnostic::new(
                    Severity::Error,
                    DiagCode::LevelJump,
                    line,
                    "level must be at least 1",
                ));
            }
            if let Some(q) = prev {
                if node.span.start <= q.span.end {
                    let what = if node.span.start < q.span.start {
                        "starts before"
                    } else {
                        "overlaps"
                    };
                    out.push(Diagnostic::new(
                        Severity::Error,
                        DiagCode::Overlap,
                        line,
                        format!("span {} {what} previous sibling {}", node.span, q.span),
                    ));
                }
            }
            prev = Some(node);
            walk(&node.children, Some(node), lines, counter, out);
        }
    }
    let mut out = Vec::new();
    let mut counter = 0;
    walk(&tree.roots, None, lines, &mut counter, &mut out);
    out
}

/// Lenient-mode structural repair, applied top-down: a node is first cut to
/// its parent's span, then trimmed to start after its previous sibling.
/// Nodes left empty are dropped and their children are re-examined in
/// their place.
fn repair_structure(tree: &mut StructureTree, lines: &[usize], diags: &mut Vec<Diagnostic>) {
    // Pair each node with its original source line so that repairs can be
    // attributed after children are spliced around.
    #[derive(Clone)]
    struct Tagged {
        node: StructureNode,
        line: usize,
        kids: Vec<Tagged>,
    }
    fn tag(nodes: Vec<StructureNode>, lines: &[usize], counter: &mut usize) -> Vec<Tagged> {
        nodes
            .into_iter()
            .map(|mut n| {
                let line = lines.get(*counter).copied().unwrap_or(*counter + 1);
                *counter += 1;
                let kids = tag(std::mem::take(&mut n.children), lines, counter);
                Tagged { node: n, line, kids }
            })
            .collect()
    }
    fn fix(
        list: Vec<Tagged>,
        parent: Option<(SpanRef, u8)>,
        diags: &mut Vec<Diagnostic>,
    ) -> Vec<StructureNode> {
        let mut queue: std::collections::VecDeque<Tagged> = list.into();
        let mut out: Vec<StructureNode> = Vec::new();
        while let Some(mut t) = queue.pop_front() {
            let mut span = t.node.span;
            let mut keep = true;
            if let Some((pspan, plevel)) = parent {
                if t.node.level <= plevel {
                    let new_level = plevel.saturating_add(1);
                    diags.push(Diagnostic::new(
                        Severity::Warning,
                        DiagCode::LevelJump,
                        t.line,
                        format!("raised level {} to {new_level} below parent level {plevel}", t.node.level),
                    ));
                    t.node.level = new_level;
                }
                if !pspan.contains(&span) {
                    let cut = SpanRef::new(span.start.max(pspan.start), span.end.min(pspan.end));
                    if cut.start > cut.end {
                        keep = false;
                        diags.push(Diagnostic::new(
                            Severity::Warning,
                            DiagCode::NonNested,
                            t.line,
                            format!("dropped node: span {span} lies outside parent {pspan}"),
                        ));
                    } else {
                        diags.push(Diagnostic::new(
                            Severity::Warning,
                            DiagCode::NonNested,
                            t.line,
                            format!("cut span {span} to parent {pspan} as {cut}"),
                        ));
                        span = cut;
                    }
                }
            }
            if keep {
                if let Some(prev) = out.last() {
                    if span.start <= prev.span.end {
                        let trimmed = SpanRef::new(prev.span.end + 1, span.end);
                        if trimmed.start > trimmed.end {
                            keep = false;
                            diags.push(Diagnostic::new(
                                Severity::Warning,
                                DiagCode::Overlap,
                                t.line,
                                format!("dropped node: span {span} is covered by previous sibling {}", prev.span),
                            ));
                        } else {
                            diags.push(Diagnostic::new(
                                Severity::Warning,
                                DiagCode::Overlap,
                                t.line,
                                format!("trimmed span {span} to {trimmed} after previous sibling {}", prev.span),
                            ));
                            span = trimmed;
                        }
                    }
                }
            }
            if keep {
                t.node.span = span;
                let kids = fix(t.kids, Some((span, t.node.level)), diags);
                t.node.children = kids;
                out.push(t.node);
            } else {
                for (k, kid) in t.kids.into_iter().enumerate() {
                    queue.insert(k, kid);
                }
            }
        }
        out
    }
    let mut counter = 0;
    let tagged = tag(std::mem::take(&mut tree.roots), lines, &mut counter);
    tree.roots = fix(tagged, None, diags);
}

/// Canonical augmented markdown: one heading per line in pre-order.
pub fn serialize(tree: &StructureTree) -> String {
    let mut lines = Vec::with_capacity(tree.node_count());
    for visit in tree.preorder() {
        let n = visit.node;
        let hashes = "#".repeat(n.level as usize);
        let title = n.title.split_whitespace().collect::<Vec<_>>().join(" ");
        if title.is_empty() {
            lines.push(format!("{hashes} {}", n.span));
        } else {
            lines.push(format!("{hashes} {} {title}", n.span));
        }
    }
    lines.join("\n")
}

/// Every bound, nesting, level and sibling-order violation in `tree`.
///
/// Diagnostics are located by the node's line in canonical serialization.
pub fn validate(tree: &StructureTree, n_edus: usize) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for visit in tree.preorder() {
        if let Some(d) = bound_error(visit.node.span, n_edus, visit.index + 1) {
            out.push(d);
        }
    }
    let lines: Vec<usize> = (1..=tree.node_count()).collect();
    out.extend(structural_errors(tree, &lines));
    out.sort_by_key(|d| d.line);
    out
}

/// Roots and their immediate children; deeper descendants are removed.
pub fn backbone(tree: &StructureTree) -> StructureTree {
    let roots = tree
        .roots
        .iter()
        .map(|r| StructureNode {
            title: r.title.clone(),
            level: r.level,
            span: r.span,
            children: r
                .children
                .iter()
                .map(|c| StructureNode::new(c.level, c.span, c.title.clone()))
                .collect(),
        })
        .collect();
    StructureTree {
        doc_id: tree.doc_id.clone(),
        n_edus: tree.n_edus,
        roots,
    }
}
