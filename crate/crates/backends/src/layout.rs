//! Deterministic decomposition from markdown heading structure.

use edutree_core::decompose::{BoxError, Decomposer, Decomposition};
use edutree_core::segment::{EduKind, EduSequence, SourceDocument};
use edutree_core::tree::{realize_tree, FlatHeading, SpanRef, StructureTree};

/// Heading text without its `#` markers or an ATX closing sequence.
fn heading_title(text: &str) -> String {
    let body = text.trim().trim_start_matches('#');
    let trimmed = body.trim_end();
    let without_closing = trimmed.trim_end_matches('#');
    let title = if without_closing.len() < trimmed.len()
        && (without_closing.is_empty() || without_closing.ends_with([' ', '\t']))
    {
        without_closing
    } else {
        trimmed
    };
    title.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One node per heading unit; a heading's span runs to the unit before the
/// next heading of equal or shallower level, or to the last unit.
pub fn layout_extract(doc: &SourceDocument, seq: &EduSequence) -> StructureTree {
    let n = seq.len();
    let headings: Vec<(usize, u8, String)> = seq
        .units
        .iter()
        .filter_map(|u| match u.kind {
            EduKind::Heading(level) => Some((u.id, level, heading_title(&u.text))),
            _ => None,
        })
        .collect();
    let flat: Vec<FlatHeading> = headings
        .iter()
        .enumerate()
        .map(|(i, (id, level, title))| {
            let end = headings[i + 1..]
                .iter()
                .find(|(_, l, _)| l <= level)
                .map_or(n, |(next, _, _)| next - 1);
            FlatHeading {
                level: *level,
                span: SpanRef::new(*id, end),
                title: title.clone(),
                line: i + 1,
            }
        })
        .collect();
    let (tree, _) = realize_tree(&flat, n);
    tree.with_doc_id(&doc.doc_id)
}

/// [`layout_extract`] as a [`Decomposer`]; feedback is ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct LayoutDecomposer;

impl Decomposer for LayoutDecomposer {
    fn decompose(&self, doc: &SourceDocument, seq: &EduSequence, _feedback: Option<&str>) -> Result<Decomposition, BoxError> {
        Ok(Decomposition::from_tree(layout_extract(doc, seq)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use edutree_core::segment::{segment, FormatHint, SegmentationRules};
    use edutree_core::tree::{serialize, validate, StructureNode};

    fn run(text: &str) -> (EduSequence, StructureTree) {
        let doc = SourceDocument::new("d", text);
        let seq = segment(&doc, &SegmentationRules::default());
        let tree = layout_extract(&doc, &seq);
        (seq, tree)
    }

    #[test]
    fn nested_headings() {
        let (seq, tree) = run("# A\npara1\n## B\npara2");
        assert_eq!(seq.len(), 4);
        let expected = vec![StructureNode::new(1, SpanRef::new(1, 4), "A")
            .with_children(vec![StructureNode::new(2, SpanRef::new(3, 4), "B")])];
        assert_eq!(tree.roots, expected);
        assert_eq!(tree.doc_id, "d");
    }

    #[test]
    fn no_headings_and_lone_heading() {
        assert!(run("just prose. more prose.").1.is_empty());
        let (_, tree) = run("# Only");
        assert_eq!(tree.roots, vec![StructureNode::new(1, SpanRef::new(1, 1), "Only")]);
    }

    #[test]
    fn plain_documents_have_no_structure() {
        let doc = SourceDocument::new("d", "# A\ntext").with_format(FormatHint::Plain);
        let seq = segment(&doc, &SegmentationRules::default());
        assert!(layout_extract(&doc, &seq).is_empty());
    }

    #[test]
    fn siblings_skipped_levels_and_closing_hashes() {
        let (seq, tree) = run("# A ##\nx.\n### Deep\ny.\n# B\nz.\n## C #\nw.");
        assert!(validate(&tree, seq.len()).is_empty());
        assert_eq!(
            serialize(&tree),
            "# [1--4] A\n### [3--4] Deep\n# [5--8] B\n## [7--8] C"
        );
    }

    #[test]
    fn titles() {
        assert_eq!(heading_title("## Intro ##"), "Intro");
        assert_eq!(heading_title("# C#"), "C#");
        assert_eq!(heading_title("#"), "");
        assert_eq!(heading_title("###   spaced   out  "), "spaced out");
    }
}
