//! Ordered labeled trees and their edit distance.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::tree::{StructureNode, StructureTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTree {
    pub label: String,
    #[serde(default)]
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }
}

/// Label used for the synthetic root placed over a structure tree's roots.
pub const SYNTHETIC_ROOT: &str = "<root>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Normalization {
    /// Compare normalized titles; when false every label is empty and only
    /// topology counts.
    pub compare_titles: bool,
    pub strip_enumeration: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            compare_titles: true,
            strip_enumeration: true,
        }
    }
}

static ENUMERATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)^(?:
            第[0-9一二三四五六七八九十百千零〇两]+[章节部分篇条]
          | [0-9]+(?:\.[0-9]+)*[.)、:]?
          | \(?[a-z]\)
          | \(?[ivxlc]+[.)]
          | [一二三四五六七八九十百]+[、.]
          | (?:chapter|section|part)\s+[0-9ivxlc]+[.:]?
        )\s*",
    )
    .unwrap()
});

/// Lowercases, strips a leading enumeration token such as `1.`, `2.3`, `(a)`
/// or `第三章`, and collapses whitespace.
pub fn normalize_title(title: &str) -> String {
    normalize_with(title, true)
}

fn normalize_with(title: &str, strip_enumeration: bool) -> String {
    let collapsed = title.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if !strip_enumeration {
        return collapsed;
    }
    match ENUMERATION.find(&collapsed) {
        // Only strip when the token is followed by a separator or the title
        // ends, so that e.g. "3d printing" keeps its digit.
        Some(m) if m.end() == collapsed.len() || m.as_str().ends_with(|c: char| !c.is_alphanumeric()) => {
            collapsed[m.end()..].trim().to_string()
        }
        _ => collapsed,
    }
}

/// Labeled view of a structure tree under a synthetic root; spans are dropped.
pub fn to_labeled_tree(tree: &StructureTree, norm: &Normalization) -> LabeledTree {
    fn convert(node: &StructureNode, norm: &Normalization) -> LabeledTree {
        let label = if norm.compare_titles {
            normalize_with(&node.title, norm.strip_enumeration)
        } else {
            String::new()
        };
        LabeledTree {
            label,
            children: node.children.iter().map(|c| convert(c, norm)).collect(),
        }
    }
    LabeledTree {
        label: SYNTHETIC_ROOT.to_string(),
        children: tree.roots.iter().map(|r| convert(r, norm)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditCosts {
    pub insert: f64,
    pub delete: f64,
    pub relabel: f64,
}

impl Default for EditCosts {
    fn default() -> Self {
        Self {
            insert: 1.0,
            delete: 1.0,
            relabel: 1.0,
        }
    }
}

/// Post-order arrays for the keyroot dynamic program.
struct Indexed<'a> {
    labels: Vec<&'a str>,
    /// Post-order index of the leftmost leaf descendant of each node.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(root: &'a LabeledTree) -> Self {
        fn walk<'a>(node: &'a LabeledTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for child in &node.children {
                let l = walk(child, labels, leftmost);
                first_leaf.get_or_insert(l);
            }
            let me = labels.len();
            labels.push(&node.label);
            let l = first_leaf.unwrap_or(me);
            leftmost.push(l);
            l
        }
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        walk(root, &mut labels, &mut leftmost);

        // A keyroot is the highest node with a given leftmost leaf.
        let n = labels.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[leftmost[i]] {
                seen[leftmost[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.sort_unstable();
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Exact ordered tree edit distance (keyroot/forest dynamic program).
///
/// Relabeling costs nothing when labels are equal. Runs in
/// O(|a|·|b|·min(depth, leaves)²) time and O(|a|·|b|) space.
pub fn ted(a: &LabeledTree, b: &LabeledTree, costs: &EditCosts) -> f64 {
    let ta = Indexed::new(a);
    let tb = Indexed::new(b);
    let (na, nb) = (ta.labels.len(), tb.labels.len());
    let mut treedist = vec![vec![0.0f64; nb]; na];
    let mut forest = vec![vec![0.0f64; nb + 1]; na + 1];

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let li = ta.leftmost[i];
            let lj = tb.leftmost[j];
            // forest[x][y]: distance between forests l(i)..x-1 and l(j)..y-1,
            // indices shifted by one so that 0 is the empty forest.
            let rows = i - li + 2;
            let cols = j - lj + 2;
            forest[0][0] = 0.0;
            for x in 1..rows {
                forest[x][0] = forest[x - 1][0] + costs.delete;
            }
            for y in 1..cols {
                forest[0][y] = forest[0][y - 1] + costs.insert;
            }
            for x in 1..rows {
                let ni = li + x - 1;
                for y in 1..cols {
                    let nj = lj + y - 1;
                    let del = forest[x - 1][y] + costs.delete;
                    let ins = forest[x][y - 1] + costs.insert;
                    if ta.leftmost[ni] == li && tb.leftmost[nj] == lj {
                        let rel = if ta.labels[ni] == tb.labels[nj] { 0.0 } else { costs.relabel };
                        let v = del.min(ins).min(forest[x - 1][y - 1] + rel);
                        forest[x][y] = v;
                        treedist[ni][nj] = v;
                    } else {
                        let px = ta.leftmost[ni] - li;
                        let py = tb.leftmost[nj] - lj;
                        forest[x][y] = del.min(ins).min(forest[px][py] + treedist[ni][nj]);
                    }
                }
            }
        }
    }
    treedist[na - 1][nb - 1]
}
