//! Slow, obviously-correct reference implementations and random instance
//! generators shared by the test suites.

use std::collections::BTreeSet;

use edutree_core::metrics::{EditCosts, LabeledTree};
use edutree_core::tree::{SpanRef, StructureNode, StructureTree};
use rand::seq::SliceRandom;
use rand::Rng;

/// Pre-order flattened tree with the post-order rank of each node.
struct Ranked<'a> {
    labels: Vec<&'a str>,
    post: Vec<usize>,
}

impl<'a> Ranked<'a> {
    fn new(root: &'a LabeledTree) -> Self {
        fn walk<'a>(n: &'a LabeledTree, out: &mut Ranked<'a>, post_counter: &mut usize) {
            let me = out.labels.len();
            out.labels.push(&n.label);
            out.post.push(0);
            for c in &n.children {
                walk(c, out, post_counter);
            }
            out.post[me] = *post_counter;
            *post_counter += 1;
        }
        let mut r = Ranked {
            labels: Vec::new(),
            post: Vec::new(),
        };
        let mut counter = 0;
        walk(root, &mut r, &mut counter);
        r
    }
}

/// Tree edit distance as the cheapest valid mapping, found by enumeration.
///
/// A set of node pairs is a valid edit mapping exactly when it is one-to-one
/// and preserves both pre-order and post-order between the two trees; its
/// cost is the relabels on mapped pairs plus every unmapped node deleted from
/// `a` or inserted into `b`. Exponential; meant for trees of a handful of nodes.
pub fn ted_by_mappings(a: &LabeledTree, b: &LabeledTree, costs: &EditCosts) -> f64 {
    let ra = Ranked::new(a);
    let rb = Ranked::new(b);
    let mut best = f64::INFINITY;
    let mut pairs = Vec::new();
    search(&ra, &rb, costs, 0, 0, &mut pairs, &mut best);
    best
}

fn search(
    ra: &Ranked<'_>,
    rb: &Ranked<'_>,
    costs: &EditCosts,
    i: usize,
    next_j: usize,
    pairs: &mut Vec<(usize, usize)>,
    best: &mut f64,
) {
    if i == ra.labels.len() {
        let m = pairs.len();
        let relabel: f64 = pairs
            .iter()
            .map(|&(x, y)| if ra.labels[x] == rb.labels[y] { 0.0 } else { costs.relabel })
            .sum();
        let total = relabel + costs.delete * (ra.labels.len() - m) as f64 + costs.insert * (rb.labels.len() - m) as f64;
        if total < *best {
            *best = total;
        }
        return;
    }
    search(ra, rb, costs, i + 1, next_j, pairs, best);
    // Nodes are visited in pre-order, so mapped targets must increase in
    // pre-order too; post-order is checked against every earlier pair.
    for j in next_j..rb.labels.len() {
        let consistent = pairs
            .iter()
            .all(|&(x, y)| (ra.post[x] < ra.post[i]) == (rb.post[y] < rb.post[j]));
        if consistent {
            pairs.push((i, j));
            search(ra, rb, costs, i + 1, j + 1, pairs, best);
            pairs.pop();
        }
    }
}

/// Every ordered tree with exactly `n` nodes whose labels come from `alphabet`.
pub fn all_trees(n: usize, alphabet: &[&str]) -> Vec<LabeledTree> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for forest in all_forests(n - 1, alphabet) {
        for label in alphabet {
            out.push(LabeledTree::node(*label, forest.clone()));
        }
    }
    out
}

fn all_forests(n: usize, alphabet: &[&str]) -> Vec<Vec<LabeledTree>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for head in all_trees(first, alphabet) {
            for tail in all_forests(n - first, alphabet) {
                let mut f = Vec::with_capacity(tail.len() + 1);
                f.push(head.clone());
                f.extend(tail);
                out.push(f);
            }
        }
    }
    out
}

/// Random ordered tree with exactly `n ≥ 1` nodes: each new node is inserted
/// at a random child position of a random existing node.
pub fn random_labeled_tree<R: Rng>(rng: &mut R, n: usize, alphabet: &[&str]) -> LabeledTree {
    assert!(n >= 1 && !alphabet.is_empty());
    let mut labels = vec![*alphabet.choose(rng).unwrap()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    for id in 1..n {
        let parent = rng.gen_range(0..id);
        let pos = rng.gen_range(0..=children[parent].len());
        children[parent].insert(pos, id);
        children.push(Vec::new());
        labels.push(*alphabet.choose(rng).unwrap());
    }
    fn build(id: usize, labels: &[&str], children: &[Vec<usize>]) -> LabeledTree {
        LabeledTree::node(labels[id], children[id].iter().map(|&c| build(c, labels, children)).collect())
    }
    build(0, &labels, &children)
}

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "Intro", "Method", "Results", "2.1", "(a)", "数据", "结构", "x", "Über", "end",
];

/// Non-empty title of single-spaced words.
pub fn random_title<R: Rng>(rng: &mut R) -> String {
    let k = rng.gen_range(1..=4);
    (0..k).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Random tree satisfying every structural rule over `n_edus` units: spans in
/// bounds, children nested in their parent, siblings disjoint and ordered,
/// children exactly one level below their parent.
pub fn random_valid_tree<R: Rng>(rng: &mut R, n_edus: usize) -> StructureTree {
    let root_level = rng.gen_range(1..=3u8);
    let roots = if n_edus == 0 {
        Vec::new()
    } else {
        random_siblings(rng, SpanRef::new(1, n_edus), root_level, 4)
    };
    StructureTree::new(n_edus, roots)
}

fn random_siblings<R: Rng>(rng: &mut R, within: SpanRef, level: u8, max_count: usize) -> Vec<StructureNode> {
    if level > 6 {
        return Vec::new();
    }
    let count = rng.gen_range(0..=max_count.min(within.width()));
    // Pick 2*count cut points and pair them into disjoint ordered spans.
    let mut cuts: Vec<usize> = (0..count * 2).map(|_| rng.gen_range(within.start..=within.end)).collect();
    cuts.sort_unstable();
    let mut out: Vec<StructureNode> = Vec::new();
    for pair in cuts.chunks(2) {
        let start = match out.last() {
            Some(prev) => pair[0].max(prev.span.end + 1),
            None => pair[0],
        };
        let end = pair[1].max(start);
        if end > within.end {
            break;
        }
        let span = SpanRef::new(start, end);
        let children = if rng.gen_bool(0.5) {
            random_siblings(rng, span, level + 1, 3)
        } else {
            Vec::new()
        };
        out.push(StructureNode::new(level, span, random_title(rng)).with_children(children));
    }
    out
}

/// Reference greedy selection: accept a candidate iff the length of the union
/// of all accepted spans plus this one, recomputed from scratch, stays within
/// `b_max`. Returns indices into `spans`.
pub fn greedy_by_union(spans: &[SpanRef], unit_lengths: &[usize], b_max: usize, stop_on_overflow: bool) -> Vec<usize> {
    let union_len = |ids: &BTreeSet<usize>| ids.iter().map(|&id| unit_lengths[id - 1]).sum::<usize>();
    let mut accepted_ids = BTreeSet::new();
    let mut picked = Vec::new();
    for (i, s) in spans.iter().enumerate() {
        if s.start < 1 || s.start > s.end || s.end > unit_lengths.len() {
            continue;
        }
        let mut trial = accepted_ids.clone();
        trial.extend(s.start..=s.end);
        if union_len(&trial) <= b_max {
            accepted_ids = trial;
            picked.push(i);
        } else if stop_on_overflow {
            break;
        }
    }
    picked
}

/// Random text mixing headings, lists, prose and CJK sentences.
pub fn random_document<R: Rng>(rng: &mut R, paragraphs: usize) -> String {
    let mut out = String::new();
    for p in 0..paragraphs {
        match rng.gen_range(0..5) {
            0 => {
                let level = rng.gen_range(1..=3);
                out.push_str(&"#".repeat(level));
                out.push(' ');
                out.push_str(&random_title(rng));
                out.push('\n');
            }
            1 => {
                for _ in 0..rng.gen_range(1..=3) {
                    out.push_str("- ");
                    out.push_str(&random_sentence(rng));
                    out.push('\n');
                }
            }
            2 => {
                for _ in 0..rng.gen_range(1..=3) {
                    out.push_str("这是一个测试句子");
                    out.push_str(["。", "！", "？"].choose(rng).unwrap());
                }
                out.push('\n');
            }
            _ => {
                let k = rng.gen_range(1..=4);
                let s: Vec<String> = (0..k).map(|_| random_sentence(rng)).collect();
                out.push_str(&s.join(" "));
                out.push('\n');
            }
        }
        if p + 1 < paragraphs {
            out.push('\n');
        }
    }
    out
}

fn random_sentence<R: Rng>(rng: &mut R) -> String {
    let k = rng.gen_range(2..=9);
    let words: Vec<&str> = (0..k)
        .map(|_| *["the", "model", "reads", "a", "long", "document", "and", "builds", "trees", "quickly"].choose(rng).unwrap())
        .collect();
    let mut s = words.join(" ");
    s.push_str([".", "!", "?"].choose(rng).unwrap());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn counts_of_ordered_trees() {
        // Catalan numbers C(n-1) times |alphabet|^n.
        assert_eq!(all_trees(1, &["a"]).len(), 1);
        assert_eq!(all_trees(3, &["a"]).len(), 2);
        assert_eq!(all_trees(4, &["a"]).len(), 5);
        assert_eq!(all_trees(3, &["a", "b"]).len(), 16);
    }

    #[test]
    fn oracle_small_cases() {
        let c = EditCosts::default();
        let l = LabeledTree::leaf;
        assert_eq!(ted_by_mappings(&l("a"), &l("a"), &c), 0.0);
        assert_eq!(ted_by_mappings(&l("a"), &l("b"), &c), 1.0);
        let a = LabeledTree::node("f", vec![LabeledTree::node("d", vec![l("a"), LabeledTree::node("c", vec![l("b")])]), l("e")]);
        let b = LabeledTree::node("f", vec![LabeledTree::node("c", vec![LabeledTree::node("d", vec![l("a"), l("b")])]), l("e")]);
        assert_eq!(ted_by_mappings(&a, &b, &c), 2.0);
    }

    #[test]
    fn generated_tree_sizes() {
        let mut rng = StdRng::seed_from_u64(1);
        for n in 1..8 {
            assert_eq!(random_labeled_tree(&mut rng, n, &["a", "b"]).size(), n);
        }
    }

    #[test]
    fn greedy_reference_counts_overlap_once() {
        let lens = [10, 10, 10];
        let spans = [SpanRef::new(1, 2), SpanRef::new(2, 3), SpanRef::new(3, 3)];
        assert_eq!(greedy_by_union(&spans, &lens, 30, false), vec![0, 1, 2]);
        assert_eq!(greedy_by_union(&spans, &lens, 20, false), vec![0]);
    }
}
