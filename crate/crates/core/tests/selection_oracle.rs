use edutree_core::length::LengthUnit;
use edutree_core::rank::{select_budget, OverflowPolicy, ScoredNode, SelectionBudget};
use edutree_core::segment::{segment, EduSequence, FormatHint, SegmentationRules, SourceDocument};
use edutree_core::tree::SpanRef;
use edutree_oracles::greedy_by_union;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// One EDU per line, each `len` tokens long.
fn sequence(lengths: &[usize]) -> EduSequence {
    let text: String = lengths
        .iter()
        .map(|&k| format!("{}\n\n", vec!["w"; k].join(" ")))
        .collect();
    let seq = segment(&SourceDocument::new("d", text).with_format(FormatHint::Plain), &SegmentationRules::default());
    assert_eq!(seq.len(), lengths.len());
    seq
}

fn node(i: usize, span: SpanRef) -> ScoredNode {
    ScoredNode {
        index: i,
        title: format!("n{i}"),
        level: 1,
        span,
        score: 0.0,
        candidate_text: String::new(),
    }
}

fn random_instance(rng: &mut StdRng) -> (Vec<usize>, Vec<ScoredNode>) {
    let n_units = rng.gen_range(1..=15);
    let lengths: Vec<usize> = (0..n_units).map(|_| rng.gen_range(1..=12)).collect();
    let nodes = (0..rng.gen_range(1..=12))
        .map(|i| {
            let a = rng.gen_range(1..=n_units);
            let b = rng.gen_range(a..=n_units);
            node(i, SpanRef::new(a, b))
        })
        .collect();
    (lengths, nodes)
}

fn covered_length(chosen: &[ScoredNode], lengths: &[usize]) -> usize {
    let mut ids: Vec<usize> = chosen.iter().flat_map(|n| n.span.ids()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.iter().map(|&i| lengths[i - 1]).sum()
}

#[test]
fn agrees_with_union_reference() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let (lengths, nodes) = random_instance(&mut rng);
        let seq = sequence(&lengths);
        let b_max = rng.gen_range(0..=lengths.iter().sum::<usize>() + 5);
        for (policy, stop) in [(OverflowPolicy::Skip, false), (OverflowPolicy::Stop, true)] {
            let budget = SelectionBudget::new(b_max, LengthUnit::WhitespaceTokens);
            let got: Vec<usize> = select_budget(&nodes, &seq, &budget, policy).iter().map(|n| n.index).collect();
            let spans: Vec<SpanRef> = nodes.iter().map(|n| n.span).collect();
            assert_eq!(got, greedy_by_union(&spans, &lengths, b_max, stop));
            let chosen = select_budget(&nodes, &seq, &budget, policy);
            assert!(covered_length(&chosen, &lengths) <= b_max);
        }
    }
}

#[test]
fn stop_policy_is_monotone_in_budget() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..200 {
        let (lengths, nodes) = random_instance(&mut rng);
        let seq = sequence(&lengths);
        let total: usize = lengths.iter().sum();
        let mut previous: Vec<usize> = Vec::new();
        for b_max in 0..=total {
            let budget = SelectionBudget::new(b_max, LengthUnit::WhitespaceTokens);
            let ids: Vec<usize> = select_budget(&nodes, &seq, &budget, OverflowPolicy::Stop).iter().map(|n| n.index).collect();
            assert!(previous.iter().all(|i| ids.contains(i)));
            previous = ids;
        }
    }
}

#[test]
fn skip_policy_is_not_monotone() {
    let lengths = [60, 50, 40];
    let seq = sequence(&lengths);
    let nodes: Vec<_> = (0..3).map(|i| node(i, SpanRef::new(i + 1, i + 1))).collect();
    let pick = |b| -> Vec<usize> {
        select_budget(&nodes, &seq, &SelectionBudget::new(b, LengthUnit::WhitespaceTokens), OverflowPolicy::Skip)
            .iter()
            .map(|n| n.index)
            .collect()
    };
    assert_eq!(pick(100), vec![0, 2]);
    assert_eq!(pick(110), vec![0, 1]);
}

#[test]
fn covered_length_grows_with_budget_under_both_policies() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let (lengths, nodes) = random_instance(&mut rng);
        let seq = sequence(&lengths);
        let total: usize = lengths.iter().sum();
        for policy in [OverflowPolicy::Skip, OverflowPolicy::Stop] {
            let mut previous = 0;
            for b_max in 0..=total {
                let budget = SelectionBudget::new(b_max, LengthUnit::WhitespaceTokens);
                let covered = covered_length(&select_budget(&nodes, &seq, &budget, policy), &lengths);
                assert!(covered >= previous, "{policy:?} at budget {b_max}: {covered} < {previous}");
                previous = covered;
            }
        }
    }
}
