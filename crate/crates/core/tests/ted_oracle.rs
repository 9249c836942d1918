use edutree_core::metrics::{ted, EditCosts};
use edutree_oracles::{all_trees, random_labeled_tree, ted_by_mappings};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn matches_oracle_exhaustively_up_to_three_nodes() {
    let c = EditCosts::default();
    let trees: Vec<_> = (1..=3).flat_map(|n| all_trees(n, &["a", "b"])).collect();
    for a in &trees {
        for b in &trees {
            assert_eq!(ted(a, b, &c), ted_by_mappings(a, b, &c), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn matches_oracle_on_random_pairs() {
    let mut rng = StdRng::seed_from_u64(7);
    let c = EditCosts::default();
    for _ in 0..200 {
        let a = { let k = rng.gen_range(1..=6); random_labeled_tree(&mut rng, k, &["a", "b", "c"]) };
        let b = { let k = rng.gen_range(1..=6); random_labeled_tree(&mut rng, k, &["a", "b", "c"]) };
        assert_eq!(ted(&a, &b, &c), ted_by_mappings(&a, &b, &c), "{a:?} vs {b:?}");
    }
}

#[test]
fn matches_oracle_with_uneven_costs() {
    let mut rng = StdRng::seed_from_u64(11);
    let c = EditCosts { insert: 2.0, delete: 3.0, relabel: 4.0 };
    for _ in 0..100 {
        let a = { let k = rng.gen_range(1..=5); random_labeled_tree(&mut rng, k, &["a", "b"]) };
        let b = { let k = rng.gen_range(1..=5); random_labeled_tree(&mut rng, k, &["a", "b"]) };
        assert_eq!(ted(&a, &b, &c), ted_by_mappings(&a, &b, &c));
    }
}
