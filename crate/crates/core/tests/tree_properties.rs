use edutree_core::tree::{parse_augmented_markdown, serialize, validate, ParseMode};
use edutree_oracles::random_valid_tree;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>(), n in 0usize..60) {
        let mut rng = StdRng::seed_from_u64(seed);
        let tree = random_valid_tree(&mut rng, n);
        prop_assert!(validate(&tree, n).is_empty());
        let text = serialize(&tree);
        let (parsed, diags) = parse_augmented_markdown(&text, n, ParseMode::Strict).unwrap();
        prop_assert!(diags.is_empty(), "{:?}", diags);
        prop_assert_eq!(parsed, tree);
    }

    #[test]
    fn lenient_output_always_validates(text in "[#\\[\\]0-9 \\-–—a-z\\n]{0,120}", n in 0usize..20) {
        if let Ok((tree, _)) = parse_augmented_markdown(&text, n, ParseMode::Lenient) {
            let errors: Vec<_> = validate(&tree, n).into_iter().filter(|d| d.is_error()).collect();
            prop_assert!(errors.is_empty(), "{:?}", errors);
        }
        let _ = parse_augmented_markdown(&text, n, ParseMode::Strict);
    }

    #[test]
    fn lenient_repairs_heading_soup(lines in prop::collection::vec((1u8..=6, 0usize..30, 0usize..30), 0..15), n in 0usize..25) {
        let text: String = lines
            .iter()
            .map(|(lvl, a, b)| format!("{} [{a}--{b}] t{a}\n", "#".repeat(*lvl as usize)))
            .collect();
        let (tree, _) = parse_augmented_markdown(&text, n, ParseMode::Lenient).unwrap();
        prop_assert!(validate(&tree, n).iter().all(|d| !d.is_error()), "{:?} {:?}", text, validate(&tree, n));
    }
}
