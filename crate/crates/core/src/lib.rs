//! Structure-then-select context compression.
//!
//! Documents are segmented into elementary discourse units (EDUs) with stable
//! 1-based ids. A decomposer proposes a tree of titled nodes whose spans are
//! closed id intervals over those units; nodes are scored against a query,
//! selected greedily under a length budget (or top-k), and the chosen spans
//! are emitted verbatim in source order.
//!
//! ```
//! use edutree_core::segment::{segment, SegmentationRules, SourceDocument};
//! use edutree_core::tree::{parse_augmented_markdown, ParseMode};
//!
//! let doc = SourceDocument::new("doc", "# Intro\n\nFirst point. Second point.");
//! let seq = segment(&doc, &SegmentationRules::default());
//! assert_eq!(seq.len(), 3);
//!
//! let (tree, diags) = parse_augmented_markdown("# [1--3] Intro", seq.len(), ParseMode::Strict).unwrap();
//! assert!(diags.is_empty());
//! assert_eq!(seq.retrieve(tree.roots[0].span).unwrap(), "# Intro\nFirst point.\nSecond point.");
//! ```

pub mod decompose;
pub mod length;
pub mod metrics;
pub mod prompts;
pub mod rank;
pub mod segment;
pub mod tree;

pub use decompose::{BoxError, Decomposer, Decomposition, Generator, Scorer, TokenUsage};
pub use length::LengthUnit;
pub use segment::{segment, EduSequence, SegmentationRules, SourceDocument};
pub use tree::{parse_augmented_markdown, serialize, validate, ParseMode, SpanRef, StructureNode, StructureTree};
