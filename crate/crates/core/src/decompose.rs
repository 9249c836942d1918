//! Seams for pluggable decomposers, scorers and generators.
//!
//! The pipeline in [`crate::rank`] only talks to these traits, so local and
//! remote implementations are interchangeable.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::segment::{EduSequence, SourceDocument};
use crate::tree::{Diagnostic, StructureTree};

pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub const fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage::new(
            self.prompt_tokens + rhs.prompt_tokens,
            self.completion_tokens + rhs.completion_tokens,
        )
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> TokenUsage {
        iter.fold(TokenUsage::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition {
    pub tree: StructureTree,
    pub diagnostics: Vec<Diagnostic>,
    pub usage: TokenUsage,
}

impl Decomposition {
    pub fn from_tree(tree: StructureTree) -> Self {
        Self {
            tree,
            ..Default::default()
        }
    }
}

/// Produces a structure tree over an already segmented document.
///
/// `feedback` carries audit findings from a previous rejected attempt; a
/// decomposer is free to ignore it.
pub trait Decomposer: Send + Sync {
    fn decompose(
        &self,
        doc: &SourceDocument,
        seq: &EduSequence,
        feedback: Option<&str>,
    ) -> Result<Decomposition, BoxError>;
}

/// Scores candidate texts against a query; one score per candidate, in order.
pub trait Scorer: Send + Sync {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError>;
}

/// Free-text completion, e.g. a chat model answering over selected context.
pub trait Generator: Send + Sync {
    fn generate(&self, system: Option<&str>, prompt: &str) -> Result<(String, TokenUsage), BoxError>;
}

impl<T: Decomposer + ?Sized> Decomposer for &T {
    fn decompose(
        &self,
        doc: &SourceDocument,
        seq: &EduSequence,
        feedback: Option<&str>,
    ) -> Result<Decomposition, BoxError> {
        (**self).decompose(doc, seq, feedback)
    }
}

impl<T: Scorer + ?Sized> Scorer for &T {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError> {
        (**self).score(query, candidates)
    }
}
