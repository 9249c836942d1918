//! Okapi BM25 over a candidate set that doubles as its own corpus.

use std::collections::{HashMap, HashSet};

use crate::decompose::{BoxError, Scorer};
use crate::length::is_cjk;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercased alphanumeric runs; each CJK character is its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// BM25 with `k1 = 1.2`, `b = 0.75`.
pub fn bm25_score(query: &str, candidates: &[String]) -> Vec<f64> {
    bm25_score_with(query, candidates, DEFAULT_K1, DEFAULT_B)
}

/// Scores each candidate with the non-negative idf
/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, summing over distinct query terms.
pub fn bm25_score_with(query: &str, candidates: &[String], k1: f64, b: f64) -> Vec<f64> {
    let docs: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let mut terms: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for t in tokenize(query) {
        if seen.insert(t.clone()) {
            terms.push(t);
        }
    }
    if docs.is_empty() || terms.is_empty() {
        return vec![0.0; docs.len()];
    }

    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let freqs: Vec<HashMap<&str, usize>> = docs
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in d {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();

    let idf: Vec<f64> = terms
        .iter()
        .map(|t| {
            let df = freqs.iter().filter(|f| f.contains_key(t.as_str())).count() as f64;
            (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
        })
        .collect();

    docs.iter()
        .zip(&freqs)
        .map(|(doc, f)| {
            let dl = doc.len() as f64;
            let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
            terms
                .iter()
                .zip(&idf)
                .map(|(t, idf)| {
                    let tf = f.get(t.as_str()).copied().unwrap_or(0) as f64;
                    if tf == 0.0 {
                        0.0
                    } else {
                        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
                    }
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Bm25Scorer {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Scorer {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Scorer for Bm25Scorer {
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, BoxError> {
        Ok(bm25_score_with(query, candidates, self.k1, self.b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("Hello, World-42!"), vec!["hello", "world", "42"]);
        assert_eq!(tokenize("预算abc 表"), vec!["预", "算", "abc", "表"]);
    }

    #[test]
    fn absent_term_scores_zero() {
        assert_eq!(bm25_score("zebra", &s(&["a cat", "a dog"])), vec![0.0, 0.0]);
        assert_eq!(bm25_score("", &s(&["a cat"])), vec![0.0]);
        assert!(bm25_score("cat", &[]).is_empty());
    }

    #[test]
    fn single_candidate_by_hand() {
        // N = 1, df = 1: idf = ln(1 + 0.5 / 1.5) = ln(4/3).
        // dl = avgdl so the length norm is 1: tf part = 1 * 2.2 / (1 + 1.2) = 1.
        let got = bm25_score("budget", &s(&["the budget plan"]));
        let expected = (4.0f64 / 3.0).ln();
        assert!((got[0] - expected).abs() < 1e-12, "{got:?}");
        assert!((got[0] - 0.287_682_072_451_780_9).abs() < 1e-12);
    }

    #[test]
    fn two_candidates_by_hand() {
        // docs: [budget, budget, plan] (dl 3), [other] (dl 1); avgdl = 2.
        // idf(budget) = ln(1 + 1.5 / 1.5) = ln 2.
        // doc 1: tf = 2, K = 1.2 * (0.25 + 0.75 * 1.5) = 1.65 -> 2 * 2.2 / 3.65.
        let got = bm25_score("budget", &s(&["budget budget plan", "other"]));
        let expected = 2.0f64.ln() * 4.4 / 3.65;
        assert!((got[0] - expected).abs() < 1e-12);
        assert_eq!(got[1], 0.0);
    }

    #[test]
    fn duplicates_score_equal() {
        let got = bm25_score("cat", &s(&["the cat sat", "the cat sat", "a dog"]));
        assert_eq!(got[0], got[1]);
        assert!(got[0] > got[2]);
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let c = s(&["cat dog", "dog"]);
        assert_eq!(bm25_score("cat cat", &c), bm25_score("cat", &c));
    }
}
