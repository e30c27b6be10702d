use serde::{Deserialize, Serialize};

use super::{EmbeddingBackend, EmbeddingVector};
use crate::error::{Error, Result};

/// How a free-form response is mapped onto the category list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Highest cosine similarity between sentence embeddings.
    Embedding,
    /// Offline fallback: category tokens appearing contiguously in the
    /// response win (longest first); otherwise highest Jaccard overlap.
    #[default]
    TokenOverlap,
}

/// Lowercase alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Index of the first maximum.
fn first_argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Category list prepared for repeated matching; category embeddings are
/// computed once.
pub struct CategoryMatcher<'a> {
    matcher: Matcher,
    tokens: Vec<Vec<String>>,
    vectors: Vec<EmbeddingVector>,
    embedder: Option<&'a dyn EmbeddingBackend>,
}

impl<'a> CategoryMatcher<'a> {
    pub fn new(
        categories: &[String],
        matcher: Matcher,
        embedder: Option<&'a dyn EmbeddingBackend>,
    ) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::EmptyInput("category list".into()));
        }
        let mut vectors = Vec::new();
        if matcher == Matcher::Embedding {
            let e = embedder
                .ok_or_else(|| Error::InvalidConfig("embedding matcher needs an embedder".into()))?;
            vectors = e.embed(categories)?;
            if vectors.len() != categories.len() {
                return Err(Error::Decode("embedder returned the wrong number of vectors".into()));
            }
        }
        Ok(CategoryMatcher {
            matcher,
            tokens: categories.iter().map(|c| tokenize(c)).collect(),
            vectors,
            embedder,
        })
    }

    pub fn best(&self, response: &str) -> Result<usize> {
        match self.matcher {
            Matcher::TokenOverlap => Ok(self.by_tokens(response)),
            Matcher::Embedding => {
                let e = self.embedder.expect("checked in new");
                let v = e
                    .embed(&[response.to_string()])?
                    .pop()
                    .ok_or_else(|| Error::Decode("embedder returned no vector".into()))?;
                Ok(first_argmax(self.vectors.iter().map(|c| cosine_similarity(&v, c))))
            }
        }
    }

    fn by_tokens(&self, response: &str) -> usize {
        let resp = tokenize(response);
        let contained = self
            .tokens
            .iter()
            .map(|c| if contains_run(&resp, c) { c.len() as f64 } else { 0.0 });
        let contained: Vec<f64> = contained.collect();
        if contained.iter().any(|&n| n > 0.0) {
            return first_argmax(contained);
        }
        first_argmax(self.tokens.iter().map(|c| jaccard(&resp, c)))
    }
}

/// Index of the category that best matches `response`; ties go to the
/// smallest index.
pub fn match_category(
    response: &str,
    categories: &[String],
    matcher: Matcher,
    embedder: Option<&dyn EmbeddingBackend>,
) -> Result<usize> {
    CategoryMatcher::new(categories, matcher, embedder)?.best(response)
}
