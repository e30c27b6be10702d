//! Deterministic stand-ins for the chat model and the embedder.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::matching::tokenize;
use super::{ChatBackend, ChatRequest, ChatResponse, EmbeddingBackend, EmbeddingVector};
use crate::error::{Error, Result};
use crate::eval::summary_responses;
use crate::manifest::derive_seed;

/// Chat mock that answers from a `request_id -> text` table.
///
/// Lookups fall back to ever shorter `/`-separated prefixes of the id, so an
/// entry for `sample/region` also answers `sample/region/p3`. With
/// `echo_summaries` set, a summarization prompt is answered with the last
/// response in its list. `error_rate` fails a deterministic subset of ids.
#[derive(Clone, Debug, Default)]
pub struct AnswerKeyChat {
    answers: BTreeMap<String, String>,
    error_rate: f64,
    echo_summaries: bool,
    fallback: Option<String>,
}

impl AnswerKeyChat {
    pub fn new(answers: BTreeMap<String, String>) -> Self {
        AnswerKeyChat {
            answers,
            ..Default::default()
        }
    }

    /// Reads a JSON object mapping request ids to answers.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(AnswerKeyChat::new(serde_json::from_str(&text)?))
    }

    pub fn with_error_rate(mut self, rate: f64) -> Self {
        self.error_rate = rate.clamp(0.0, 1.0);
        self
    }

    pub fn with_echo_summaries(mut self, on: bool) -> Self {
        self.echo_summaries = on;
        self
    }

    /// Answer used when no key matches.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    fn lookup(&self, id: &str) -> Option<&String> {
        let mut key = id;
        loop {
            if let Some(v) = self.answers.get(key) {
                return Some(v);
            }
            key = &key[..key.rfind('/')?];
        }
    }

    fn fails(&self, id: &str) -> bool {
        if self.error_rate <= 0.0 {
            return false;
        }
        let u = derive_seed(0, &["mock-failure", id]) as f64 / u64::MAX as f64;
        u < self.error_rate
    }
}

impl ChatBackend for AnswerKeyChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        if self.fails(&req.request_id) {
            return Err(Error::BackendError {
                status: 503,
                message: "injected mock failure".into(),
            });
        }
        if self.echo_summaries {
            if let Some(list) = summary_responses(&req.prompt) {
                if let Some(last) = list.last() {
                    return Ok(ChatResponse {
                        request_id: req.request_id.clone(),
                        text: last.clone(),
                    });
                }
            }
        }
        let text = self
            .lookup(&req.request_id)
            .or(self.fallback.as_ref())
            .ok_or_else(|| Error::BackendError {
                status: 404,
                message: format!("no answer for {:?}", req.request_id),
            })?;
        Ok(ChatResponse {
            request_id: req.request_id.clone(),
            text: text.clone(),
        })
    }
}

/// Hashed bag-of-tokens embedder: each lowercase alphanumeric token adds a
/// signed unit to one of `dim` buckets, and the sum is L2-normalized.
#[derive(Clone, Copy, Debug)]
pub struct HashedBagEmbedder {
    pub dim: usize,
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        HashedBagEmbedder { dim: 1024 }
    }
}

impl HashedBagEmbedder {
    pub fn vector(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dim.max(1)];
        for token in tokenize(text) {
            let digest = Sha256::digest(token.as_bytes());
            let bucket = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) as usize % values.len();
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector { values }
    }
}

impl EmbeddingBackend for HashedBagEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("embed() needs at least one text".into()));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::cosine_similarity;

    #[test]
    fn prefix_fallback() {
        let key = BTreeMap::from([("s1/r1".to_string(), "dog".to_string())]);
        let mock = AnswerKeyChat::new(key);
        for id in ["s1/r1", "s1/r1/p0", "s1/r1/summary"] {
            let r = mock.chat(&ChatRequest::new(id, "q", vec![]).unwrap()).unwrap();
            assert_eq!(r.text, "dog");
        }
        assert!(mock.chat(&ChatRequest::new("s2/r1", "q", vec![]).unwrap()).is_err());
    }

    #[test]
    fn partial_error_rate_is_deterministic() {
        let mock = AnswerKeyChat::default().with_fallback("x").with_error_rate(0.5);
        let outcomes: Vec<bool> = (0..200)
            .map(|i| mock.chat(&ChatRequest::new(format!("id{i}"), "q", vec![]).unwrap()).is_ok())
            .collect();
        let again: Vec<bool> = (0..200)
            .map(|i| mock.chat(&ChatRequest::new(format!("id{i}"), "q", vec![]).unwrap()).is_ok())
            .collect();
        assert_eq!(outcomes, again);
        let ok = outcomes.iter().filter(|&&b| b).count();
        assert!((60..140).contains(&ok), "{ok}");
    }

    #[test]
    fn hashed_bag_similarity_ordering() {
        let e = HashedBagEmbedder::default();
        let red_car = e.vector("red car");
        let car = e.vector("car");
        let person = e.vector("person");
        let s_car = cosine_similarity(&red_car, &car);
        let s_person = cosine_similarity(&red_car, &person);
        // one shared token out of two: 1 / sqrt(2)
        assert!((s_car - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(s_car > s_person);
    }
}
