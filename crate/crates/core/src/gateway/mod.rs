//! Contracts for the external services the evaluation talks to: a
//! multimodal chat model and a sentence-embedding provider.
//!
//! Both sit behind traits so the whole pipeline can run against the
//! deterministic in-process mocks in [`mock`]. [`Gateway`] adds a bound on
//! the number of in-flight requests and keeps batch results in request order.

mod http;
mod matching;
pub mod mock;

use std::sync::{Arc, Condvar, Mutex};

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::ordered_map;

pub use http::{HttpChatBackend, HttpEmbeddingBackend, OpenAiChatBackend, RetryPolicy};
pub use matching::{cosine_similarity, match_category, tokenize, CategoryMatcher, Matcher};
pub use mock::{AnswerKeyChat, HashedBagEmbedder};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatRequest {
    pub request_id: String,
    pub prompt: String,
    /// PNG-encoded image.
    pub image: Vec<u8>,
}

impl ChatRequest {
    pub fn new(request_id: impl Into<String>, prompt: impl Into<String>, image: Vec<u8>) -> Result<Self> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(Error::EmptyInput("chat prompt".into()));
        }
        Ok(ChatRequest {
            request_id: request_id.into(),
            prompt,
            image,
        })
    }

    pub fn to_wire(&self) -> DescribeRequest {
        DescribeRequest {
            request_id: self.request_id.clone(),
            image_b64: base64::engine::general_purpose::STANDARD.encode(&self.image),
            prompt: self.prompt.clone(),
        }
    }

    pub fn from_wire(wire: &DescribeRequest) -> Result<Self> {
        let image = base64::engine::general_purpose::STANDARD
            .decode(&wire.image_b64)
            .map_err(|e| Error::Decode(format!("image_b64: {e}")))?;
        ChatRequest::new(wire.request_id.clone(), wire.prompt.clone(), image)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub request_id: String,
    pub text: String,
}

/// Body of `POST /v1/describe`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribeRequest {
    pub request_id: String,
    pub image_b64: String,
    pub prompt: String,
}

/// Body of `POST /v1/embed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decode("embedding must be non-empty and finite".into()));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        (**self).chat(req)
    }
}

impl<T: EmbeddingBackend + ?Sized> EmbeddingBackend for Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed(texts)
    }
}

/// Counting semaphore bounding concurrent backend calls.
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Limiter {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("limiter lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter lock") += 1;
        self.0.freed.notify_one();
    }
}

/// Chat model plus optional embedder behind an in-flight limit.
#[derive(Clone)]
pub struct Gateway {
    chat: Arc<dyn ChatBackend>,
    embedder: Option<Arc<dyn EmbeddingBackend>>,
    limiter: Arc<Limiter>,
    max_in_flight: usize,
}

impl Gateway {
    pub fn new(chat: Arc<dyn ChatBackend>) -> Self {
        Gateway {
            chat,
            embedder: None,
            limiter: Arc::new(Limiter::new(DEFAULT_MAX_IN_FLIGHT)),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn EmbeddingBackend>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        let n = n.max(1);
        self.limiter = Arc::new(Limiter::new(n));
        self.max_in_flight = n;
        self
    }

    /// Builds HTTP backends from `MODEL_URL`, `EMBED_URL` and `API_KEY`.
    /// `MODEL_PROTOCOL=openai` (with `MODEL_NAME`) selects the
    /// OpenAI-compatible chat adapter instead of `/v1/describe`.
    pub fn from_env(policy: RetryPolicy) -> Result<Self> {
        let model_url = std::env::var("MODEL_URL")
            .map_err(|_| Error::InvalidConfig("MODEL_URL is not set".into()))?;
        let api_key = std::env::var("API_KEY").ok();
        let chat: Arc<dyn ChatBackend> = match std::env::var("MODEL_PROTOCOL").as_deref() {
            Ok("openai") => {
                let model = std::env::var("MODEL_NAME").unwrap_or_else(|_| "default".into());
                Arc::new(OpenAiChatBackend::new(&model_url, model, api_key.clone(), policy))
            }
            _ => Arc::new(HttpChatBackend::new(&model_url, api_key.clone(), policy)),
        };
        let mut gw = Gateway::new(chat);
        if let Ok(embed_url) = std::env::var("EMBED_URL") {
            gw = gw.with_embedder(Arc::new(HttpEmbeddingBackend::new(&embed_url, api_key, policy)));
        }
        Ok(gw)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn embedder(&self) -> Option<&dyn EmbeddingBackend> {
        self.embedder.as_deref()
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let _permit = self.limiter.acquire();
        let resp = self.chat.chat(req)?;
        if resp.request_id != req.request_id {
            return Err(Error::Decode(format!(
                "response id {:?} does not echo request {:?}",
                resp.request_id, req.request_id
            )));
        }
        Ok(resp)
    }

    /// Issues all requests with at most `max_in_flight` outstanding; results
    /// come back in request order.
    pub fn chat_batch(&self, reqs: &[ChatRequest]) -> Vec<Result<ChatResponse>> {
        ordered_map(self.max_in_flight, reqs, |r| self.chat(r))
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("embed() needs at least one text".into()));
        }
        let embedder = self
            .embedder
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("no embedding backend configured".into()))?;
        let _permit = self.limiter.acquire();
        let vectors = embedder.embed(texts)?;
        if vectors.len() != texts.len() {
            return Err(Error::Decode(format!(
                "expected {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn wire_round_trip() {
        let req = ChatRequest::new("id1", "what?", vec![1, 2, 3, 250]).unwrap();
        let wire = req.to_wire();
        let json = serde_json::to_value(&wire).unwrap();
        assert_eq!(json["image_b64"], "AQID+g==");
        assert_eq!(ChatRequest::from_wire(&wire).unwrap(), req);
        assert!(ChatRequest::new("id", "  ", vec![]).is_err());
    }

    #[test]
    fn mock_answer_and_errors() {
        let key = BTreeMap::from([("id1".to_string(), "cat".to_string())]);
        let gw = Gateway::new(Arc::new(AnswerKeyChat::new(key.clone())));
        let req = ChatRequest::new("id1", "q", vec![]).unwrap();
        assert_eq!(gw.chat(&req).unwrap().text, "cat");

        let failing = Gateway::new(Arc::new(AnswerKeyChat::new(key).with_error_rate(1.0)));
        assert!(matches!(failing.chat(&req), Err(Error::BackendError { .. })));
    }

    #[test]
    fn embed_requires_input_and_backend() {
        let gw = Gateway::new(Arc::new(AnswerKeyChat::new(BTreeMap::new())));
        assert!(matches!(gw.embed(&["car".into()]), Err(Error::InvalidConfig(_))));
        let gw = gw.with_embedder(Arc::new(HashedBagEmbedder::default()));
        assert!(matches!(gw.embed(&[]), Err(Error::EmptyInput(_))));
        let v = gw.embed(&["car".into(), "car".into()]).unwrap();
        assert_eq!(v[0], v[1]);
    }

    struct Slow {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl ChatBackend for Slow {
        fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(ChatResponse {
                request_id: req.request_id.clone(),
                text: req.prompt.clone(),
            })
        }
    }

    #[test]
    fn batch_respects_in_flight_bound_and_order() {
        let backend = Arc::new(Slow {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let gw = Gateway::new(backend.clone()).with_max_in_flight(3);
        let reqs: Vec<_> = (0..30)
            .map(|i| ChatRequest::new(format!("r{i}"), format!("p{i}"), vec![]).unwrap())
            .collect();
        let out = gw.chat_batch(&reqs);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap().text, format!("p{i}"));
        }
        assert!(backend.peak.load(Ordering::SeqCst) <= 3);
    }
}
