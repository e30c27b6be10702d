use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    ChatBackend, ChatRequest, ChatResponse, DescribeRequest, EmbedRequest, EmbedResponse,
    EmbeddingBackend, EmbeddingVector,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    /// Per-attempt timeout.
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(5),
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }

    /// Runs `op` until it succeeds, fails permanently, or runs out of
    /// attempts. Exhausted timeouts surface as `BackendTimeout`.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    log::debug!("attempt {} failed ({e}), retrying", attempt + 1);
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(Error::BackendTimeout { .. }) => {
                    return Err(Error::BackendTimeout {
                        attempts: attempt + 1,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

struct JsonClient {
    agent: ureq::Agent,
    api_key: Option<String>,
    policy: RetryPolicy,
}

impl JsonClient {
    fn new(api_key: Option<String>, policy: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build();
        JsonClient {
            agent: ureq::Agent::new_with_config(config),
            api_key,
            policy,
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(transport_error)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        if !(200..300).contains(&status) {
            return Err(Error::BackendError {
                status,
                message: text.chars().take(200).collect(),
            });
        }
        serde_json::from_str(&text).map_err(|e| Error::Decode(format!("{url}: {e}")))
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        self.policy.run(|| self.post_once(url, body))
    }
}

fn transport_error(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(_) => Error::BackendTimeout { attempts: 1 },
        other => Error::BackendError {
            status: 0,
            message: other.to_string(),
        },
    }
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}{}", base.trim_end_matches('/'), path)
}

/// Chat backend speaking `POST /v1/describe`.
pub struct HttpChatBackend {
    client: JsonClient,
    url: String,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>, policy: RetryPolicy) -> Self {
        HttpChatBackend {
            client: JsonClient::new(api_key, policy),
            url: join_url(base_url, "/v1/describe"),
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let body: DescribeRequest = req.to_wire();
        self.client.post(&self.url, &body)
    }
}

/// Adapter for OpenAI-compatible `POST /v1/chat/completions` servers. The
/// image travels as a base64 data URL next to the text prompt.
pub struct OpenAiChatBackend {
    client: JsonClient,
    url: String,
    model: String,
}

impl OpenAiChatBackend {
    pub fn new(base_url: &str, model: impl Into<String>, api_key: Option<String>, policy: RetryPolicy) -> Self {
        OpenAiChatBackend {
            client: JsonClient::new(api_key, policy),
            url: join_url(base_url, "/v1/chat/completions"),
            model: model.into(),
        }
    }

    pub fn request_body(&self, req: &ChatRequest) -> serde_json::Value {
        let wire = req.to_wire();
        serde_json::json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{}", wire.image_b64)}},
                    {"type": "text", "text": req.prompt},
                ],
            }],
        })
    }
}

impl ChatBackend for OpenAiChatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let value: serde_json::Value = self.client.post(&self.url, &self.request_body(req))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::Decode("missing choices[0].message.content".into()))?;
        Ok(ChatResponse {
            request_id: req.request_id.clone(),
            text: text.to_string(),
        })
    }
}

/// Embedding backend speaking `POST /v1/embed`.
pub struct HttpEmbeddingBackend {
    client: JsonClient,
    url: String,
}

impl HttpEmbeddingBackend {
    pub fn new(base_url: &str, api_key: Option<String>, policy: RetryPolicy) -> Self {
        HttpEmbeddingBackend {
            client: JsonClient::new(api_key, policy),
            url: join_url(base_url, "/v1/embed"),
        }
    }
}

impl EmbeddingBackend for HttpEmbeddingBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let body = EmbedRequest {
            texts: texts.to_vec(),
        };
        let resp: EmbedResponse = self.client.post(&self.url, &body)?;
        let vectors = resp
            .vectors
            .into_iter()
            .map(EmbeddingVector::new)
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.dim() != first.dim()) {
                return Err(Error::Decode("embedding dimensions differ".into()));
            }
        }
        Ok(vectors)
    }
}
