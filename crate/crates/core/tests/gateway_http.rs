use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use pointprompt::gateway::{
    ChatBackend, ChatRequest, DescribeRequest, EmbeddingBackend, Gateway, HttpChatBackend, HttpEmbeddingBackend,
    OpenAiChatBackend, RetryPolicy,
};
use pointprompt::Error;

#[derive(Clone)]
struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn reply(status: u16, body: &str) -> Reply {
    Reply {
        status,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

/// Minimal HTTP/1.1 server answering with `script` in order (the last reply
/// repeats). `body_fn`, when set, builds a 200 reply from the request body.
struct Server {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, String)>>>,
}

type BodyFn = Arc<dyn Fn(&str) -> String + Send + Sync>;

fn serve(script: Vec<Reply>, body_fn: Option<BodyFn>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let n = h.fetch_add(1, Ordering::SeqCst);
            let script = script.clone();
            let body_fn = body_fn.clone();
            let b = b.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line["authorization:".len()..].trim().to_string();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let body = String::from_utf8(body).unwrap();
                let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
                b.lock().unwrap().push((format!("{path} {auth}"), body.clone()));
                let r = match &body_fn {
                    Some(f) => reply(200, &f(&body)),
                    None => script[n.min(script.len() - 1)].clone(),
                };
                thread::sleep(r.delay);
                let resp = format!(
                    "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    r.status,
                    r.body.len(),
                    r.body
                );
                let _ = stream.write_all(resp.as_bytes());
            });
        }
    });
    Server { url, hits, bodies }
}

fn quick(timeout_ms: u64) -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        initial_backoff: Duration::from_millis(5),
        max_backoff: Duration::from_millis(20),
        timeout: Duration::from_millis(timeout_ms),
    }
}

fn request(id: &str) -> ChatRequest {
    ChatRequest::new(id, "What is it?", vec![1, 2, 3]).unwrap()
}

fn echo() -> BodyFn {
    Arc::new(|body: &str| {
        let req: DescribeRequest = serde_json::from_str(body).unwrap();
        serde_json::json!({"request_id": req.request_id, "text": format!("answer to {}", req.prompt)}).to_string()
    })
}

#[test]
fn describe_round_trip() {
    let server = serve(vec![], Some(echo()));
    let chat = HttpChatBackend::new(&server.url, Some("secret".into()), quick(2000));
    let resp = chat.chat(&request("s/r0")).unwrap();
    assert_eq!(resp.request_id, "s/r0");
    assert_eq!(resp.text, "answer to What is it?");
    let (head, body) = server.bodies.lock().unwrap()[0].clone();
    assert_eq!(head, "/v1/describe Bearer secret");
    let wire: DescribeRequest = serde_json::from_str(&body).unwrap();
    assert_eq!(wire.image_b64, "AQID");
}

#[test]
fn malformed_json_is_a_decode_error() {
    let server = serve(vec![reply(200, "{not json")], None);
    let chat = HttpChatBackend::new(&server.url, None, quick(2000));
    let err = chat.chat(&request("a")).unwrap_err();
    assert!(matches!(err, Error::Decode(_)), "{err}");
    assert_eq!(server.hits.load(Ordering::SeqCst), 1, "decode errors are not retried");
}

#[test]
fn server_errors_are_retried_then_reported() {
    let server = serve(vec![reply(500, "boom")], None);
    let chat = HttpChatBackend::new(&server.url, None, quick(2000));
    let err = chat.chat(&request("a")).unwrap_err();
    assert!(matches!(err, Error::BackendError { status: 500, .. }), "{err}");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn transient_failure_recovers() {
    let ok = serde_json::json!({"request_id": "a", "text": "cat"}).to_string();
    let server = serve(vec![reply(503, "busy"), reply(429, "slow down"), reply(200, &ok)], None);
    let chat = HttpChatBackend::new(&server.url, None, quick(2000));
    assert_eq!(chat.chat(&request("a")).unwrap().text, "cat");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_fail_fast() {
    let server = serve(vec![reply(400, "bad request")], None);
    let chat = HttpChatBackend::new(&server.url, None, quick(2000));
    assert!(matches!(chat.chat(&request("a")), Err(Error::BackendError { status: 400, .. })));
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn slow_server_times_out_within_bound() {
    let slow = Reply {
        delay: Duration::from_millis(600),
        ..reply(200, "{}")
    };
    let server = serve(vec![slow], None);
    let policy = quick(100);
    let chat = HttpChatBackend::new(&server.url, None, policy);
    let start = Instant::now();
    let err = chat.chat(&request("a")).unwrap_err();
    let elapsed = start.elapsed();
    assert!(matches!(err, Error::BackendTimeout { attempts: 3 }), "{err}");
    let bound = policy.timeout * (policy.max_retries + 1) + Duration::from_millis(400);
    assert!(elapsed < bound, "{elapsed:?}");
}

#[test]
fn mismatched_request_id_is_rejected() {
    let server = serve(vec![reply(200, r#"{"request_id":"other","text":"x"}"#)], None);
    let gw = Gateway::new(Arc::new(HttpChatBackend::new(&server.url, None, quick(2000))));
    assert!(matches!(gw.chat(&request("a")), Err(Error::Decode(_))));
}

#[test]
fn batch_keeps_request_order() {
    let server = serve(vec![], Some(echo()));
    let gw = Gateway::new(Arc::new(HttpChatBackend::new(&server.url, None, quick(2000)))).with_max_in_flight(4);
    let reqs: Vec<ChatRequest> = (0..20).map(|i| ChatRequest::new(format!("r{i}"), format!("q{i}"), vec![]).unwrap()).collect();
    let out = gw.chat_batch(&reqs);
    for (i, r) in out.into_iter().enumerate() {
        assert_eq!(r.unwrap().text, format!("answer to q{i}"));
    }
}

#[test]
fn openai_adapter_reads_first_choice() {
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "a dog"}}]}).to_string();
    let server = serve(vec![reply(200, &body)], None);
    let chat = OpenAiChatBackend::new(&server.url, "vlm", None, quick(2000));
    let resp = chat.chat(&request("x/1")).unwrap();
    assert_eq!((resp.request_id.as_str(), resp.text.as_str()), ("x/1", "a dog"));
    let (head, sent) = server.bodies.lock().unwrap()[0].clone();
    assert!(head.starts_with("/v1/chat/completions"));
    let v: serde_json::Value = serde_json::from_str(&sent).unwrap();
    assert_eq!(v["model"], "vlm");
    assert_eq!(v["messages"][0]["content"][0]["image_url"]["url"], "data:image/png;base64,AQID");
    assert_eq!(v["messages"][0]["content"][1]["text"], "What is it?");
}

#[test]
fn embed_endpoint() {
    let server = serve(vec![reply(200, r#"{"vectors":[[1.0,0.0],[0.0,1.0]]}"#)], None);
    let e = HttpEmbeddingBackend::new(&server.url, None, quick(2000));
    let v = e.embed(&["a".into(), "b".into()]).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[1].values, vec![0.0, 1.0]);
    let (head, sent) = server.bodies.lock().unwrap()[0].clone();
    assert!(head.starts_with("/v1/embed"));
    let v: serde_json::Value = serde_json::from_str(&sent).unwrap();
    assert_eq!(v, serde_json::json!({"texts": ["a", "b"]}));

    let ragged = serve(vec![reply(200, r#"{"vectors":[[1.0,0.0],[1.0]]}"#)], None);
    let e = HttpEmbeddingBackend::new(&ragged.url, None, quick(2000));
    assert!(matches!(e.embed(&["a".into(), "b".into()]), Err(Error::Decode(_))));
}

#[test]
fn unreachable_server_is_a_backend_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let chat = HttpChatBackend::new(&format!("http://127.0.0.1:{port}"), None, quick(500));
    let err = chat.chat(&request("a")).unwrap_err();
    assert!(!err.is_validation(), "{err}");
}
