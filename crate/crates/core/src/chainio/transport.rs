//! HTTP transport with record/replay journaling.
//!
//! A journal is a JSONL file of `{"request": .., "response": ..}` lines.
//! Requests are keyed by their canonical JSON with credential query
//! parameters redacted, so journals can be committed without secrets.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("http {status} from {url}")]
    Status { url: String, status: u16 },
    #[error("connection error for {url}: {message}")]
    Connection { url: String, message: String },
    #[error("response from {url} is not JSON: {message}")]
    Body { url: String, message: String },
    #[error("rate limited by {0}")]
    RateLimited(String),
    #[error("replay miss: no recorded response for {0}")]
    ReplayMiss(String),
    #[error("journal error: {0}")]
    Journal(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Connection { .. } | TransportError::RateLimited(_) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

const SECRET_PARAMS: &[&str] = &["apikey", "api_key", "key", "token"];

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest { method: Method::Get, url: url.into(), body: None }
    }

    pub fn post(url: impl Into<String>, body: Value) -> Self {
        HttpRequest { method: Method::Post, url: url.into(), body: Some(body) }
    }

    /// The URL with secret query parameters blanked.
    pub fn redacted_url(&self) -> String {
        let Some((base, query)) = self.url.split_once('?') else {
            return self.url.clone();
        };
        let params: Vec<String> = query
            .split('&')
            .map(|kv| match kv.split_once('=') {
                Some((k, _)) if SECRET_PARAMS.contains(&k.to_ascii_lowercase().as_str()) => format!("{k}=REDACTED"),
                _ => kv.to_owned(),
            })
            .collect();
        format!("{base}?{}", params.join("&"))
    }

    /// Journal key: canonical JSON of the redacted request.
    pub fn key(&self) -> String {
        let redacted = HttpRequest { method: self.method, url: self.redacted_url(), body: self.body.clone() };
        // serde_json maps are sorted, so this is canonical
        serde_json::to_string(&redacted).expect("request serializes")
    }
}

/// Sends one request and returns the parsed JSON body.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Minimum spacing between requests.
    pub min_interval_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, base_delay_ms: 250, max_delay_ms: 8_000, min_interval_ms: 0 }
    }
}

impl RetryPolicy {
    /// Exponential backoff delay before retry `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

/// Live transport over blocking reqwest.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    policy: RetryPolicy,
    last_request: Mutex<Option<Instant>>,
}

impl HttpTransport {
    pub fn new(policy: RetryPolicy) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .user_agent(concat!("metagov/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("http client builds");
        HttpTransport { client, policy, last_request: Mutex::new(None) }
    }

    fn throttle(&self) {
        if self.policy.min_interval_ms == 0 {
            return;
        }
        let mut last = self.last_request.lock().expect("throttle lock");
        let min = Duration::from_millis(self.policy.min_interval_ms);
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < min {
                std::thread::sleep(min - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn send_once(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        self.throttle();
        let url = request.redacted_url();
        let builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url).json(request.body.as_ref().unwrap_or(&Value::Null)),
        };
        let response =
            builder.send().map_err(|e| TransportError::Connection { url: url.clone(), message: e.to_string() })?;
        let status = response.status().as_u16();
        if status == 429 {
            return Err(TransportError::RateLimited(url));
        }
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { url, status });
        }
        response.json().map_err(|e| TransportError::Body { url, message: e.to_string() })
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        let mut attempt = 0;
        loop {
            match self.send_once(request) {
                Err(e) if e.is_retryable() && attempt < self.policy.max_retries => {
                    log::warn!("retrying {} after: {e}", request.redacted_url());
                    std::thread::sleep(self.policy.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JournalLine {
    request: Value,
    response: Value,
}

/// Forwards to `inner` and appends every successful exchange to a journal.
pub struct RecordingTransport<T> {
    inner: T,
    journal: Mutex<fs::File>,
    path: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, journal: &Path) -> Result<Self, TransportError> {
        if let Some(parent) = journal.parent() {
            fs::create_dir_all(parent).map_err(|e| TransportError::Journal(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(journal)
            .map_err(|e| TransportError::Journal(format!("{}: {e}", journal.display())))?;
        Ok(RecordingTransport { inner, journal: Mutex::new(file), path: journal.to_owned() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        let response = self.inner.send(request)?;
        let line = JournalLine {
            request: serde_json::from_str(&request.key()).expect("key is json"),
            response: response.clone(),
        };
        let mut text = serde_json::to_string(&line).map_err(|e| TransportError::Journal(e.to_string()))?;
        text.push('\n');
        let mut file = self.journal.lock().expect("journal lock");
        file.write_all(text.as_bytes()).map_err(|e| TransportError::Journal(e.to_string()))?;
        Ok(response)
    }
}

/// Serves responses from a journal and never touches the network. A
/// request missing from the journal is a hard error.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    responses: HashMap<String, Value>,
}

impl ReplayTransport {
    pub fn open(journal: &Path) -> Result<Self, TransportError> {
        let file =
            fs::File::open(journal).map_err(|e| TransportError::Journal(format!("{}: {e}", journal.display())))?;
        let mut responses = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| TransportError::Journal(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalLine = serde_json::from_str(&line)
                .map_err(|e| TransportError::Journal(format!("{}:{}: {e}", journal.display(), i + 1)))?;
            let request: HttpRequest = serde_json::from_value(entry.request)
                .map_err(|e| TransportError::Journal(format!("{}:{}: {e}", journal.display(), i + 1)))?;
            // later recordings of the same request win
            responses.insert(request.key(), entry.response);
        }
        Ok(ReplayTransport { responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        let key = request.key();
        self.responses.get(&key).cloned().ok_or(TransportError::ReplayMiss(key))
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        (**self).send(request)
    }
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        (**self).send(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::io::Read;
    use std::net::TcpListener;

    struct Echo;

    impl Transport for Echo {
        fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
            Ok(json!({ "echo": request.body.clone() }))
        }
    }

    #[test]
    fn redaction_hides_keys() {
        let req = HttpRequest::get("https://api.example/api?module=contract&apikey=SECRET&address=0x1");
        assert_eq!(req.redacted_url(), "https://api.example/api?module=contract&apikey=REDACTED&address=0x1");
        assert!(!req.key().contains("SECRET"));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("j.jsonl");
        let req = HttpRequest::post("http://node", json!({"method": "eth_blockNumber", "id": 1}));
        let recorded = {
            let rec = RecordingTransport::new(Echo, &journal).unwrap();
            rec.send(&req).unwrap()
        };
        let replay = ReplayTransport::open(&journal).unwrap();
        assert_eq!(replay.send(&req).unwrap(), recorded);
        let miss = replay.send(&HttpRequest::get("http://node/other")).unwrap_err();
        assert!(matches!(miss, TransportError::ReplayMiss(_)));
        assert!(!miss.is_retryable());
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy { max_retries: 3, base_delay_ms: 100, max_delay_ms: 350, min_interval_ms: 0 };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(350));
        assert_eq!(p.delay(70), Duration::from_millis(350));
    }

    fn serve(responses: Vec<(&'static str, &'static str)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/")
    }

    #[test]
    fn http_transport_retries_server_errors() {
        let url = serve(vec![("503 Service Unavailable", "{}"), ("200 OK", r#"{"result":"0x10"}"#)]);
        let transport =
            HttpTransport::new(RetryPolicy { max_retries: 2, base_delay_ms: 1, max_delay_ms: 5, min_interval_ms: 0 });
        let value = transport.send(&HttpRequest::post(url, json!({"id": 1}))).unwrap();
        assert_eq!(value["result"], "0x10");
    }

    #[test]
    fn http_transport_gives_up_on_client_errors() {
        let url = serve(vec![("404 Not Found", "{}")]);
        let transport =
            HttpTransport::new(RetryPolicy { max_retries: 2, base_delay_ms: 1, max_delay_ms: 5, min_interval_ms: 0 });
        let err = transport.send(&HttpRequest::get(url)).unwrap_err();
        assert!(matches!(err, TransportError::Status { status: 404, .. }));
    }
}
