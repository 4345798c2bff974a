//! Single abstraction over a chat-completion LLM with live, record, and
//! replay modes. Replay mode answers every request from an on-disk cache and
//! never touches the network, which makes the whole pipeline deterministic
//! and testable offline; record mode fills that cache.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a request is for. Part of the cache key, so the same text asked for
/// different purposes never collides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestKind {
    Categorize,
    Synthesize,
    SubsumeList,
    SubsumeFormat,
    AskBoolean,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Categorize => "CATEGORIZE",
            RequestKind::Synthesize => "SYNTHESIZE",
            RequestKind::SubsumeList => "SUBSUME_LIST",
            RequestKind::SubsumeFormat => "SUBSUME_FORMAT",
            RequestKind::AskBoolean => "ASK_BOOLEAN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub request_kind: RequestKind,
}

impl LlmRequest {
    fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest {
                reason: "user_text must be non-empty".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest {
                reason: format!("temperature {} outside [0, 1]", self.temperature),
            });
        }
        let must_be_deterministic = matches!(
            self.request_kind,
            RequestKind::AskBoolean | RequestKind::SubsumeFormat
        );
        if must_be_deterministic && self.temperature != 0.0 {
            return Err(GatewayError::InvalidRequest {
                reason: format!(
                    "{} requests require temperature 0",
                    self.request_kind.as_str()
                ),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlmResponse {
    pub text: String,
    pub cached: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("no API key configured (set SPADE_LLM_API_KEY) for {mode} mode")]
    Auth { mode: Mode },
    #[error("replay cache has no entry for key {key}")]
    CacheMiss { key: String },
    #[error("provider request failed after {attempts} attempts: {detail}")]
    Provider { attempts: u32, detail: String },
    #[error("boolean judgment reply is neither yes nor no: {reply:?}")]
    AmbiguousReply { reply: String },
    #[error("invalid request: {reason}")]
    InvalidRequest { reason: String },
    #[error("cache I/O at {path}: {source}")]
    Cache {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown gateway mode {found:?} (expected live, record, or replay)")]
    BadMode { found: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Mode, GatewayError> {
        match text.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            _ => Err(GatewayError::BadMode { found: text.into() }),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        })
    }
}

/// The wire layer, separated out so tests can substitute scripted or
/// counting transports. Implementations must be safe to call from multiple
/// evaluation threads at once.
pub trait Transport: Send + Sync {
    fn send(
        &self,
        endpoint: &str,
        api_key: &str,
        model: &str,
        request: &LlmRequest,
    ) -> Result<String, String>;
}

/// OpenAI-compatible chat-completions transport.
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(
        &self,
        endpoint: &str,
        api_key: &str,
        model: &str,
        request: &LlmRequest,
    ) -> Result<String, String> {
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(serde_json::json!({
                "role": "system",
                "content": request.system_text,
            }));
        }
        messages.push(serde_json::json!({
            "role": "user",
            "content": request.user_text,
        }));
        let body = serde_json::json!({
            "model": model,
            "temperature": request.temperature,
            "messages": messages,
        });
        let reply = ureq::post(endpoint)
            .set("Authorization", &format!("Bearer {api_key}"))
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| e.to_string())?;
        let text = reply
            .into_string()
            .map_err(|e| format!("unreadable provider reply: {e}"))?;
        let parsed: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("malformed provider reply: {e}"))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| "provider reply has no choices[0].message.content".to_string())
    }
}

/// Stored cache entry: the request that produced a response, for audit, and
/// the response text itself.
#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: LlmRequest,
    response: String,
}

pub struct Gateway {
    mode: Mode,
    cache_dir: PathBuf,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    transport: Box<dyn Transport>,
    backoff_base: Duration,
    write_lock: Mutex<()>,
}

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const DEFAULT_MODEL: &str = "gpt-4";
const RETRY_ATTEMPTS: u32 = 3;

impl Gateway {
    pub fn new(mode: Mode, cache_dir: impl Into<PathBuf>, transport: Box<dyn Transport>) -> Self {
        Gateway {
            mode,
            cache_dir: cache_dir.into(),
            endpoint: DEFAULT_ENDPOINT.into(),
            model: DEFAULT_MODEL.into(),
            api_key: None,
            transport,
            backoff_base: Duration::from_millis(1000),
            write_lock: Mutex::new(()),
        }
    }

    /// Builds a gateway from `SPADE_LLM_MODE`, `SPADE_CACHE_DIR`,
    /// `SPADE_LLM_ENDPOINT`, `SPADE_LLM_MODEL`, and `SPADE_LLM_API_KEY`.
    /// Mode defaults to replay: the safe, deterministic, zero-spend choice.
    pub fn from_env() -> Result<Self, GatewayError> {
        let mode = match std::env::var("SPADE_LLM_MODE") {
            Ok(text) => Mode::parse(&text)?,
            Err(_) => Mode::Replay,
        };
        let cache_dir =
            std::env::var("SPADE_CACHE_DIR").unwrap_or_else(|_| "spade-cache".to_string());
        let mut gateway = Gateway::new(mode, cache_dir, Box::new(HttpTransport));
        if let Ok(endpoint) = std::env::var("SPADE_LLM_ENDPOINT") {
            gateway.endpoint = endpoint;
        }
        if let Ok(model) = std::env::var("SPADE_LLM_MODEL") {
            gateway.model = model;
        }
        gateway.api_key = std::env::var("SPADE_LLM_API_KEY").ok();
        Ok(gateway)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    /// Shrinks the retry backoff; for tests that exercise the retry loop.
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Stable content hash identifying a request across runs and platforms:
    /// SHA-256 over the request kind, whitespace-normalized texts, and the
    /// temperature, joined by a separator that cannot appear in the fields.
    pub fn request_key(request: &LlmRequest) -> String {
        let mut hasher = Sha256::new();
        hasher.update(request.request_kind.as_str());
        hasher.update([0x1f]);
        hasher.update(normalize_whitespace(&request.system_text));
        hasher.update([0x1f]);
        hasher.update(normalize_whitespace(&request.user_text));
        hasher.update([0x1f]);
        hasher.update(request.temperature.to_string());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }

    fn cache_path(&self, key: &str) -> PathBuf {
        self.cache_dir.join(key)
    }

    fn read_cache(&self, key: &str) -> Result<Option<String>, GatewayError> {
        let path = self.cache_path(key);
        match std::fs::read_to_string(&path) {
            Ok(raw) => {
                let entry: CacheEntry =
                    serde_json::from_str(&raw).map_err(|e| GatewayError::Cache {
                        path: path.clone(),
                        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
                    })?;
                Ok(Some(entry.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(GatewayError::Cache { path, source }),
        }
    }

    fn write_cache(&self, key: &str, request: &LlmRequest, response: &str) -> Result<(), GatewayError> {
        let _guard = self.write_lock.lock().expect("cache lock never poisoned");
        std::fs::create_dir_all(&self.cache_dir).map_err(|source| GatewayError::Cache {
            path: self.cache_dir.clone(),
            source,
        })?;
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        let body = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        let path = self.cache_path(key);
        let tmp = self.cache_path(&format!("{key}.tmp"));
        std::fs::write(&tmp, body).map_err(|source| GatewayError::Cache {
            path: tmp.clone(),
            source,
        })?;
        std::fs::rename(&tmp, &path).map_err(|source| GatewayError::Cache { path, source })
    }

    fn forward(&self, request: &LlmRequest) -> Result<String, GatewayError> {
        let key = self.api_key.as_deref().ok_or(GatewayError::Auth { mode: self.mode })?;
        let mut last_error = String::new();
        for attempt in 0..RETRY_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.transport.send(&self.endpoint, key, &self.model, request) {
                Ok(text) => return Ok(text),
                Err(detail) => last_error = detail,
            }
        }
        Err(GatewayError::Provider {
            attempts: RETRY_ATTEMPTS,
            detail: last_error,
        })
    }

    /// Completes a request per the configured mode: replay answers purely
    /// from the cache, record forwards and persists, live just forwards.
    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        let key = Self::request_key(request);
        match self.mode {
            Mode::Replay => match self.read_cache(&key)? {
                Some(text) => Ok(LlmResponse { text, cached: true }),
                None => Err(GatewayError::CacheMiss { key }),
            },
            Mode::Record => {
                let text = self.forward(request)?;
                self.write_cache(&key, request, &text)?;
                Ok(LlmResponse {
                    text,
                    cached: false,
                })
            }
            Mode::Live => {
                let text = self.forward(request)?;
                Ok(LlmResponse {
                    text,
                    cached: false,
                })
            }
        }
    }

    /// Asks a yes/no question about one pipeline response. True iff the
    /// reply's first token, lowercased and stripped of punctuation, is
    /// "yes"; "no" is false; anything else is an ambiguous-reply error.
    pub fn ask_boolean(
        &self,
        formatted_prompt: &str,
        response: &str,
        question: &str,
    ) -> Result<bool, GatewayError> {
        let request = boolean_request(formatted_prompt, response, question);
        let reply = self.complete(&request)?;
        parse_yes_no(&reply.text)
    }
}

/// The ASK_BOOLEAN request contract: the three context fields plus an
/// instruction to answer with exactly one word.
pub fn boolean_request(formatted_prompt: &str, response: &str, question: &str) -> LlmRequest {
    LlmRequest {
        system_text: "You are a strict evaluator of LLM pipeline responses. Answer the \
                      question about the response with exactly one word: yes or no."
            .into(),
        user_text: format!(
            "Prompt given to the pipeline:\n\n{formatted_prompt}\n\n\
             Response from the pipeline:\n\n{response}\n\n\
             Question: {question}\n\nAnswer exactly \"yes\" or \"no\"."
        ),
        temperature: 0.0,
        request_kind: RequestKind::AskBoolean,
    }
}

fn parse_yes_no(reply: &str) -> Result<bool, GatewayError> {
    let token = reply
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_ascii_lowercase();
    match token.as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(GatewayError::AmbiguousReply {
            reply: reply.to_string(),
        }),
    }
}

fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// In-memory transport answering from a fixed map; the workhorse for unit
/// tests that don't need a socket.
pub struct MapTransport {
    replies: BTreeMap<String, String>,
}

impl MapTransport {
    pub fn new(replies: BTreeMap<String, String>) -> Self {
        MapTransport { replies }
    }
}

impl Transport for MapTransport {
    fn send(
        &self,
        _endpoint: &str,
        _api_key: &str,
        _model: &str,
        request: &LlmRequest,
    ) -> Result<String, String> {
        self.replies
            .get(&Gateway::request_key(request))
            .cloned()
            .ok_or_else(|| "no scripted reply for request".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn request(kind: RequestKind, user: &str, temperature: f64) -> LlmRequest {
        LlmRequest {
            system_text: String::new(),
            user_text: user.into(),
            temperature,
            request_kind: kind,
        }
    }

    #[test]
    fn keys_ignore_whitespace_layout_but_not_content() {
        let a = request(RequestKind::Categorize, "alpha   beta\n\tgamma", 0.7);
        let b = request(RequestKind::Categorize, "alpha beta gamma", 0.7);
        let c = request(RequestKind::Categorize, "alpha beta gamma delta", 0.7);
        assert_eq!(Gateway::request_key(&a), Gateway::request_key(&b));
        assert_ne!(Gateway::request_key(&a), Gateway::request_key(&c));
    }

    #[test]
    fn keys_separate_kinds_and_temperatures() {
        let a = request(RequestKind::Categorize, "same text", 0.7);
        let b = request(RequestKind::Synthesize, "same text", 0.7);
        let c = request(RequestKind::Categorize, "same text", 0.0);
        assert_ne!(Gateway::request_key(&a), Gateway::request_key(&b));
        assert_ne!(Gateway::request_key(&a), Gateway::request_key(&c));
    }

    #[test]
    fn key_is_frozen_against_accidental_format_changes() {
        let req = LlmRequest {
            system_text: "sys".into(),
            user_text: "user".into(),
            temperature: 0.0,
            request_kind: RequestKind::AskBoolean,
        };
        // Independently derived: sha256 of
        // "ASK_BOOLEAN\x1fsys\x1fuser\x1f0".
        assert_eq!(
            Gateway::request_key(&req),
            "a6321a0e976419c23c6f1c99dbd78cd731557a2dcc6d5125aa4e1736bf8442f9"
        );
    }

    #[test]
    fn validation_rejects_malformed_requests() {
        let gw = Gateway::new(
            Mode::Replay,
            "/nonexistent",
            Box::new(MapTransport::new(BTreeMap::new())),
        );
        let empty = request(RequestKind::Categorize, "   ", 0.0);
        assert!(matches!(
            gw.complete(&empty),
            Err(GatewayError::InvalidRequest { .. })
        ));
        let hot_judgment = request(RequestKind::AskBoolean, "q", 0.5);
        assert!(matches!(
            gw.complete(&hot_judgment),
            Err(GatewayError::InvalidRequest { .. })
        ));
        let out_of_range = request(RequestKind::Categorize, "q", 1.5);
        assert!(matches!(
            gw.complete(&out_of_range),
            Err(GatewayError::InvalidRequest { .. })
        ));
    }

    #[test]
    fn yes_no_parsing_follows_the_first_token() {
        assert_eq!(parse_yes_no("Yes.").unwrap(), true);
        assert_eq!(parse_yes_no("  YES, certainly").unwrap(), true);
        assert_eq!(parse_yes_no("no — the response is verbose").unwrap(), false);
        assert!(matches!(
            parse_yes_no("maybe"),
            Err(GatewayError::AmbiguousReply { .. })
        ));
        assert!(matches!(
            parse_yes_no(""),
            Err(GatewayError::AmbiguousReply { .. })
        ));
    }

    struct FlakyTransport {
        calls: AtomicU32,
        fail_first: u32,
    }

    impl Transport for FlakyTransport {
        fn send(
            &self,
            _endpoint: &str,
            _api_key: &str,
            _model: &str,
            _request: &LlmRequest,
        ) -> Result<String, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err("transient".into())
            } else {
                Ok("recovered".into())
            }
        }
    }

    #[test]
    fn live_mode_retries_transient_failures() {
        let gw = Gateway::new(
            Mode::Live,
            "/nonexistent",
            Box::new(FlakyTransport {
                calls: AtomicU32::new(0),
                fail_first: 2,
            }),
        )
        .with_api_key("k")
        .with_backoff_base(Duration::from_millis(1));
        let reply = gw
            .complete(&request(RequestKind::Categorize, "q", 0.0))
            .unwrap();
        assert_eq!(reply.text, "recovered");
    }

    #[test]
    fn live_mode_gives_up_after_three_attempts() {
        let transport = FlakyTransport {
            calls: AtomicU32::new(0),
            fail_first: u32::MAX,
        };
        let gw = Gateway::new(Mode::Live, "/nonexistent", Box::new(transport))
            .with_api_key("k")
            .with_backoff_base(Duration::from_millis(1));
        match gw.complete(&request(RequestKind::Categorize, "q", 0.0)) {
            Err(GatewayError::Provider { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected provider error, got {other:?}"),
        }
    }

    #[test]
    fn live_and_record_require_an_api_key() {
        for mode in [Mode::Live, Mode::Record] {
            let gw = Gateway::new(
                mode,
                "/nonexistent",
                Box::new(MapTransport::new(BTreeMap::new())),
            );
            assert!(matches!(
                gw.complete(&request(RequestKind::Categorize, "q", 0.0)),
                Err(GatewayError::Auth { .. })
            ));
        }
    }
}
