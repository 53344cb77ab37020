use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Optional sampling parameters; absent fields are left to the provider.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(flatten)]
    pub sampling: SamplingParams,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request failed: {0}")]
    Fatal(String),
    #[error("model returned an empty reply")]
    EmptyReply,
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Transient(_) | TransportError::EmptyReply)
    }
}

/// One chat-completion round trip. Implementations must be usable from
/// several threads at once.
pub trait Transport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// OpenAI-compatible `chat/completions` client.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, endpoint: endpoint.into(), api_key: api_key.into() }
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::Fatal(format!("HTTP {status}: {}", body.chars().take(500).collect::<String>())));
        }
        let parsed: CompletionResponse =
            resp.body_mut().read_json().map_err(|e| TransportError::Fatal(format!("malformed response: {e}")))?;
        let text = parsed.choices.into_iter().next().and_then(|c| c.message.content).unwrap_or_default();
        if text.trim().is_empty() {
            return Err(TransportError::EmptyReply);
        }
        Ok(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 1000, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Upper bound of the backoff before attempt `attempt + 1`.
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(32)).min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

pub type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Retries retryable failures with exponential backoff and full jitter.
pub struct Retrying<T> {
    inner: T,
    policy: RetryPolicy,
    sleep: Sleeper,
}

impl<T: Transport> Retrying<T> {
    pub fn new(inner: T, policy: RetryPolicy) -> Self {
        Self { inner, policy, sleep: Box::new(std::thread::sleep) }
    }

    pub fn with_sleeper(inner: T, policy: RetryPolicy, sleep: Sleeper) -> Self {
        Self { inner, policy, sleep }
    }
}

impl<T: Transport> Transport for Retrying<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let attempts = self.policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Err(e) if e.is_retryable() && attempt + 1 < attempts => {
                    let ceiling = self.policy.ceiling(attempt).as_millis() as u64;
                    let wait = if ceiling == 0 { 0 } else { rand::rng().random_range(0..=ceiling) };
                    (self.sleep)(Duration::from_millis(wait));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Token bucket limiting requests per minute across threads.
pub struct RateLimited<T> {
    inner: T,
    per_minute: f64,
    state: Mutex<(f64, Instant)>,
}

impl<T: Transport> RateLimited<T> {
    pub fn new(inner: T, requests_per_minute: u32) -> Self {
        let per_minute = f64::from(requests_per_minute.max(1));
        Self { inner, per_minute, state: Mutex::new((per_minute, Instant::now())) }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter lock");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_minute / 60.0;
                st.0 = (st.0 + refill).min(self.per_minute);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) * 60.0 / self.per_minute
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

impl<T: Transport> Transport for RateLimited<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.acquire();
        self.inner.complete(request)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

const CANNED_WORDS: [&str; 48] = [
    "a", "good", "day", "often", "starts", "with", "quiet", "coffee", "and", "light", "through", "the", "window",
    "friends", "call", "when", "work", "goes", "well", "we", "feel", "calm", "small", "moments", "matter", "more",
    "than", "plans", "walking", "outside", "helps", "me", "think", "clearly", "sometimes", "music", "fills", "evening",
    "laughter", "shared", "meals", "rest", "gratitude", "notice", "weather", "kindness", "learning", "time",
];

/// Offline transport returning deterministic pseudo-text derived from the
/// request, `words` words per reply. Counts calls.
pub struct CannedTransport {
    words: usize,
    calls: AtomicUsize,
}

impl CannedTransport {
    pub fn new(words: usize) -> Self {
        Self { words: words.max(1), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for CannedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = serde_json::to_vec(request).map_err(|e| TransportError::Fatal(e.to_string()))?;
        // FNV-1a over the request picks a starting point in an LCG word stream
        let mut state = key.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3));
        let words: Vec<&str> = (0..self.words)
            .map(|_| {
                state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                CANNED_WORDS[(state >> 33) as usize % CANNED_WORDS.len()]
            })
            .collect();
        Ok(words.join(" "))
    }
}
