use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatGateway, ChatReply, ChatRequest, GatewayError, TokenUsage};

/// One chat-completions provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Provider name; selects the `IDEAFORGE_API_KEY_<PROVIDER>` variable.
    pub provider: String,
    pub base_url: String,
    pub timeout_ms: u64,
    /// JSON field that carries reasoning effort for this provider, if any.
    pub reasoning_effort_field: Option<String>,
    /// Minimum spacing between requests to this endpoint.
    pub min_interval_ms: u64,
    pub max_attempts: u32,
    /// First backoff delay; doubles per attempt with ±20% jitter.
    pub backoff_base_ms: u64,
    pub jitter_seed: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            provider: "openai".into(),
            base_url: "https://api.openai.com/v1".into(),
            timeout_ms: 120_000,
            reasoning_effort_field: Some("reasoning_effort".into()),
            min_interval_ms: 0,
            max_attempts: 3,
            backoff_base_ms: 1000,
            jitter_seed: 0,
        }
    }
}

pub fn api_key_var(provider: &str) -> String {
    let suffix: String = provider
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("IDEAFORGE_API_KEY_{suffix}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("timeout")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("{0}")]
    Other(String),
}

pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

#[derive(Debug, Default)]
pub struct UreqTransport;

impl HttpTransport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
                TransportError::Connect(e.to_string())
            }
            other => TransportError::Other(other.to_string()),
        };
        let mut resp = req.send(body).map_err(map_err)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(map_err)?;
        Ok(HttpResponse { status, body })
    }
}

/// JSON POST client with credential, rate limit and bounded exponential
/// backoff. Shared by the chat and embedding endpoints.
pub struct HttpClient {
    endpoint: EndpointConfig,
    api_key: String,
    transport: Box<dyn HttpTransport>,
    jitter: Mutex<ChaCha8Rng>,
    last_request: Mutex<Option<Instant>>,
}

impl HttpClient {
    pub fn from_env(endpoint: EndpointConfig) -> Result<Self, GatewayError> {
        let var = api_key_var(&endpoint.provider);
        let key = std::env::var(&var).map_err(|_| GatewayError::MissingCredential(var))?;
        Ok(Self::with_transport(endpoint, key, Box::new(UreqTransport)))
    }

    pub fn with_transport(endpoint: EndpointConfig, api_key: String, transport: Box<dyn HttpTransport>) -> Self {
        let jitter = Mutex::new(ChaCha8Rng::seed_from_u64(endpoint.jitter_seed));
        Self { endpoint, api_key, transport, jitter, last_request: Mutex::new(None) }
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        &self.endpoint
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.endpoint.backoff_base_ms as f64 * 2f64.powi(attempt as i32 - 1);
        let factor = self.jitter.lock().unwrap().random_range(0.8..=1.2);
        Duration::from_millis((base * factor).round() as u64)
    }

    fn throttle(&self) {
        if self.endpoint.min_interval_ms == 0 {
            return;
        }
        let mut last = self.last_request.lock().unwrap();
        let gap = Duration::from_millis(self.endpoint.min_interval_ms);
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < gap {
                std::thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    /// POSTs `body` to `base_url/path`. Returns the 2xx body and the number
    /// of attempts spent.
    pub fn post(&self, path: &str, body: &str) -> Result<(String, u32), GatewayError> {
        let url = format!("{}/{}", self.endpoint.base_url.trim_end_matches('/'), path);
        let headers = vec![("Authorization".to_string(), format!("Bearer {}", self.api_key))];
        let timeout = Duration::from_millis(self.endpoint.timeout_ms);
        let max = self.endpoint.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=max {
            self.throttle();
            match self.transport.post_json(&url, &headers, body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => return Ok((resp.body, attempt)),
                Ok(resp) if is_transient_status(resp.status) => last = format!("HTTP {}", resp.status),
                Ok(resp) => return Err(GatewayError::Http { status: resp.status, body: resp.body }),
                Err(TransportError::Other(msg)) => return Err(GatewayError::Transport(msg)),
                Err(e) => last = e.to_string(),
            }
            tracing::warn!(attempt, %last, %url, "transient HTTP failure");
            if attempt < max {
                std::thread::sleep(self.backoff(attempt));
            }
        }
        Err(GatewayError::RetryExhausted { attempts: max, last })
    }
}

/// Chat-completions endpoint.
pub struct HttpChatGateway {
    client: HttpClient,
}

impl HttpChatGateway {
    pub fn from_env(endpoint: EndpointConfig) -> Result<Self, GatewayError> {
        Ok(Self { client: HttpClient::from_env(endpoint)? })
    }

    pub fn with_transport(endpoint: EndpointConfig, api_key: String, transport: Box<dyn HttpTransport>) -> Self {
        Self { client: HttpClient::with_transport(endpoint, api_key, transport) }
    }

    pub fn request_body(&self, req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": req.model_name,
            "messages": req.messages,
        });
        if let Some(t) = req.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = req.max_output_tokens {
            body["max_tokens"] = json!(m);
        }
        if let (Some(effort), Some(field)) = (req.reasoning_effort, &self.client.endpoint.reasoning_effort_field) {
            if effort != crate::corpus::ReasoningEffort::Default {
                body[field.as_str()] = json!(effort.as_str());
            }
        }
        body
    }
}

fn is_transient_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

fn parse_reply(body: &str) -> Result<(String, TokenUsage), GatewayError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let usage = TokenUsage {
        prompt: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok((content.to_string(), usage))
}

impl ChatGateway for HttpChatGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let started = Instant::now();
        let (body, attempts) = self.client.post("chat/completions", &self.request_body(req).to_string())?;
        let (content, usage) = parse_reply(&body)?;
        Ok(ChatReply { content, usage, latency_ms: started.elapsed().as_millis() as u64, attempts })
    }
}
