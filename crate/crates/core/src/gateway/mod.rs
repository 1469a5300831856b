//! Chat-completion access for agents: one trait, several backends (live HTTP,
//! scripted, synthetic, echo), a by-name factory registry, and the parsing
//! helpers protocols use on replies.

mod harmonize;
mod http;
mod mock;
mod parse;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{AgentProfile, ReasoningEffort};

pub use harmonize::{
    detect_style_violation, harmonize_idea, harmonize_request, Harmonized, HARMONIZE_MODEL,
    HARMONIZE_SYSTEM_PROMPT, HARMONIZE_USER_TEMPLATE,
};
pub use http::{
    api_key_var, EndpointConfig, HttpChatGateway, HttpClient, HttpResponse, HttpTransport, TransportError,
    UreqTransport,
};
pub use mock::{
    EchoGateway, FnGateway, ScriptRule, ScriptedGateway, ScriptedFactory, SyntheticFactory,
    SyntheticGateway,
};
pub use parse::{parse_scalar_rating, RatingParseError};

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

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// What a request asks for. Never sent over the wire; synthetic mocks use
/// it to produce well-formed replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RequestPurpose {
    GenerateIdea,
    RateIdea,
    DesireToSpeak,
    InitialIdea,
    InstructedAction,
    IterativeCandidate,
    OpenTurn,
    Synthesis,
    DivergentIdeas,
    RateNovelty,
    RefineIdea,
    RateCreativity,
    Harmonize,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub reasoning_effort: Option<ReasoningEffort>,
    pub purpose: RequestPurpose,
}

impl ChatRequest {
    pub fn for_agent(agent: &AgentProfile, messages: Vec<ChatMessage>, purpose: RequestPurpose) -> Self {
        Self {
            model_name: agent.model_name.clone(),
            messages,
            temperature: agent.temperature,
            max_output_tokens: None,
            reasoning_effort: agent.reasoning_effort,
            purpose,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::Precondition("request has no messages".into()));
        }
        if self.temperature.is_some() && self.reasoning_effort.is_some() {
            return Err(GatewayError::Precondition(
                "temperature and reasoning_effort cannot both be set".into(),
            ));
        }
        Ok(())
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub content: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    /// Transport attempts spent on this logical request.
    pub attempts: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetryExhausted { attempts: u32, last: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("mock script exhausted")]
    MockExhausted,
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("no endpoint configured for model {0}")]
    NoEndpoint(String),
    #[error("unknown gateway kind {0:?}")]
    UnknownKind(String),
    #[error("harmonized text has {0} words")]
    TooLong(usize),
    #[error("mock script: {0}")]
    Script(String),
}

pub trait ChatGateway: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError>;
}

impl<G: ChatGateway + ?Sized> ChatGateway for Arc<G> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        (**self).complete(req)
    }
}

/// Builds one gateway per agent per conversation, so mock state never leaks
/// between conversations.
pub trait GatewayFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, agent: &AgentProfile, conversation_seed: u64) -> Result<Arc<dyn ChatGateway>, GatewayError>;
}

/// Live endpoints keyed by model name. Gateways are shared across
/// conversations so the per-endpoint rate limit holds globally.
pub struct LiveFactory {
    gateways: BTreeMap<String, Arc<HttpChatGateway>>,
}

impl LiveFactory {
    pub fn from_env(endpoints: &BTreeMap<String, EndpointConfig>) -> Result<Self, GatewayError> {
        let mut gateways = BTreeMap::new();
        for (model, cfg) in endpoints {
            gateways.insert(model.clone(), Arc::new(HttpChatGateway::from_env(cfg.clone())?));
        }
        Ok(Self { gateways })
    }
}

impl GatewayFactory for LiveFactory {
    fn name(&self) -> &'static str {
        "live"
    }

    fn build(&self, agent: &AgentProfile, _seed: u64) -> Result<Arc<dyn ChatGateway>, GatewayError> {
        let gw = self
            .gateways
            .get(&agent.model_name)
            .ok_or_else(|| GatewayError::NoEndpoint(agent.model_name.clone()))?;
        Ok(gw.clone() as Arc<dyn ChatGateway>)
    }
}

#[derive(Default)]
pub struct GatewayRegistry {
    factories: BTreeMap<&'static str, Arc<dyn GatewayFactory>>,
}

impl GatewayRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, factory: Arc<dyn GatewayFactory>) {
        self.factories.insert(factory.name(), factory);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn GatewayFactory>, GatewayError> {
        self.factories.get(name).cloned().ok_or_else(|| GatewayError::UnknownKind(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }
}

/// Approximate token count for mocks: whitespace words.
pub(crate) fn rough_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
