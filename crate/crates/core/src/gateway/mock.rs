use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Read};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    rough_tokens, ChatGateway, ChatReply, ChatRequest, GatewayError, GatewayFactory,
    RequestPurpose, TokenUsage,
};
use crate::corpus::AgentProfile;

fn reply(req: &ChatRequest, content: String) -> ChatReply {
    let prompt = req.messages.iter().map(|m| rough_tokens(&m.content)).sum();
    ChatReply {
        usage: TokenUsage { prompt, completion: rough_tokens(&content) },
        content,
        latency_ms: 0,
        attempts: 1,
    }
}

/// One line of a mock script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub match_text: Option<String>,
    pub reply: String,
}

impl ScriptRule {
    pub fn reply(text: impl Into<String>) -> Self {
        Self { match_text: None, reply: text.into() }
    }
}

/// Replays a script in order. A rule with `match` is only eligible when the
/// substring occurs in some message of the request; the first eligible
/// unconsumed rule answers.
pub struct ScriptedGateway {
    rules: Mutex<VecDeque<ScriptRule>>,
}

impl ScriptedGateway {
    pub fn new(rules: impl IntoIterator<Item = ScriptRule>) -> Self {
        Self { rules: Mutex::new(rules.into_iter().collect()) }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(ScriptRule::reply))
    }

    pub fn parse_jsonl<R: Read>(source: R) -> Result<Vec<ScriptRule>, GatewayError> {
        let mut rules = Vec::new();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Script(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: ScriptRule = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Script(format!("line {}: {e}", i + 1)))?;
            rules.push(rule);
        }
        Ok(rules)
    }

    pub fn remaining(&self) -> usize {
        self.rules.lock().unwrap().len()
    }
}

impl ChatGateway for ScriptedGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let mut rules = self.rules.lock().unwrap();
        let pos = rules
            .iter()
            .position(|r| match &r.match_text {
                None => true,
                Some(m) => req.messages.iter().any(|msg| msg.content.contains(m.as_str())),
            })
            .ok_or(GatewayError::MockExhausted)?;
        let rule = rules.remove(pos).expect("position is in range");
        Ok(reply(req, rule.reply))
    }
}

type Responder = Box<dyn FnMut(&ChatRequest) -> String + Send>;

/// Closure-backed mock, mostly for protocol fixtures.
pub struct FnGateway {
    f: Mutex<Responder>,
}

impl FnGateway {
    pub fn new(f: impl FnMut(&ChatRequest) -> String + Send + 'static) -> Self {
        Self { f: Mutex::new(Box::new(f)) }
    }
}

impl ChatGateway for FnGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let content = (self.f.lock().unwrap())(req);
        Ok(reply(req, content))
    }
}

/// Returns the last user message, minus an optional prefix.
pub struct EchoGateway {
    strip_prefix: String,
}

impl EchoGateway {
    pub fn new() -> Self {
        Self { strip_prefix: String::new() }
    }

    pub fn stripping(prefix: impl Into<String>) -> Self {
        Self { strip_prefix: prefix.into() }
    }
}

impl Default for EchoGateway {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatGateway for EchoGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let last = req.last_user_message().unwrap_or_default();
        let content = last.strip_prefix(self.strip_prefix.as_str()).unwrap_or(last).to_string();
        Ok(reply(req, content))
    }
}

const SUBJECTS: &[&str] = &[
    "a neighbourhood swap network", "a subscription refill service", "a gamified school challenge",
    "a community repair cafe", "a mobile learning van", "a peer mentoring circle",
    "a modular logistics hub", "a transparent supplier ledger", "a shared tool library",
    "a citizen science kit", "a public song booth", "a micro grant scheme",
    "a wellness credit system", "a robotic sorting kiosk", "a rotating apprenticeship",
];
const VERBS: &[&str] = &[
    "rewards", "connects", "trains", "maps", "pairs", "funds", "tracks", "celebrates",
    "redesigns", "schedules",
];
const OBJECTS: &[&str] = &[
    "local residents", "small suppliers", "first-year staff", "rural students", "retail partners",
    "city councils", "volunteer coaches", "families", "night-shift workers", "young artists",
];
const BENEFITS: &[&str] = &[
    "so that waste is cut at the source", "which lowers costs for everyone",
    "building trust over time", "while keeping the idea cheap to pilot",
    "and makes progress visible week by week", "to reach people who are usually left out",
    "which spreads good habits through social ties", "so the approach scales city by city",
];

/// Deterministic stand-in for a model: well-formed replies for every
/// request purpose, drawn from a generator seeded per agent and conversation.
pub struct SyntheticGateway {
    rng: Mutex<ChaCha8Rng>,
}

impl SyntheticGateway {
    pub fn new(seed: u64, agent_index: u32) -> Self {
        let mut h = Sha256::new();
        h.update(b"synthetic-agent");
        h.update(seed.to_le_bytes());
        h.update(agent_index.to_le_bytes());
        let digest: [u8; 32] = h.finalize().into();
        Self { rng: Mutex::new(ChaCha8Rng::from_seed(digest)) }
    }

    fn sentence(rng: &mut ChaCha8Rng) -> String {
        format!(
            "Create {} that {} {} {}.",
            SUBJECTS[rng.random_range(0..SUBJECTS.len())],
            VERBS[rng.random_range(0..VERBS.len())],
            OBJECTS[rng.random_range(0..OBJECTS.len())],
            BENEFITS[rng.random_range(0..BENEFITS.len())],
        )
    }

    fn words(rng: &mut ChaCha8Rng, target: usize) -> String {
        let mut out = String::new();
        while out.split_whitespace().count() < target {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&Self::sentence(rng));
        }
        out.split_whitespace().take(target).collect::<Vec<_>>().join(" ")
    }
}

impl ChatGateway for SyntheticGateway {
    fn complete(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let mut rng = self.rng.lock().unwrap();
        let rng = &mut *rng;
        let content = match req.purpose {
            RequestPurpose::RateIdea | RequestPurpose::RateNovelty | RequestPurpose::RateCreativity => {
                format!("Rating: {}", rng.random_range(1..=10))
            }
            RequestPurpose::DesireToSpeak => format!("{}", rng.random_range(1..=7)),
            RequestPurpose::InstructedAction => {
                let roll: f64 = rng.random();
                if roll < 0.35 {
                    "Agree: No changes needed".to_string()
                } else if roll < 0.8 {
                    format!("Modify: {} - Reason: it widens the reach.", Self::sentence(rng))
                } else {
                    format!("Replace: {} - Reason: a fresher angle.", Self::sentence(rng))
                }
            }
            RequestPurpose::DivergentIdeas => (1..=5)
                .map(|i| format!("{i}. {}", Self::sentence(rng)))
                .collect::<Vec<_>>()
                .join("\n"),
            RequestPurpose::Synthesis => Self::words(rng, 90),
            RequestPurpose::OpenTurn => {
                let n = rng.random_range(1..=3);
                (0..n).map(|_| Self::sentence(rng)).collect::<Vec<_>>().join(" ")
            }
            RequestPurpose::Harmonize => {
                let last = req.last_user_message().unwrap_or_default();
                last.strip_prefix(super::harmonize::user_prefix()).unwrap_or(last).to_string()
            }
            _ => Self::sentence(rng),
        };
        Ok(reply(req, content))
    }
}

pub struct SyntheticFactory;

impl GatewayFactory for SyntheticFactory {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn build(&self, agent: &AgentProfile, seed: u64) -> Result<Arc<dyn ChatGateway>, GatewayError> {
        Ok(Arc::new(SyntheticGateway::new(seed, agent.agent_index)))
    }
}

/// Script rules per agent index; each conversation gets fresh copies.
pub struct ScriptedFactory {
    scripts: BTreeMap<u32, Vec<ScriptRule>>,
}

impl ScriptedFactory {
    pub fn new(scripts: BTreeMap<u32, Vec<ScriptRule>>) -> Self {
        Self { scripts }
    }
}

impl GatewayFactory for ScriptedFactory {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn build(&self, agent: &AgentProfile, _seed: u64) -> Result<Arc<dyn ChatGateway>, GatewayError> {
        let rules = self
            .scripts
            .get(&agent.agent_index)
            .ok_or_else(|| GatewayError::Script(format!("no script for agent {}", agent.agent_index)))?;
        Ok(Arc::new(ScriptedGateway::new(rules.clone())))
    }
}
