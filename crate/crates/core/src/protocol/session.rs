use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use super::prompts::fill;
use super::{ProtocolError, Prompts};
use crate::corpus::{
    Action, AgentProfile, ConditionSpec, ConversationStatus, ConversationTranscript, Idea, IdeaSource,
    Phase, Provenance, TaskPrompt, Turn,
};
use crate::gateway::{parse_scalar_rating, ChatGateway, ChatMessage, ChatReply, ChatRequest, RequestPurpose};

/// Replies per request before giving up: the first ask plus two re-prompts.
pub const MAX_ATTEMPTS: u32 = 3;

/// Agents, their gateways and the prompt set. Read-only during a conversation.
pub struct Team {
    pub agents: Vec<AgentProfile>,
    gateways: Vec<Arc<dyn ChatGateway>>,
    pub task: TaskPrompt,
    pub prompts: &'static Prompts,
}

impl Team {
    pub fn new(
        agents: Vec<AgentProfile>,
        gateways: Vec<Arc<dyn ChatGateway>>,
        task: TaskPrompt,
    ) -> Result<Self, ProtocolError> {
        if agents.is_empty() || agents.len() != gateways.len() {
            return Err(ProtocolError::Precondition(format!(
                "{} agents but {} gateways",
                agents.len(),
                gateways.len()
            )));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.agent_index as usize != i {
                return Err(ProtocolError::Precondition(format!(
                    "agent at position {i} has agent_index {}",
                    a.agent_index
                )));
            }
        }
        AgentProfile::validate_team(&agents)?;
        task.validate()?;
        Ok(Self { agents, gateways, task, prompts: Prompts::shipped() })
    }

    pub fn size(&self) -> u32 {
        self.agents.len() as u32
    }

    /// One request: system prompt (persona and task) followed by `messages`.
    pub fn converse(
        &self,
        agent: u32,
        messages: &[ChatMessage],
        purpose: RequestPurpose,
    ) -> Result<ChatReply, ProtocolError> {
        let profile = &self.agents[agent as usize];
        let mut all = Vec::with_capacity(messages.len() + 1);
        all.push(ChatMessage::system(self.prompts.system_for(profile, &self.task)));
        all.extend_from_slice(messages);
        let req = ChatRequest::for_agent(profile, all, purpose);
        self.gateways[agent as usize]
            .complete(&req)
            .map_err(|source| ProtocolError::Gateway { agent, source })
    }

    /// Asks until `parse` accepts the reply, re-prompting with `reminder`.
    /// Fails the conversation after `attempts` consecutive rejections.
    pub fn ask_parsed<T>(
        &self,
        agent: u32,
        prompt: String,
        purpose: RequestPurpose,
        reminder: &str,
        attempts: u32,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<(T, ChatReply), ProtocolError> {
        let mut messages = vec![ChatMessage::user(prompt)];
        let mut last_error = String::new();
        for _ in 0..attempts {
            let reply = self.converse(agent, &messages, purpose)?;
            match parse(&reply.content) {
                Ok(v) => return Ok((v, reply)),
                Err(e) => {
                    tracing::debug!(agent, error = %e, "reply rejected, re-prompting");
                    last_error = e;
                    messages.push(ChatMessage::assistant(reply.content));
                    messages.push(ChatMessage::user(reminder));
                }
            }
        }
        Err(ProtocolError::Failure(format!(
            "agent {agent}: {attempts} unusable replies in a row (last: {last_error})"
        )))
    }

    pub fn ask_rating(
        &self,
        agent: u32,
        prompt: String,
        lo: u32,
        hi: u32,
        purpose: RequestPurpose,
    ) -> Result<(u32, ChatReply), ProtocolError> {
        let lo_s = lo.to_string();
        let hi_s = hi.to_string();
        let reminder = fill(&self.prompts.rating_reminder, &[("lo", &lo_s), ("hi", &hi_s)]);
        self.ask_parsed(agent, prompt, purpose, &reminder, MAX_ATTEMPTS, |text| {
            parse_scalar_rating(text, lo, hi).map_err(|e| e.to_string())
        })
    }

    /// Free-text request; an empty reply counts as unusable.
    pub fn ask_text(&self, agent: u32, prompt: String, purpose: RequestPurpose) -> Result<(String, ChatReply), ProtocolError> {
        self.ask_parsed(agent, prompt, purpose, "Your previous reply was empty. Please answer.", MAX_ATTEMPTS, |t| {
            let t = t.trim();
            if t.is_empty() {
                Err("empty reply".into())
            } else {
                Ok(t.to_string())
            }
        })
    }
}

/// One conversation in progress.
pub struct Session {
    pub condition: ConditionSpec,
    pub team: Team,
    pub rng: ChaCha8Rng,
    pub conversation_id: String,
    pub seed: u64,
    turns: Vec<Turn>,
    idea_seq: u32,
}

impl Session {
    pub fn new(condition: ConditionSpec, team: Team, conversation_id: impl Into<String>, seed: u64) -> Self {
        Self {
            condition,
            team,
            rng: ChaCha8Rng::seed_from_u64(seed),
            conversation_id: conversation_id.into(),
            seed,
            turns: Vec::new(),
            idea_seq: 0,
        }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn record(
        &mut self,
        agent: u32,
        phase: Phase,
        action: Action,
        content: impl Into<String>,
        payload: Option<Map<String, Value>>,
        reply: Option<&ChatReply>,
    ) -> u32 {
        let turn_index = self.turns.len() as u32;
        self.turns.push(Turn {
            turn_index,
            agent_index: agent,
            phase,
            action,
            content: content.into(),
            payload,
            token_count: reply.map(|r| r.usage.total()),
        });
        turn_index
    }

    pub fn new_idea(&mut self, text: impl Into<String>) -> Idea {
        self.idea_seq += 1;
        Idea {
            idea_id: format!("{}:i{}", self.conversation_id, self.idea_seq),
            raw_text: text.into(),
            harmonized_text: None,
            provenance: Provenance {
                conversation_id: Some(self.conversation_id.clone()),
                condition_id: Some(self.condition.condition_id),
                task_id: self.team.task.task_id.clone(),
                source: IdeaSource::LlmTeam,
            },
        }
    }

    /// "Agent k: text" lines of the discussion so far.
    pub fn history(&self) -> String {
        let lines: Vec<String> = self
            .turns
            .iter()
            .filter(|t| t.phase == Phase::Discussion)
            .map(|t| format!("Agent {}: {}", t.agent_index + 1, t.content))
            .collect();
        if lines.is_empty() {
            self.team.prompts.empty_history.clone()
        } else {
            lines.join("\n")
        }
    }

    /// Turns the protocol result into a transcript. Protocol failures keep
    /// the turns so far; other errors propagate.
    pub fn finish(self, outcome: Result<Idea, ProtocolError>) -> Result<(ConversationTranscript, Option<String>), ProtocolError> {
        let (status, final_idea, reason) = match outcome {
            Ok(idea) => (ConversationStatus::Completed, Some(idea), None),
            Err(ProtocolError::Failure(reason)) if !self.turns.is_empty() => {
                tracing::warn!(conversation = %self.conversation_id, %reason, "protocol failure");
                (ConversationStatus::ProtocolFailure, None, Some(reason))
            }
            Err(e) => return Err(e),
        };
        let transcript = ConversationTranscript {
            conversation_id: self.conversation_id,
            condition: self.condition,
            task: self.team.task,
            seed: self.seed,
            turns: self.turns,
            final_idea,
            status,
        };
        transcript.validate()?;
        Ok((transcript, reason))
    }
}

/// Compact payload builder.
pub(crate) fn payload<const N: usize>(entries: [(&str, Value); N]) -> Option<Map<String, Value>> {
    Some(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Index of the largest value, earliest on ties.
pub(crate) fn argmax_earliest(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Column means of an agents × items matrix.
pub(crate) fn column_means(matrix: &[Vec<u32>]) -> Vec<f64> {
    let cols = matrix.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| matrix.iter().map(|row| row[j] as f64).sum::<f64>() / matrix.len() as f64)
        .collect()
}

/// Indices sorted by descending value, stable for ties.
pub(crate) fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}
