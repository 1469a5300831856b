use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    run_generation_phase, run_instructed_discussion, run_iterative_refinement, run_open_discussion,
    run_progressive, GenerationOutcome, LengthPolicy, ProtocolError, Session, Team,
};
use crate::corpus::{AgentProfile, ConditionSpec, ConversationTranscript, Discussion, Idea, TaskPrompt};
use crate::gateway::ChatGateway;

/// Generation-phase ideas shown to progressive divergent generation.
const PROGRESSIVE_PRIOR_TOP: usize = 3;

pub trait DiscussionProtocol: Send + Sync {
    /// Matches `Discussion::as_str`.
    fn name(&self) -> &'static str;
    fn run(&self, session: &mut Session, generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError>;
}

fn length(session: &Session) -> Result<LengthPolicy, ProtocolError> {
    LengthPolicy::from_plan(session.condition.length_plan)
        .ok_or_else(|| ProtocolError::Precondition(format!("{} discussion needs a length plan", session.condition.discussion)))
}

struct NoDiscussion;
struct Open;
struct Instructed;
struct Iterative;
struct Progressive;

impl DiscussionProtocol for NoDiscussion {
    fn name(&self) -> &'static str {
        "none"
    }

    fn run(&self, _session: &mut Session, generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError> {
        generation
            .map(|g| g.selected.clone())
            .ok_or_else(|| ProtocolError::Precondition("no-discussion condition without generation".into()))
    }
}

impl DiscussionProtocol for Open {
    fn name(&self) -> &'static str {
        "open"
    }

    fn run(&self, session: &mut Session, _generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError> {
        let policy = length(session)?;
        run_open_discussion(session, policy)
    }
}

impl DiscussionProtocol for Instructed {
    fn name(&self) -> &'static str {
        "instructed"
    }

    fn run(&self, session: &mut Session, generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError> {
        let policy = length(session)?;
        let pool_size = session.condition.pool_size();
        let (initial, pool) = match generation {
            Some(g) => (Some(g.selected.clone()), g.pool(pool_size)),
            None => (None, Vec::new()),
        };
        run_instructed_discussion(session, initial, pool, policy).map(|s| s.current().clone())
    }
}

impl DiscussionProtocol for Iterative {
    fn name(&self) -> &'static str {
        "iterative"
    }

    fn run(&self, session: &mut Session, generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError> {
        let policy = length(session)?;
        run_iterative_refinement(session, generation.map(|g| g.selected.clone()), policy).map(|s| s.current().clone())
    }
}

impl DiscussionProtocol for Progressive {
    fn name(&self) -> &'static str {
        "progressive"
    }

    fn run(&self, session: &mut Session, generation: Option<&GenerationOutcome>) -> Result<Idea, ProtocolError> {
        let g = generation.ok_or_else(|| ProtocolError::Precondition("progressive needs a generation phase".into()))?;
        let prior: Vec<Idea> = g.ranked().take(PROGRESSIVE_PRIOR_TOP).cloned().collect();
        run_progressive(session, &prior)
    }
}

#[derive(Clone)]
pub struct ProtocolRegistry {
    protocols: BTreeMap<&'static str, Arc<dyn DiscussionProtocol>>,
}

impl ProtocolRegistry {
    pub fn empty() -> Self {
        Self { protocols: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(NoDiscussion));
        r.register(Arc::new(Open));
        r.register(Arc::new(Instructed));
        r.register(Arc::new(Iterative));
        r.register(Arc::new(Progressive));
        r
    }

    pub fn register(&mut self, protocol: Arc<dyn DiscussionProtocol>) {
        self.protocols.insert(protocol.name(), protocol);
    }

    pub fn get(&self, discussion: Discussion) -> Result<Arc<dyn DiscussionProtocol>, ProtocolError> {
        self.protocols
            .get(discussion.as_str())
            .cloned()
            .ok_or_else(|| ProtocolError::Unknown { kind: "protocol", name: discussion.as_str().to_string() })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.protocols.keys().copied().collect()
    }
}

/// A finished conversation. `failure` carries the reason when the
/// transcript status is protocol_failure.
#[derive(Debug, Clone)]
pub struct Conversation {
    pub transcript: ConversationTranscript,
    pub failure: Option<String>,
}

/// Runs one condition end to end: optional generation phase, then the
/// condition's discussion structure.
pub fn run_condition(
    condition: &ConditionSpec,
    task: &TaskPrompt,
    agents: Vec<AgentProfile>,
    gateways: Vec<Arc<dyn ChatGateway>>,
    conversation_id: &str,
    seed: u64,
) -> Result<Conversation, ProtocolError> {
    condition.validate()?;
    if agents.len() != condition.team_size as usize {
        return Err(ProtocolError::Precondition(format!(
            "{} agents for a team of {}",
            agents.len(),
            condition.team_size
        )));
    }
    let protocol = ProtocolRegistry::builtin().get(condition.discussion)?;
    let team = Team::new(agents, gateways, task.clone())?;
    let mut session = Session::new(condition.clone(), team, conversation_id, seed);
    let outcome = (|| {
        let generation = match condition.generation_mode {
            crate::corpus::GenerationMode::Absent => None,
            _ => Some(run_generation_phase(&mut session)?),
        };
        protocol.run(&mut session, generation.as_ref())
    })();
    let (transcript, failure) = session.finish(outcome)?;
    Ok(Conversation { transcript, failure })
}
