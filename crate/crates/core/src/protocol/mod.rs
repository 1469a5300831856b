//! Conversation state machines: the generation phase and the five discussion
//! structures, driven through per-agent chat gateways.

mod action;
mod generation;
mod instructed;
mod iterative;
mod open;
mod progressive;
mod prompts;
mod registry;
mod session;
mod speaker;
mod state;
#[cfg(test)]
pub(crate) mod testkit;

pub use action::{parse_agent_action, ActionKind, AgentAction, ParseFailure};
pub use generation::{run_generation_phase, GenerationOutcome};
pub use instructed::run_instructed_discussion;
pub use iterative::{run_iterative_refinement, ITERATIVE_PAST_WINDOW};
pub use open::{run_open_discussion, SYNTHESIS_WORDS};
pub use progressive::{parse_idea_list, run_progressive, DIVERGENT_IDEAS_PER_AGENT};
pub use prompts::{Prompts, PROMPT_VERSION};
pub use registry::{run_condition, Conversation, DiscussionProtocol, ProtocolRegistry};
pub use session::{Session, Team, MAX_ATTEMPTS};
pub use speaker::{next_speaker, SpeakerChoice, SpeakerPolicy, SpeakerRegistry};
pub use state::{DiscussionState, LengthPolicy};

use crate::corpus::CorpusError;
use crate::gateway::GatewayError;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("agent {agent}: {source}")]
    Gateway {
        agent: u32,
        #[source]
        source: GatewayError,
    },
    /// The conversation cannot continue; it is persisted with failure status.
    #[error("protocol failure: {0}")]
    Failure(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no eligible speaker")]
    NoEligibleSpeaker,
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
