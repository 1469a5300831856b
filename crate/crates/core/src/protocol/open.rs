use rand::Rng;
use serde_json::json;

use super::prompts::fill;
use super::session::payload;
use super::{LengthPolicy, ProtocolError, Session, SpeakerRegistry};
use crate::corpus::{word_count, Action, Idea, Phase};
use crate::gateway::RequestPurpose;

/// Target word range of the closing synthesis.
pub const SYNTHESIS_WORDS: std::ops::RangeInclusive<usize> = 80..=100;

/// Free-form turns up to the limit, then one randomly drawn agent writes the
/// final idea.
pub fn run_open_discussion(session: &mut Session, policy: LengthPolicy) -> Result<Idea, ProtocolError> {
    let speaker_policy = SpeakerRegistry::builtin().for_plan(session.condition.order_plan)?;
    let n = session.team.size();
    let all: Vec<u32> = (0..n).collect();
    let prompts = session.team.prompts;
    let mut previous = None;
    for _ in 0..policy.max_turns {
        let speaker = speaker_policy
            .next(&all, n, previous, &mut session.rng, &mut |_| Err(ProtocolError::NoEligibleSpeaker))?
            .agent;
        previous = Some(speaker);
        let prompt = fill(&prompts.open_turn, &[("history", &session.history())]);
        let (text, reply) = session.team.ask_text(speaker, prompt, RequestPurpose::OpenTurn)?;
        session.record(speaker, Phase::Discussion, Action::Speak, text, None, Some(&reply));
    }

    let synthesizer = session.rng.random_range(0..n);
    let prompt = fill(&prompts.synthesis, &[("history", &session.history())]);
    let (text, reply) = session.team.ask_text(synthesizer, prompt, RequestPurpose::Synthesis)?;
    let words = word_count(&text);
    let idea = session.new_idea(text.clone());
    session.record(
        synthesizer,
        Phase::Synthesis,
        Action::Synthesize,
        text,
        payload([
            ("idea_id", json!(idea.idea_id)),
            ("word_count", json!(words)),
            ("length_violation", json!(!SYNTHESIS_WORDS.contains(&words))),
        ]),
        Some(&reply),
    );
    Ok(idea)
}
