use std::collections::HashMap;

use serde_json::json;

use super::instructed::propose_initial;
use super::prompts::fill;
use super::session::{column_means, payload};
use super::{DiscussionState, LengthPolicy, ProtocolError, Session, SpeakerRegistry};
use crate::corpus::{Action, Idea, Phase};
use crate::gateway::RequestPurpose;

/// Recently explored ideas shown and re-rated each round.
pub const ITERATIVE_PAST_WINDOW: usize = 3;

/// Propose-rate-select rounds. Stops once the same idea has been on top for
/// team-size consecutive rounds, or after `policy.max_turns` rounds.
pub fn run_iterative_refinement(
    session: &mut Session,
    initial: Option<Idea>,
    policy: LengthPolicy,
) -> Result<DiscussionState, ProtocolError> {
    let initial = match initial {
        Some(idea) => idea,
        None => propose_initial(session)?,
    };
    let mut state = DiscussionState::new(initial, Vec::new())?;
    let speaker_policy = SpeakerRegistry::builtin().for_plan(session.condition.order_plan)?;
    let n = session.team.size();
    let all: Vec<u32> = (0..n).collect();
    let prompts = session.team.prompts;
    let mut proposed_at: HashMap<String, usize> = HashMap::new();
    proposed_at.insert(state.current().idea_id.clone(), 0);
    let mut recent: Vec<Idea> = Vec::new();
    let mut previous = None;

    while state.round < policy.max_turns {
        state.round += 1;
        let round = state.round;
        let proposer = speaker_policy
            .next(&all, n, previous, &mut session.rng, &mut |_| Err(ProtocolError::NoEligibleSpeaker))?
            .agent;
        previous = Some(proposer);

        let past_text = if recent.is_empty() {
            prompts.empty_history.clone()
        } else {
            recent.iter().map(|i| format!("- {}", i.raw_text)).collect::<Vec<_>>().join("\n")
        };
        let prompt = fill(&prompts.iterative_candidate, &[("idea", &state.current().raw_text), ("past", &past_text)]);
        let (text, reply) = session.team.ask_text(proposer, prompt, RequestPurpose::IterativeCandidate)?;
        let candidate = session.new_idea(text.clone());
        proposed_at.insert(candidate.idea_id.clone(), proposed_at.len());
        session.record(
            proposer,
            Phase::Discussion,
            Action::Propose,
            text,
            payload([("idea_id", json!(candidate.idea_id)), ("round", json!(round))]),
            Some(&reply),
        );

        let mut options = vec![state.current().clone(), candidate.clone()];
        options.extend(recent.iter().cloned());
        let mut ratings = vec![vec![0u32; options.len()]; n as usize];
        for agent in 0..n {
            for (j, idea) in options.iter().enumerate() {
                let prompt = fill(&prompts.rate_creativity, &[("idea", &idea.raw_text)]);
                let (value, reply) = session.team.ask_rating(agent, prompt, 1, 10, RequestPurpose::RateIdea)?;
                ratings[agent as usize][j] = value;
                session.record(
                    agent,
                    Phase::Rating,
                    Action::Rate,
                    reply.content.clone(),
                    payload([("idea_id", json!(idea.idea_id)), ("rating", json!(value)), ("round", json!(round))]),
                    Some(&reply),
                );
            }
        }

        let means = column_means(&ratings);
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top = if means[0] == best {
            0
        } else {
            (0..options.len())
                .filter(|&j| means[j] == best)
                .min_by_key(|&j| proposed_at[&options[j].idea_id])
                .expect("at least one option attains the maximum")
        };
        let old_current = state.current().clone();
        let changed = state.select(options[top].clone());
        let new_id = state.current().idea_id.clone();
        let mut next_recent = vec![candidate];
        if changed {
            next_recent.push(old_current);
        }
        next_recent.extend(recent.drain(..));
        let mut seen = std::collections::HashSet::new();
        seen.insert(new_id);
        recent = next_recent.into_iter().filter(|i| seen.insert(i.idea_id.clone())).take(ITERATIVE_PAST_WINDOW).collect();

        tracing::trace!(round, changed, streak = state.consecutive_same_selection(), "iterative selection");
        if state.consecutive_same_selection() >= n {
            break;
        }
    }
    Ok(state)
}
