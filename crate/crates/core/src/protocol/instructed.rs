use rand::Rng;
use serde_json::{json, Map, Value};

use super::action::{parse_agent_action, ActionKind};
use super::prompts::fill;
use super::session::MAX_ATTEMPTS;
use super::{LengthPolicy, ProtocolError, Session, SpeakerRegistry};
use super::DiscussionState;
use crate::corpus::{Action, Idea, OrderPlan, Phase};
use crate::gateway::{ChatMessage, RequestPurpose};

/// Agreement re-prompts before a premature Agree is recorded as rejected.
const AGREE_REPROMPTS: u32 = 2;

/// Proposes the opening idea when no generation phase ran.
pub(crate) fn propose_initial(session: &mut Session) -> Result<Idea, ProtocolError> {
    let agent = match session.condition.order_plan {
        OrderPlan::Random => session.rng.random_range(0..session.team.size()),
        _ => 0,
    };
    let prompt = session.team.prompts.initial_idea.clone();
    let (text, reply) = session.team.ask_text(agent, prompt, RequestPurpose::InitialIdea)?;
    let idea = session.new_idea(text.clone());
    let payload = [("idea_id", json!(idea.idea_id)), ("initial", json!(true))];
    session.record(agent, Phase::Discussion, Action::Propose, text, super::session::payload(payload), Some(&reply));
    Ok(idea)
}

/// Agree/Modify/Replace discussion. Returns the final state; the current
/// idea at exit is the team's answer.
pub fn run_instructed_discussion(
    session: &mut Session,
    initial: Option<Idea>,
    pool: Vec<Idea>,
    policy: LengthPolicy,
) -> Result<DiscussionState, ProtocolError> {
    if pool.len() != session.condition.pool_size() {
        return Err(ProtocolError::Precondition(format!(
            "pool has {} ideas, condition expects {}",
            pool.len(),
            session.condition.pool_size()
        )));
    }
    let initial = match initial {
        Some(idea) => idea,
        None => propose_initial(session)?,
    };
    let mut state = DiscussionState::new(initial, pool)?;
    let speaker_policy = SpeakerRegistry::builtin().for_plan(session.condition.order_plan)?;
    let n = session.team.size();
    let prompts = session.team.prompts;
    let min_rounds = policy.min_rounds_before_agree.to_string();
    let mut previous = None;

    while state.round < policy.max_turns {
        let history = session.history();
        let locked = state.round < policy.min_rounds_before_agree;
        let idea_text = state.current().raw_text.clone();

        let eligible = state.eligible(n);
        let choice = {
            let team = &session.team;
            let desire_prompt = fill(&prompts.desire, &[("idea", &idea_text), ("history", &history)]);
            let mut desire = |agent: u32| {
                team.ask_rating(agent, desire_prompt.clone(), 1, 7, RequestPurpose::DesireToSpeak).map(|(v, _)| v)
            };
            speaker_policy.next(&eligible, n, previous, &mut session.rng, &mut desire)?
        };
        let speaker = choice.agent;

        let mut options = Vec::new();
        options.push(if locked {
            fill(&prompts.option_agree_locked, &[("min_rounds", &min_rounds)])
        } else {
            prompts.option_agree.clone()
        });
        options.push(prompts.option_modify.clone());
        options.push(match state.pool().next() {
            Some(head) => fill(&prompts.option_replace_pool, &[("pool_idea", &head.raw_text)]),
            None => prompts.option_replace_new.clone(),
        });
        let prompt = fill(
            &prompts.instructed_turn,
            &[("idea", &idea_text), ("history", &history), ("options", &options.join("\n"))],
        );

        let mut messages = vec![ChatMessage::user(prompt)];
        let mut parse_failures = 0;
        let mut rejected_agrees = 0;
        let (action, reply) = loop {
            let reply = session.team.converse(speaker, &messages, RequestPurpose::InstructedAction)?;
            match parse_agent_action(&reply.content) {
                Err(e) => {
                    parse_failures += 1;
                    if parse_failures >= MAX_ATTEMPTS {
                        return Err(ProtocolError::Failure(format!(
                            "agent {speaker}: {parse_failures} unparseable actions in a row ({e})"
                        )));
                    }
                    messages.push(ChatMessage::assistant(reply.content));
                    messages.push(ChatMessage::user(prompts.action_reminder.clone()));
                }
                Ok(a) if a.kind == ActionKind::Agree && locked && rejected_agrees < AGREE_REPROMPTS => {
                    rejected_agrees += 1;
                    parse_failures = 0;
                    messages.push(ChatMessage::assistant(reply.content));
                    messages.push(ChatMessage::user(fill(&prompts.agree_rejected, &[("min_rounds", &min_rounds)])));
                }
                Ok(a) => break (a, reply),
            }
        };

        let mut p = Map::new();
        p.insert("round".into(), json!(state.round));
        if rejected_agrees > 0 {
            p.insert("rejected_agree_attempts".into(), json!(rejected_agrees));
        }
        if !choice.desires.is_empty() {
            let desires: Map<String, Value> =
                choice.desires.iter().map(|(a, d)| (a.to_string(), json!(d))).collect();
            p.insert("desires".into(), Value::Object(desires));
        }
        let turn_action = match action.kind {
            ActionKind::Agree => {
                p.insert("accepted".into(), json!(!locked));
                if !locked {
                    state.agree(speaker);
                }
                Action::Agree
            }
            ActionKind::Modify => {
                let idea = session.new_idea(action.idea_text.clone().unwrap_or_default());
                p.insert("idea_id".into(), json!(idea.idea_id));
                state.set_current(idea);
                Action::Modify
            }
            ActionKind::Replace => {
                let idea = match state.take_pool_head() {
                    Some(pooled) => {
                        p.insert("source".into(), json!("pool"));
                        p.insert("pool_remaining".into(), json!(state.pool_len()));
                        pooled
                    }
                    None => {
                        p.insert("source".into(), json!("generated"));
                        session.new_idea(action.idea_text.clone().unwrap_or_default())
                    }
                };
                p.insert("idea_id".into(), json!(idea.idea_id));
                state.set_current(idea);
                Action::Replace
            }
        };
        if let Some(reason) = &action.reason {
            p.insert("reason".into(), json!(reason));
        }
        session.record(speaker, Phase::Discussion, turn_action, reply.content.trim(), Some(p), Some(&reply));
        state.round += 1;
        previous = Some(speaker);
        if state.all_agreed(n) {
            break;
        }
    }
    Ok(state)
}
