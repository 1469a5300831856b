use rand::seq::SliceRandom;
use serde_json::json;

use super::prompts::fill;
use super::session::{argmax_earliest, column_means, payload, rank_desc};
use super::{ProtocolError, Session};
use crate::corpus::{Action, Idea, OrderPlan, Phase};
use crate::gateway::RequestPurpose;

pub const DIVERGENT_IDEAS_PER_AGENT: usize = 5;

/// Splits a list reply into items. Numbered or bulleted lines start new
/// items; unmarked lines continue the previous one.
pub fn parse_idea_list(text: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    let mut any_marker = false;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match strip_marker(line) {
            Some(rest) => {
                any_marker = true;
                items.push(rest.to_string());
            }
            None if any_marker => {
                let last = items.last_mut().expect("a marker line came first");
                last.push(' ');
                last.push_str(line);
            }
            None => items.push(line.to_string()),
        }
    }
    items.retain(|i| !i.trim().is_empty());
    items
}

fn strip_marker(line: &str) -> Option<&str> {
    if let Some(rest) = line.strip_prefix(['-', '*', '\u{2022}']) {
        return Some(rest.trim_start());
    }
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    line[digits..].strip_prefix(['.', ')', ':']).map(str::trim_start)
}

fn rating_round(
    session: &mut Session,
    ideas: &[Idea],
    template: &str,
    criterion: &str,
    purpose: RequestPurpose,
) -> Result<Vec<f64>, ProtocolError> {
    let n = session.team.size();
    let mut ratings = vec![vec![0u32; ideas.len()]; n as usize];
    for agent in 0..n {
        for (j, idea) in ideas.iter().enumerate() {
            let prompt = fill(template, &[("idea", &idea.raw_text)]);
            let (value, reply) = session.team.ask_rating(agent, prompt, 1, 10, purpose)?;
            ratings[agent as usize][j] = value;
            session.record(
                agent,
                Phase::Convergent,
                Action::Rate,
                reply.content.clone(),
                payload([("idea_id", json!(idea.idea_id)), ("rating", json!(value)), ("criterion", json!(criterion))]),
                Some(&reply),
            );
        }
    }
    Ok(column_means(&ratings))
}

/// Divergent generation (5 novel ideas per agent), novelty rating, top
/// team-size ideas advance, agent i refines advanced idea i, creativity
/// rating picks the answer.
pub fn run_progressive(session: &mut Session, prior_top_ideas: &[Idea]) -> Result<Idea, ProtocolError> {
    if prior_top_ideas.is_empty() {
        return Err(ProtocolError::Precondition("progressive needs prior top ideas".into()));
    }
    let n = session.team.size();
    let prompts = session.team.prompts;
    let mut order: Vec<u32> = (0..n).collect();
    if session.condition.order_plan == OrderPlan::Random {
        order.shuffle(&mut session.rng);
    }

    let listed = prior_top_ideas.iter().enumerate().map(|(i, idea)| format!("{}. {}", i + 1, idea.raw_text));
    let divergent_prompt = fill(&prompts.divergent, &[("ideas", &listed.collect::<Vec<_>>().join("\n"))]);
    let mut candidates = Vec::new();
    for &agent in &order {
        let (items, reply) = session.team.ask_parsed(
            agent,
            divergent_prompt.clone(),
            RequestPurpose::DivergentIdeas,
            &prompts.divergent_reminder,
            2,
            |text| {
                let items = parse_idea_list(text);
                if items.len() == DIVERGENT_IDEAS_PER_AGENT {
                    Ok(items)
                } else {
                    Err(format!("{} ideas instead of {DIVERGENT_IDEAS_PER_AGENT}", items.len()))
                }
            },
        )?;
        let ideas: Vec<Idea> = items.into_iter().map(|t| session.new_idea(t)).collect();
        let ids: Vec<&str> = ideas.iter().map(|i| i.idea_id.as_str()).collect();
        session.record(
            agent,
            Phase::Divergent,
            Action::Propose,
            reply.content.trim(),
            payload([("idea_ids", json!(ids))]),
            Some(&reply),
        );
        candidates.extend(ideas);
    }

    let novelty = rating_round(session, &candidates, &prompts.rate_novelty, "novelty", RequestPurpose::RateNovelty)?;
    let advanced: Vec<Idea> = rank_desc(&novelty).into_iter().take(n as usize).map(|j| candidates[j].clone()).collect();

    let mut refined = Vec::with_capacity(advanced.len());
    for (i, source) in advanced.iter().enumerate() {
        let agent = i as u32 % n;
        let prompt = fill(&prompts.refine, &[("idea", &source.raw_text)]);
        let (text, reply) = session.team.ask_text(agent, prompt, RequestPurpose::RefineIdea)?;
        let idea = session.new_idea(text.clone());
        session.record(
            agent,
            Phase::Convergent,
            Action::Modify,
            text,
            payload([("source_idea_id", json!(source.idea_id)), ("idea_id", json!(idea.idea_id))]),
            Some(&reply),
        );
        refined.push(idea);
    }

    let creativity =
        rating_round(session, &refined, &prompts.rate_creativity, "creativity", RequestPurpose::RateCreativity)?;
    let best = argmax_earliest(&creativity).expect("team refines at least one idea");
    Ok(refined[best].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::testkit::{scripted_session, Script};

    fn five(agent: u32) -> String {
        (1..=5).map(|k| format!("{k}. novel idea {agent}-{k}")).collect::<Vec<_>>().join("\n")
    }

    fn run(script: Script) -> (Result<Idea, ProtocolError>, Session) {
        let mut s = scripted_session(66, script);
        let prior = vec![s.new_idea("prior top idea")];
        let out = run_progressive(&mut s, &prior);
        (out, s)
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_idea_list("1. a\n2) b\n- c\n\n* d\n5: e"), vec!["a", "b", "c", "d", "e"]);
        assert_eq!(parse_idea_list("1. a\ncontinued\n2. b"), vec!["a continued", "b"]);
        assert_eq!(parse_idea_list("plain\nlines"), vec!["plain", "lines"]);
        assert_eq!(parse_idea_list("2025 plan. one"), vec!["2025 plan. one"]);
    }

    #[test]
    fn fifteen_candidates_and_novelty_top_advances() {
        let (out, s) = run(Script::new(|agent, req| match req.purpose {
            RequestPurpose::DivergentIdeas => five(agent),
            RequestPurpose::RateNovelty => {
                if req.last_user_message().unwrap().contains("novel idea 2-4") { "10" } else { "3" }.into()
            }
            RequestPurpose::RefineIdea => format!("refined by {agent}"),
            RequestPurpose::RateCreativity => "6".into(),
            p => panic!("unexpected {p:?}"),
        }));
        let final_idea = out.unwrap();
        let turns = s.turns();
        let divergent: usize = turns
            .iter()
            .filter(|t| t.phase == Phase::Divergent)
            .map(|t| t.payload.as_ref().unwrap()["idea_ids"].as_array().unwrap().len())
            .sum();
        assert_eq!(divergent, 15);
        let refine_turns: Vec<_> = turns.iter().filter(|t| t.action == Action::Modify).collect();
        assert_eq!(refine_turns.len(), 3);
        // the novelty winner was advanced first, so agent 0 refined it
        let first_source = refine_turns[0].payload.as_ref().unwrap()["source_idea_id"].as_str().unwrap();
        let winner_turn = turns.iter().find(|t| t.phase == Phase::Divergent && t.agent_index == 2).unwrap();
        assert_eq!(first_source, winner_turn.payload.as_ref().unwrap()["idea_ids"][3]);
        // creativity tie goes to the earliest refined idea
        assert_eq!(final_idea.raw_text, "refined by 0");
    }

    #[test]
    fn wrong_count_retried_once_then_fails() {
        let (out, _) = run(Script::new(|_, req| match req.purpose {
            RequestPurpose::DivergentIdeas => "1. only\n2. two".into(),
            _ => "5".into(),
        }));
        assert!(matches!(out, Err(ProtocolError::Failure(_))));

        let calls = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let c = calls.clone();
        let (out, _) = run(Script::new(move |agent, req| match req.purpose {
            RequestPurpose::DivergentIdeas => {
                if c.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 { "1. one".into() } else { five(agent) }
            }
            RequestPurpose::RefineIdea => "refined".into(),
            _ => "5".into(),
        }));
        assert!(out.is_ok());
    }
}
