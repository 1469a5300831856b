use serde_json::json;

use super::prompts::fill;
use super::session::{column_means, payload, rank_desc};
use super::{ProtocolError, Session};
use crate::corpus::{Action, GenerationMode, Idea, Phase};
use crate::gateway::RequestPurpose;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub ideas: Vec<Idea>,
    /// ratings[agent][idea], each 1-10.
    pub ratings: Vec<Vec<u32>>,
    pub means: Vec<f64>,
    /// Idea indices from best to worst mean, earliest first on ties.
    pub ranking: Vec<usize>,
    pub selected: Idea,
}

impl GenerationOutcome {
    pub fn ranked(&self) -> impl Iterator<Item = &Idea> {
        self.ranking.iter().map(|&i| &self.ideas[i])
    }

    /// Ideas ranked 2 to `size + 1`.
    pub fn pool(&self, size: usize) -> Vec<Idea> {
        self.ranked().skip(1).take(size).cloned().collect()
    }
}

/// Each agent proposes ideas, then rates every idea 1-10. Pool conditions
/// run extra proposal rounds so that ranks 2-6 exist.
pub fn run_generation_phase(session: &mut Session) -> Result<GenerationOutcome, ProtocolError> {
    let mode = session.condition.generation_mode;
    if mode == GenerationMode::Absent {
        return Err(ProtocolError::Precondition("condition has no generation phase".into()));
    }
    let n = session.team.size();
    let needed = session.condition.pool_size() as u32 + 1;
    let rounds = if session.condition.pool_size() > 0 { needed.div_ceil(n) } else { 1 };
    let prompts = session.team.prompts;

    let mut ideas: Vec<Idea> = Vec::new();
    for _ in 0..rounds {
        for agent in 0..n {
            let prompt = if mode == GenerationMode::Interactive && !ideas.is_empty() {
                let listed: Vec<String> =
                    ideas.iter().enumerate().map(|(i, idea)| format!("{}. {}", i + 1, idea.raw_text)).collect();
                fill(&prompts.generate_interactive, &[("ideas", &listed.join("\n"))])
            } else {
                prompts.generate_nominal.clone()
            };
            let (text, reply) = session.team.ask_text(agent, prompt, RequestPurpose::GenerateIdea)?;
            let idea = session.new_idea(text.clone());
            session.record(
                agent,
                Phase::Generation,
                Action::Propose,
                text,
                payload([("idea_id", json!(idea.idea_id))]),
                Some(&reply),
            );
            ideas.push(idea);
        }
    }

    let mut ratings = vec![vec![0u32; ideas.len()]; n as usize];
    for agent in 0..n {
        for (j, idea) in ideas.iter().enumerate() {
            let prompt = fill(&prompts.rate_creativity, &[("idea", &idea.raw_text)]);
            let (value, reply) = session.team.ask_rating(agent, prompt, 1, 10, RequestPurpose::RateIdea)?;
            ratings[agent as usize][j] = value;
            session.record(
                agent,
                Phase::Rating,
                Action::Rate,
                reply.content.clone(),
                payload([("idea_id", json!(idea.idea_id)), ("rating", json!(value))]),
                Some(&reply),
            );
        }
    }

    let means = column_means(&ratings);
    let ranking = rank_desc(&means);
    let selected = ideas[ranking[0]].clone();
    Ok(GenerationOutcome { ideas, ratings, means, ranking, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::testkit::{scripted_session, Script};

    fn respond(ratings: fn(u32, &str) -> u32) -> impl Fn(u32, &crate::gateway::ChatRequest) -> String {
        move |agent, req| match req.purpose {
            RequestPurpose::GenerateIdea => format!("idea from agent {agent}"),
            RequestPurpose::RateIdea => ratings(agent, req.last_user_message().unwrap()).to_string(),
            p => panic!("unexpected {p:?}"),
        }
    }

    #[test]
    fn ties_select_earliest() {
        let mut s = scripted_session(1, Script::new(respond(|_, _| 5)));
        let out = run_generation_phase(&mut s).unwrap();
        assert_eq!(out.ideas.len(), 3);
        assert_eq!(out.selected.raw_text, "idea from agent 0");
        assert_eq!(s.turns().len(), 3 + 9);
    }

    #[test]
    fn argmax_wins() {
        let mut s = scripted_session(1, Script::new(respond(|_, p| if p.contains("agent 2") { 7 } else { 5 })));
        let out = run_generation_phase(&mut s).unwrap();
        assert_eq!(out.means, vec![5.0, 5.0, 7.0]);
        assert_eq!(out.selected.raw_text, "idea from agent 2");
    }

    #[test]
    fn nominal_prompts_show_no_peer_ideas() {
        let script = Script::new(respond(|_, _| 5));
        let mut s = scripted_session(7, script.clone());
        run_generation_phase(&mut s).unwrap();
        let prompts = script.prompts(RequestPurpose::GenerateIdea);
        assert_eq!(prompts.len(), 3);
        assert!(prompts.iter().all(|p| !p.contains("idea from agent")));
    }

    #[test]
    fn interactive_prompts_show_earlier_ideas() {
        let script = Script::new(respond(|_, _| 5));
        let mut s = scripted_session(1, script.clone());
        run_generation_phase(&mut s).unwrap();
        let prompts = script.prompts(RequestPurpose::GenerateIdea);
        assert!(!prompts[0].contains("idea from agent"));
        assert!(prompts[2].contains("idea from agent 0") && prompts[2].contains("idea from agent 1"));
        assert!(prompts[2].contains("different"));
    }

    #[test]
    fn pool_condition_generates_at_least_six() {
        let mut s = scripted_session(41, Script::new(respond(|_, p| p.len() as u32 % 10 + 1)));
        let out = run_generation_phase(&mut s).unwrap();
        assert!(out.ideas.len() >= 6);
        let pool = out.pool(5);
        assert_eq!(pool.len(), 5);
        let ranked: Vec<_> = out.ranked().map(|i| i.idea_id.clone()).collect();
        assert_eq!(pool.iter().map(|i| i.idea_id.clone()).collect::<Vec<_>>(), ranked[1..6]);
    }

    #[test]
    fn unreadable_rating_fails_after_reprompts() {
        let mut s = scripted_session(
            1,
            Script::new(|agent, req| match req.purpose {
                RequestPurpose::GenerateIdea => format!("idea {agent}"),
                _ => "great".into(),
            }),
        );
        assert!(matches!(run_generation_phase(&mut s), Err(ProtocolError::Failure(_))));
    }
}
