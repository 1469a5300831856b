use std::collections::{BTreeSet, VecDeque};

use super::ProtocolError;
use crate::corpus::{Idea, LengthPlan};

/// Turn limit and the number of rounds before agreement is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthPolicy {
    pub max_turns: u32,
    pub min_rounds_before_agree: u32,
}

impl LengthPolicy {
    pub fn new(max_turns: u32, min_rounds_before_agree: u32) -> Result<Self, ProtocolError> {
        if max_turns == 0 || min_rounds_before_agree >= max_turns {
            return Err(ProtocolError::Precondition(format!(
                "length policy needs 0 <= min rounds ({min_rounds_before_agree}) < max turns ({max_turns})"
            )));
        }
        Ok(Self { max_turns, min_rounds_before_agree })
    }

    pub fn from_plan(plan: LengthPlan) -> Option<Self> {
        match plan {
            LengthPlan::Absent => None,
            LengthPlan::Fixed30 => Some(Self { max_turns: 30, min_rounds_before_agree: 0 }),
            LengthPlan::Fixed60 => Some(Self { max_turns: 60, min_rounds_before_agree: 0 }),
            LengthPlan::Cap60Min30 => Some(Self { max_turns: 60, min_rounds_before_agree: 30 }),
        }
    }
}

pub const MAX_POOL: usize = 5;

/// Mutable state of an instructed or iterative discussion.
#[derive(Debug, Clone)]
pub struct DiscussionState {
    current: Idea,
    pub round: u32,
    agreed: BTreeSet<u32>,
    pool: VecDeque<Idea>,
    history: Vec<(u32, String)>,
    consecutive_same_selection: u32,
}

impl DiscussionState {
    pub fn new(initial: Idea, pool: Vec<Idea>) -> Result<Self, ProtocolError> {
        if initial.raw_text.trim().is_empty() {
            return Err(ProtocolError::Precondition("initial idea is empty".into()));
        }
        if pool.len() > MAX_POOL {
            return Err(ProtocolError::Precondition(format!("pool of {} exceeds {MAX_POOL}", pool.len())));
        }
        let history = vec![(0, initial.idea_id.clone())];
        Ok(Self {
            current: initial,
            round: 0,
            agreed: BTreeSet::new(),
            pool: pool.into(),
            history,
            consecutive_same_selection: 0,
        })
    }

    pub fn current(&self) -> &Idea {
        &self.current
    }

    /// Replaces the current idea; all agreement is void afterwards.
    pub fn set_current(&mut self, idea: Idea) {
        self.history.push((self.round, idea.idea_id.clone()));
        self.current = idea;
        self.agreed.clear();
    }

    pub fn agree(&mut self, agent: u32) {
        self.agreed.insert(agent);
    }

    pub fn agreed(&self) -> &BTreeSet<u32> {
        &self.agreed
    }

    pub fn all_agreed(&self, team_size: u32) -> bool {
        (0..team_size).all(|a| self.agreed.contains(&a))
    }

    pub fn eligible(&self, team_size: u32) -> Vec<u32> {
        (0..team_size).filter(|a| !self.agreed.contains(a)).collect()
    }

    pub fn take_pool_head(&mut self) -> Option<Idea> {
        self.pool.pop_front()
    }

    pub fn pool(&self) -> impl Iterator<Item = &Idea> {
        self.pool.iter()
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// (round, idea_id) of every change of current idea, starting with the
    /// initial idea at round 0.
    pub fn history(&self) -> &[(u32, String)] {
        &self.history
    }

    pub fn consecutive_same_selection(&self) -> u32 {
        self.consecutive_same_selection
    }

    /// Records the round's top idea. Returns true when it differs from the
    /// current idea.
    pub fn select(&mut self, top: Idea) -> bool {
        if top.idea_id == self.current.idea_id {
            self.consecutive_same_selection += 1;
            false
        } else {
            self.set_current(top);
            self.consecutive_same_selection = 1;
            true
        }
    }
}
