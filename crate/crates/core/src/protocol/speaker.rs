use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ProtocolError;
use crate::corpus::OrderPlan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerChoice {
    pub agent: u32,
    /// Self-rated desire to speak, per eligible agent (hand-raising only).
    pub desires: Vec<(u32, u32)>,
}

/// Desire query for one agent: returns a 1-7 score.
pub type DesireFn<'a> = dyn FnMut(u32) -> Result<u32, ProtocolError> + 'a;

pub trait SpeakerPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn next(
        &self,
        eligible: &[u32],
        team_size: u32,
        previous: Option<u32>,
        rng: &mut ChaCha8Rng,
        desire: &mut DesireFn<'_>,
    ) -> Result<SpeakerChoice, ProtocolError>;
}

/// Rotating order: the first eligible agent after the previous speaker.
pub struct FixedOrder;
/// Uniform draw over eligible agents.
pub struct RandomOrder;
/// Highest desire wins, lowest index on ties.
pub struct HandRaising;

impl SpeakerPolicy for FixedOrder {
    fn name(&self) -> &'static str {
        "fix"
    }

    fn next(
        &self,
        eligible: &[u32],
        team_size: u32,
        previous: Option<u32>,
        _rng: &mut ChaCha8Rng,
        _desire: &mut DesireFn<'_>,
    ) -> Result<SpeakerChoice, ProtocolError> {
        let start = previous.map_or(0, |p| p + 1);
        (0..team_size)
            .map(|k| (start + k) % team_size)
            .find(|a| eligible.contains(a))
            .map(|agent| SpeakerChoice { agent, desires: Vec::new() })
            .ok_or(ProtocolError::NoEligibleSpeaker)
    }
}

impl SpeakerPolicy for RandomOrder {
    fn name(&self) -> &'static str {
        "random"
    }

    fn next(
        &self,
        eligible: &[u32],
        _team_size: u32,
        _previous: Option<u32>,
        rng: &mut ChaCha8Rng,
        _desire: &mut DesireFn<'_>,
    ) -> Result<SpeakerChoice, ProtocolError> {
        if eligible.is_empty() {
            return Err(ProtocolError::NoEligibleSpeaker);
        }
        let agent = eligible[rng.random_range(0..eligible.len())];
        Ok(SpeakerChoice { agent, desires: Vec::new() })
    }
}

impl SpeakerPolicy for HandRaising {
    fn name(&self) -> &'static str {
        "raise"
    }

    fn next(
        &self,
        eligible: &[u32],
        _team_size: u32,
        _previous: Option<u32>,
        _rng: &mut ChaCha8Rng,
        desire: &mut DesireFn<'_>,
    ) -> Result<SpeakerChoice, ProtocolError> {
        let mut sorted = eligible.to_vec();
        sorted.sort_unstable();
        let mut desires = Vec::with_capacity(sorted.len());
        for a in sorted {
            desires.push((a, desire(a)?));
        }
        let mut best: Option<(u32, u32)> = None;
        for &(a, d) in &desires {
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((a, d));
            }
        }
        let (agent, _) = best.ok_or(ProtocolError::NoEligibleSpeaker)?;
        Ok(SpeakerChoice { agent, desires })
    }
}

#[derive(Clone)]
pub struct SpeakerRegistry {
    policies: BTreeMap<&'static str, Arc<dyn SpeakerPolicy>>,
}

impl SpeakerRegistry {
    pub fn empty() -> Self {
        Self { policies: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FixedOrder));
        r.register(Arc::new(RandomOrder));
        r.register(Arc::new(HandRaising));
        r
    }

    pub fn register(&mut self, policy: Arc<dyn SpeakerPolicy>) {
        self.policies.insert(policy.name(), policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SpeakerPolicy>, ProtocolError> {
        self.policies
            .get(name)
            .cloned()
            .ok_or_else(|| ProtocolError::Unknown { kind: "speaker policy", name: name.to_string() })
    }

    pub fn for_plan(&self, order: OrderPlan) -> Result<Arc<dyn SpeakerPolicy>, ProtocolError> {
        self.get(order.as_str())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.policies.keys().copied().collect()
    }
}

/// Picks the next speaker under `order`.
pub fn next_speaker(
    order: OrderPlan,
    eligible: &[u32],
    team_size: u32,
    previous: Option<u32>,
    rng: &mut ChaCha8Rng,
    desire: &mut DesireFn<'_>,
) -> Result<SpeakerChoice, ProtocolError> {
    SpeakerRegistry::builtin().for_plan(order)?.next(eligible, team_size, previous, rng, desire)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn no_desire(_: u32) -> Result<u32, ProtocolError> {
        panic!("desire not expected")
    }

    #[test]
    fn fixed_rotates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = |prev, elig: &[u32], rng: &mut ChaCha8Rng| {
            next_speaker(OrderPlan::Fix, elig, 3, prev, rng, &mut no_desire).unwrap().agent
        };
        assert_eq!(pick(None, &[0, 1, 2], &mut rng), 0);
        assert_eq!(pick(Some(2), &[0, 1, 2], &mut rng), 0);
        assert_eq!(pick(Some(0), &[0, 2], &mut rng), 2);
        assert!(next_speaker(OrderPlan::Fix, &[], 3, None, &mut rng, &mut no_desire).is_err());
    }

    #[test]
    fn raise_argmax_lowest_index_on_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let desires = [5u32, 7, 7];
        let choice =
            next_speaker(OrderPlan::Raise, &[2, 0, 1], 3, None, &mut rng, &mut |a| Ok(desires[a as usize])).unwrap();
        assert_eq!(choice.agent, 1);
        assert_eq!(choice.desires, vec![(0, 5), (1, 7), (2, 7)]);
    }

    #[test]
    fn random_is_seeded() {
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| next_speaker(OrderPlan::Random, &[0, 1, 2], 3, None, &mut rng, &mut no_desire).unwrap().agent)
                .collect::<Vec<_>>()
        };
        assert_eq!(seq(7), seq(7));
        assert!(seq(7).iter().all(|a| *a < 3));
    }

    #[test]
    fn registry_by_name() {
        let r = SpeakerRegistry::builtin();
        assert_eq!(r.names(), vec!["fix", "raise", "random"]);
        assert!(r.for_plan(OrderPlan::Absent).is_err());
    }
}
