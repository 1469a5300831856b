use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{ConditionSelector, ModelPlan, RunnerError};
use crate::corpus::{AgentProfile, ConditionSpec, Persona, PersonaPlan, PersonaSource, ReasoningEffort};
use crate::matrix::ConditionMatrix;

const SHIPPED_PERSONAS: &str = include_str!("../../assets/personas.toml");

/// Constituent models of the mixed plan, assigned to agent slots in turn.
pub const MIXED_MODELS: [&str; 3] = ["deepseek-r1", "gemini-2.5-pro", "o3"];

const TEMPERATURE: f64 = 1.0;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonaFile {
    #[allow(dead_code)]
    version: String,
    persona: Vec<PersonaEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonaEntry {
    persona_id: String,
    description: String,
}

fn parse_personas(text: &str) -> Result<Vec<Persona>, RunnerError> {
    let file: PersonaFile = toml::from_str(text).map_err(|e| RunnerError::Config(format!("persona file: {e}")))?;
    let personas: Vec<Persona> = file
        .persona
        .into_iter()
        .map(|p| Persona { persona_id: p.persona_id, description: p.description, source: PersonaSource::HumanDerived })
        .collect();
    for p in &personas {
        p.validate()?;
    }
    Ok(personas)
}

pub fn shipped_personas() -> Vec<Persona> {
    parse_personas(SHIPPED_PERSONAS).expect("shipped persona asset parses")
}

pub fn load_personas(path: &Path) -> Result<Vec<Persona>, RunnerError> {
    parse_personas(&super::read_to_string(path)?)
}

/// Agent profiles for one condition under one model plan.
pub fn team_for(condition: &ConditionSpec, plan: ModelPlan, personas: &[Persona]) -> Result<Vec<AgentProfile>, RunnerError> {
    let n = condition.team_size as usize;
    let needed = match condition.persona_plan {
        PersonaPlan::None => 0,
        PersonaPlan::Same => 1,
        PersonaPlan::Different => n,
    };
    if personas.len() < needed {
        return Err(RunnerError::Config(format!(
            "condition {} needs {needed} personas, {} available",
            condition.condition_id,
            personas.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            let persona = match condition.persona_plan {
                PersonaPlan::None => Persona::generic(i + 1),
                PersonaPlan::Same => personas[0].clone(),
                PersonaPlan::Different => personas[i].clone(),
            };
            let (model, temperature, effort) = match plan {
                ModelPlan::Gpt41 => ("gpt-4.1", Some(TEMPERATURE), None),
                ModelPlan::O3High => ("o3", None, Some(ReasoningEffort::High)),
                ModelPlan::O3Low => ("o3", None, Some(ReasoningEffort::Low)),
                ModelPlan::Mixed => match MIXED_MODELS[i % MIXED_MODELS.len()] {
                    "o3" => ("o3", None, Some(ReasoningEffort::Default)),
                    m => (m, Some(TEMPERATURE), None),
                },
            };
            AgentProfile {
                agent_index: i as u32,
                model_name: model.to_string(),
                temperature,
                reasoning_effort: effort,
                persona,
            }
        })
        .collect())
}

/// One (condition, team) pair of an expanded plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub condition: ConditionSpec,
    pub agents: Vec<AgentProfile>,
    pub plan: ModelPlan,
}

fn admissible(row: &ConditionSpec, plan: ModelPlan) -> bool {
    !plan.is_restricted() || (row.team_size == 3 && row.persona_plan == PersonaPlan::Different)
}

pub fn expand_condition_matrix(
    matrix: &ConditionMatrix,
    selector: &ConditionSelector,
    plan: ModelPlan,
    personas: &[Persona],
) -> Result<Vec<Cell>, RunnerError> {
    let rows: Vec<&ConditionSpec> = match selector {
        ConditionSelector::Keyword(k) if k == "all" => {
            matrix.rows().iter().filter(|r| admissible(r, plan)).collect()
        }
        ConditionSelector::Keyword(k) => {
            return Err(RunnerError::Config(format!("condition selector {k:?} is neither \"all\" nor a list of ids")))
        }
        ConditionSelector::Ids(ids) => {
            let mut rows = Vec::with_capacity(ids.len());
            for id in ids {
                let row = matrix.row(*id).ok_or_else(|| RunnerError::Config(format!("unknown condition {id}")))?;
                if !admissible(row, plan) {
                    return Err(RunnerError::Config(format!(
                        "condition {id} is not run under the {} plan (needs 3 agents with different personas)",
                        plan.as_str()
                    )));
                }
                rows.push(row);
            }
            rows
        }
    };
    rows.into_iter()
        .map(|row| {
            let agents = team_for(row, plan, personas)?;
            let condition = row.with_models(agents.iter().map(|a| a.model_name.clone()).collect());
            Ok(Cell { condition, agents, plan })
        })
        .collect()
}

/// Seed of one conversation: the first 8 bytes of a SHA-256 over the master
/// seed, condition id, task id and repetition.
pub fn derive_seed(master_seed: u64, condition_id: u32, task_id: &str, repetition: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"ideaforge/conversation");
    h.update(master_seed.to_le_bytes());
    h.update(condition_id.to_le_bytes());
    h.update((task_id.len() as u64).to_le_bytes());
    h.update(task_id.as_bytes());
    h.update(repetition.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn conversation_id(condition_id: u32, task_id: &str, plan: ModelPlan, repetition: u32) -> String {
    format!("c{condition_id:02}-{task_id}-{}-r{repetition:02}", plan.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gpt_plan_covers_all_rows() {
        let cells = expand_condition_matrix(
            ConditionMatrix::shipped(),
            &ConditionSelector::all(),
            ModelPlan::Gpt41,
            &shipped_personas(),
        )
        .unwrap();
        assert_eq!(cells.len(), 71);
        for c in &cells {
            c.condition.validate().unwrap();
            assert!(c.agents.iter().all(|a| a.model_name == "gpt-4.1" && a.temperature == Some(1.0)));
        }
    }

    #[test]
    fn reasoning_plans_keep_three_different() {
        let m = ConditionMatrix::shipped();
        let expected = m.rows().iter().filter(|r| r.team_size == 3 && r.persona_plan == PersonaPlan::Different).count();
        for plan in [ModelPlan::O3High, ModelPlan::O3Low, ModelPlan::Mixed] {
            let cells = expand_condition_matrix(m, &ConditionSelector::all(), plan, &shipped_personas()).unwrap();
            assert_eq!(cells.len(), expected);
            assert!(expected > 0 && expected < 71);
        }
        let high = expand_condition_matrix(m, &ConditionSelector::all(), ModelPlan::O3High, &shipped_personas()).unwrap();
        assert!(high[0].agents.iter().all(|a| a.reasoning_effort == Some(ReasoningEffort::High) && a.temperature.is_none()));
    }

    #[test]
    fn mixed_team_has_three_models() {
        let cells =
            expand_condition_matrix(ConditionMatrix::shipped(), &ConditionSelector::ids([66]), ModelPlan::Mixed, &shipped_personas())
                .unwrap();
        let names: std::collections::BTreeSet<&str> = cells[0].agents.iter().map(|a| a.model_name.as_str()).collect();
        assert_eq!(names.len(), 3);
        let o3 = cells[0].agents.iter().find(|a| a.model_name == "o3").unwrap();
        assert_eq!(o3.reasoning_effort, Some(ReasoningEffort::Default));
        AgentProfile::validate_team(&cells[0].agents).unwrap();
    }

    #[test]
    fn invalid_selection_under_plan_is_an_error() {
        let m = ConditionMatrix::shipped();
        let err = expand_condition_matrix(m, &ConditionSelector::ids([60]), ModelPlan::O3Low, &shipped_personas());
        assert!(matches!(err, Err(RunnerError::Config(_))));
        let err = expand_condition_matrix(m, &ConditionSelector::ids([99]), ModelPlan::Gpt41, &shipped_personas());
        assert!(matches!(err, Err(RunnerError::Config(_))));
    }

    #[test]
    fn personas_follow_the_plan() {
        let p = shipped_personas();
        let m = ConditionMatrix::shipped();
        for row in m.rows() {
            let team = team_for(row, ModelPlan::Gpt41, &p).unwrap();
            let ids: std::collections::BTreeSet<&str> = team.iter().map(|a| a.persona.persona_id.as_str()).collect();
            match row.persona_plan {
                PersonaPlan::None => assert!(team.iter().all(|a| a.persona.source == PersonaSource::Generic)),
                PersonaPlan::Same => assert_eq!(ids.len(), 1),
                PersonaPlan::Different => assert_eq!(ids.len(), team.len()),
            }
        }
    }

    #[test]
    fn seeds_are_pure_and_distinct() {
        assert_eq!(derive_seed(7, 9, "plastic_waste", 1), derive_seed(7, 9, "plastic_waste", 1));
        let all: std::collections::BTreeSet<u64> =
            (1..=71).flat_map(|c| (1..=3).map(move |r| derive_seed(7, c, "plastic_waste", r))).collect();
        assert_eq!(all.len(), 71 * 3);
        assert_ne!(derive_seed(7, 9, "plastic_waste", 1), derive_seed(8, 9, "plastic_waste", 1));
        assert_eq!(conversation_id(9, "plastic_waste", ModelPlan::O3High, 2), "c09-plastic_waste-o3-high-r02");
    }
}
