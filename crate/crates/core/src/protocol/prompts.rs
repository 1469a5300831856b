use std::sync::OnceLock;

use serde::Deserialize;

use crate::corpus::{AgentProfile, TaskPrompt};

const PROMPTS_TOML: &str = include_str!("../../assets/prompts/protocol.toml");

/// Version of the shipped prompt asset, recorded in run manifests.
pub const PROMPT_VERSION: &str = "protocol.toml/1";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prompts {
    pub version: String,
    pub system: String,
    pub empty_history: String,
    pub generate_nominal: String,
    pub generate_interactive: String,
    pub rate_creativity: String,
    pub rating_reminder: String,
    pub initial_idea: String,
    pub instructed_turn: String,
    pub option_agree: String,
    pub option_agree_locked: String,
    pub option_modify: String,
    pub option_replace_pool: String,
    pub option_replace_new: String,
    pub action_reminder: String,
    pub agree_rejected: String,
    pub desire: String,
    pub iterative_candidate: String,
    pub open_turn: String,
    pub synthesis: String,
    pub divergent: String,
    pub divergent_reminder: String,
    pub rate_novelty: String,
    pub refine: String,
}

impl Prompts {
    pub fn shipped() -> &'static Prompts {
        static P: OnceLock<Prompts> = OnceLock::new();
        P.get_or_init(|| toml::from_str(PROMPTS_TOML).expect("shipped prompt asset parses"))
    }

    pub fn system_for(&self, agent: &AgentProfile, task: &TaskPrompt) -> String {
        fill(&self.system, &[("persona", &agent.persona.description), ("task", &task.full_prompt())])
    }
}

/// Replaces each `{key}` with its value.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}
