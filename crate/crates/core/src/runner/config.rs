use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::corpus::TaskPrompt;
use crate::embedding::EmbeddingConfig;
use crate::gateway::EndpointConfig;

pub const DEFAULT_REPETITIONS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Live,
    Mock,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Live => "live",
            RunMode::Mock => "mock",
        }
    }
}

/// `"all"` or an explicit list of condition ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConditionSelector {
    Keyword(String),
    Ids(Vec<u32>),
}

impl Default for ConditionSelector {
    fn default() -> Self {
        ConditionSelector::Keyword("all".into())
    }
}

impl ConditionSelector {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn ids(ids: impl IntoIterator<Item = u32>) -> Self {
        ConditionSelector::Ids(ids.into_iter().collect())
    }
}

/// Which models staff the agent slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelPlan {
    #[serde(rename = "gpt-4.1")]
    Gpt41,
    #[serde(rename = "o3-high")]
    O3High,
    #[serde(rename = "o3-low")]
    O3Low,
    #[serde(rename = "mixed")]
    Mixed,
}

impl ModelPlan {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelPlan::Gpt41 => "gpt-4.1",
            ModelPlan::O3High => "o3-high",
            ModelPlan::O3Low => "o3-low",
            ModelPlan::Mixed => "mixed",
        }
    }

    /// Reasoning and mixed plans only staff three-agent teams with distinct personas.
    pub fn is_restricted(self) -> bool {
        self != ModelPlan::Gpt41
    }
}

fn default_tasks() -> Vec<String> {
    TaskPrompt::builtin().into_iter().map(|t| t.task_id).collect()
}

fn default_plans() -> Vec<ModelPlan> {
    vec![ModelPlan::Gpt41]
}

fn default_repetitions() -> u32 {
    DEFAULT_REPETITIONS
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_tasks")]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub conditions: ConditionSelector,
    #[serde(default = "default_plans")]
    pub model_plans: Vec<ModelPlan>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub output_dir: PathBuf,
    /// Human-derived persona file; the shipped set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub personas: Option<PathBuf>,
    /// Design table in the shipped TSV layout; the shipped 71 rows when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_matrix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
    /// Mock scripts keyed by agent index ("0", "1", ...).
    #[serde(default)]
    pub scripts: BTreeMap<String, PathBuf>,
    /// Chat endpoints keyed by model name.
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingConfig>,
}

impl RunConfig {
    /// A mock config over the shipped matrix with one task and one repetition.
    pub fn mock(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            tasks: vec!["plastic_waste".into()],
            conditions: ConditionSelector::all(),
            model_plans: default_plans(),
            repetitions: 1,
            mode: RunMode::Mock,
            master_seed: 0,
            parallelism: default_parallelism(),
            output_dir: output_dir.into(),
            personas: None,
            design_matrix: None,
            max_output_tokens: None,
            scripts: BTreeMap::new(),
            endpoints: BTreeMap::new(),
            embedding: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = super::read_to_string(path)?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.personas.as_mut() {
            fix(p);
        }
        self.scripts.values_mut().for_each(fix);
        if let Some(dir) = self.embedding.as_mut().and_then(|e| e.cache_dir.as_mut()) {
            fix(dir);
        }
    }

    pub fn task_prompts(&self) -> Result<Vec<TaskPrompt>, RunnerError> {
        if self.tasks.is_empty() {
            return Err(RunnerError::Config("no tasks selected".into()));
        }
        self.tasks
            .iter()
            .map(|id| {
                TaskPrompt::builtin_by_id(id).ok_or_else(|| RunnerError::Config(format!("unknown task {id:?}")))
            })
            .collect()
    }

    /// Script agent indices, parsed from the string keys.
    pub fn script_indices(&self) -> Result<BTreeMap<u32, PathBuf>, RunnerError> {
        self.scripts
            .iter()
            .map(|(k, p)| {
                k.parse::<u32>()
                    .map(|i| (i, p.clone()))
                    .map_err(|_| RunnerError::Config(format!("script key {k:?} is not an agent index")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let fail = |m: String| Err(RunnerError::Config(m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.parallelism == 0 {
            return fail("parallelism must be at least 1".into());
        }
        if self.model_plans.is_empty() {
            return fail("no model plans selected".into());
        }
        if let ConditionSelector::Keyword(k) = &self.conditions {
            if k != "all" {
                return fail(format!("condition selector {k:?} is neither \"all\" nor a list of ids"));
            }
        }
        self.task_prompts()?;
        self.script_indices()?;
        if self.mode == RunMode::Live && !self.scripts.is_empty() {
            return fail("scripts are only used in mock mode".into());
        }
        if let Some(e) = &self.embedding {
            e.validate()?;
        }
        Ok(())
    }
}
