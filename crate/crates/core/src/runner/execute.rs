use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::plan::{conversation_id, derive_seed, expand_condition_matrix, load_personas, shipped_personas, Cell};
use super::{atomic_write, RunConfig, RunMode, RunnerError};
use crate::corpus::{
    load_transcript_file, save_ideas, transcript_to_string, ConversationStatus, ConversationTranscript, Idea,
    ManifestEntry, RunManifest, TaskPrompt,
};
use crate::gateway::{ChatGateway, GatewayFactory, LiveFactory, ScriptRule, ScriptedFactory, ScriptedGateway, SyntheticFactory};
use crate::matrix::ConditionMatrix;
use crate::protocol::{run_condition, PROMPT_VERSION};

/// One (condition, task, repetition) unit of work.
#[derive(Debug, Clone)]
pub struct Unit {
    pub entry: ManifestEntry,
    pub cell: Cell,
    pub task: TaskPrompt,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    /// Conversations executed by this invocation.
    pub executed: usize,
    /// Conversations already on disk and skipped.
    pub resumed: usize,
}

impl RunOutcome {
    pub fn has_failures(&self) -> bool {
        !self.manifest.failures.is_empty()
    }
}

/// Expands the config into work units, in a fixed order.
pub fn plan_units(config: &RunConfig) -> Result<Vec<Unit>, RunnerError> {
    config.validate()?;
    let matrix = match &config.design_matrix {
        Some(tsv) => ConditionMatrix::from_tsv(tsv)?,
        None => ConditionMatrix::shipped().clone(),
    };
    let personas = match &config.personas {
        Some(p) => load_personas(p)?,
        None => shipped_personas(),
    };
    let tasks = config.task_prompts()?;
    let mut units = Vec::new();
    for plan in &config.model_plans {
        for cell in expand_condition_matrix(&matrix, &config.conditions, *plan, &personas)? {
            for task in &tasks {
                for rep in 1..=config.repetitions {
                    let id = cell.condition.condition_id;
                    let seed = derive_seed(config.master_seed, id, &task.task_id, rep);
                    units.push(Unit {
                        entry: ManifestEntry {
                            conversation_id: conversation_id(id, &task.task_id, *plan, rep),
                            condition_id: id,
                            task_id: task.task_id.clone(),
                            repetition: rep,
                            seed,
                            model_plan: plan.as_str().to_string(),
                        },
                        cell: cell.clone(),
                        task: task.clone(),
                    });
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = units.iter().find(|u| !seen.insert(u.entry.conversation_id.clone())) {
        return Err(RunnerError::Config(format!("duplicate conversation id {}", dup.entry.conversation_id)));
    }
    Ok(units)
}

fn load_scripts(config: &RunConfig) -> Result<(BTreeMap<u32, Vec<ScriptRule>>, BTreeMap<String, String>), RunnerError> {
    let mut scripts = BTreeMap::new();
    let mut digests = BTreeMap::new();
    for (agent, path) in config.script_indices()? {
        let bytes = std::fs::read(&path).map_err(|e| RunnerError::io(&path, e))?;
        digests.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        let rules = ScriptedGateway::parse_jsonl(&bytes[..])
            .map_err(|e| RunnerError::Config(format!("script {}: {e}", path.display())))?;
        scripts.insert(agent, rules);
    }
    Ok((scripts, digests))
}

/// Builds the gateway factory for the config's mode. Live mode checks every
/// model's endpoint and credential before anything runs.
pub(crate) fn build_factory(
    config: &RunConfig,
    units: &[Unit],
) -> Result<(Arc<dyn GatewayFactory>, BTreeMap<String, String>, Vec<String>), RunnerError> {
    match config.mode {
        RunMode::Mock => {
            let (scripts, digests) = load_scripts(config)?;
            if scripts.is_empty() {
                return Ok((Arc::new(SyntheticFactory), digests, vec!["synthetic".into()]));
            }
            let needed = units.iter().map(|u| u.cell.condition.team_size).max().unwrap_or(0);
            if let Some(missing) = (0..needed).find(|i| !scripts.contains_key(i)) {
                return Err(RunnerError::Config(format!("mock mode has scripts but none for agent {missing}")));
            }
            Ok((Arc::new(ScriptedFactory::new(scripts)), digests, vec!["scripted".into()]))
        }
        RunMode::Live => {
            let models: BTreeSet<&str> =
                units.iter().flat_map(|u| u.cell.agents.iter().map(|a| a.model_name.as_str())).collect();
            if let Some(m) = models.iter().find(|m| !config.endpoints.contains_key(**m)) {
                return Err(RunnerError::Config(format!("no endpoint configured for model {m}")));
            }
            let used: BTreeMap<String, _> = config
                .endpoints
                .iter()
                .filter(|(m, _)| models.contains(m.as_str()))
                .map(|(m, e)| (m.clone(), e.clone()))
                .collect();
            let factory = LiveFactory::from_env(&used)?;
            let endpoints = used.iter().map(|(m, e)| format!("{m}={}", e.base_url)).collect();
            Ok((Arc::new(factory), BTreeMap::new(), endpoints))
        }
    }
}

/// Runs one unit and serializes its transcript.
pub fn conversation_bytes(
    unit: &Unit,
    factory: &dyn GatewayFactory,
) -> Result<(ConversationTranscript, String, Option<String>), RunnerError> {
    let seed = unit.entry.seed;
    let gateways: Vec<Arc<dyn ChatGateway>> =
        unit.cell.agents.iter().map(|a| factory.build(a, seed)).collect::<Result<_, _>>()?;
    let conv = run_condition(
        &unit.cell.condition,
        &unit.task,
        unit.cell.agents.clone(),
        gateways,
        &unit.entry.conversation_id,
        seed,
    )?;
    let text = transcript_to_string(&conv.transcript)?;
    Ok((conv.transcript, text, conv.failure))
}

pub(crate) fn transcript_path(output_dir: &Path, conversation_id: &str) -> PathBuf {
    output_dir.join("transcripts").join(format!("{conversation_id}.jsonl"))
}

pub(crate) fn run_id(config_toml: &str) -> String {
    hex::encode(&Sha256::digest(config_toml.as_bytes())[..8])
}

enum UnitResult {
    Done(Option<Idea>, Option<String>),
    Resumed(Option<Idea>, Option<String>),
    Failed(String),
}

fn status_failure(t: &ConversationTranscript, reason: Option<String>) -> Option<String> {
    (t.status == ConversationStatus::ProtocolFailure).then(|| reason.unwrap_or_else(|| "protocol failure".into()))
}

/// Executes every (condition, task, repetition) unit of the config, skipping
/// conversations whose transcript already exists, and writes the ideas file
/// and manifest.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome, RunnerError> {
    let units = plan_units(config)?;
    let (factory, script_digests, gateway_endpoints) = build_factory(config, &units)?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out.join("transcripts")).map_err(|e| RunnerError::io(out, e))?;
    tracing::info!(units = units.len(), mode = config.mode.as_str(), "starting run");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| RunnerError::Config(format!("thread pool: {e}")))?;
    let results: Vec<UnitResult> = pool.install(|| {
        units
            .par_iter()
            .map(|unit| {
                let id = &unit.entry.conversation_id;
                let path = transcript_path(out, id);
                if path.exists() {
                    return match load_transcript_file(&path) {
                        Ok(mut ts) if ts.len() == 1 => {
                            let t = ts.remove(0);
                            let failure = status_failure(&t, None);
                            UnitResult::Resumed(t.final_idea, failure)
                        }
                        Ok(_) => UnitResult::Failed(format!("{}: not a single transcript", path.display())),
                        Err(e) => UnitResult::Failed(format!("{}: {e}", path.display())),
                    };
                }
                tracing::info!(conversation_id = %id, seed = unit.entry.seed, "derived conversation seed");
                match conversation_bytes(unit, factory.as_ref()) {
                    Ok((t, text, failure)) => match atomic_write(&path, text.as_bytes()) {
                        Ok(()) => UnitResult::Done(t.final_idea.clone(), status_failure(&t, failure)),
                        Err(e) => UnitResult::Failed(e.to_string()),
                    },
                    Err(e) => UnitResult::Failed(e.to_string()),
                }
            })
            .collect()
    });

    let mut ideas = Vec::new();
    let mut failures = Vec::new();
    let (mut executed, mut resumed) = (0, 0);
    for (unit, r) in units.iter().zip(results) {
        let id = &unit.entry.conversation_id;
        let (idea, failure) = match r {
            UnitResult::Done(i, f) => {
                executed += 1;
                (i, f)
            }
            UnitResult::Resumed(i, f) => {
                resumed += 1;
                (i, f)
            }
            UnitResult::Failed(reason) => (None, Some(reason)),
        };
        if let Some(reason) = failure {
            tracing::warn!(conversation_id = %id, %reason, "conversation failed");
            failures.push(format!("{id}: {reason}"));
        }
        ideas.extend(idea);
    }
    let mut buf = Vec::new();
    save_ideas(&ideas, &mut buf)?;
    atomic_write(&out.join("ideas.jsonl"), &buf)?;

    let config_toml = config.to_toml();
    let manifest = RunManifest {
        run_id: run_id(&config_toml),
        created_at: chrono::Utc::now().to_rfc3339(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        prompt_version: PROMPT_VERSION.to_string(),
        mode: config.mode.as_str().to_string(),
        master_seed: config.master_seed,
        conditions: units.iter().map(|u| u.entry.condition_id).collect::<BTreeSet<_>>().into_iter().collect(),
        conversations: units.iter().map(|u| u.entry.clone()).collect(),
        gateway_endpoints,
        embedding_model_id: config.embedding.as_ref().map(|e| e.model_id.clone()),
        max_output_tokens: config.max_output_tokens,
        config: config_toml,
        script_digests,
        failures,
    };
    let manifest_path = out.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    atomic_write(&manifest_path, &json)?;
    tracing::info!(executed, resumed, failures = manifest.failures.len(), "run finished");
    Ok(RunOutcome { manifest, manifest_path, executed, resumed })
}
