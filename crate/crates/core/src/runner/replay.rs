use std::path::Path;

use rayon::prelude::*;

use super::execute::{build_factory, conversation_bytes, plan_units, transcript_path};
use super::plan::derive_seed;
use super::{read_to_string, RunConfig, RunMode, RunnerError};
use crate::corpus::RunManifest;
use crate::protocol::PROMPT_VERSION;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayVerdict {
    Pass { conversations: usize },
    Fail { conversation_id: String, detail: String },
}

impl ReplayVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ReplayVerdict::Pass { .. })
    }
}

fn first_difference(expected: &str, found: &[u8]) -> Option<String> {
    let e = expected.as_bytes();
    let at = e.iter().zip(found).position(|(a, b)| a != b).or((e.len() != found.len()).then(|| e.len().min(found.len())))?;
    let line = e[..at].iter().filter(|b| **b == b'\n').count() + 1;
    Some(format!("first divergence at byte {at} (line {line}); expected {} bytes, found {}", e.len(), found.len()))
}

/// Re-executes a mock run from its manifest and compares every transcript
/// byte for byte with the files next to the manifest.
pub fn replay(manifest_path: &Path) -> Result<ReplayVerdict, RunnerError> {
    let manifest: RunManifest = serde_json::from_str(&read_to_string(manifest_path)?)?;
    if manifest.mode != RunMode::Mock.as_str() {
        return Err(RunnerError::ReplayRefused(format!(
            "manifest mode is {:?}; live model output is not reproducible, only mock runs can be replayed",
            manifest.mode
        )));
    }
    let version = env!("CARGO_PKG_VERSION");
    if manifest.software_version != version {
        return Err(RunnerError::ReplayRefused(format!(
            "manifest was written by version {}, this is {version}",
            manifest.software_version
        )));
    }
    if manifest.prompt_version != PROMPT_VERSION {
        return Err(RunnerError::ReplayRefused(format!(
            "manifest prompt version {} differs from {PROMPT_VERSION}",
            manifest.prompt_version
        )));
    }
    let config = RunConfig::from_toml(&manifest.config)?;
    let units = plan_units(&config)?;
    let (factory, digests, _) = build_factory(&config, &units)?;
    if digests != manifest.script_digests {
        return Err(RunnerError::ReplayRefused("mock script files changed since the run".into()));
    }
    if units.iter().map(|u| &u.entry).ne(manifest.conversations.iter()) {
        return Err(RunnerError::ReplayRefused("conversation list does not match the recorded config".into()));
    }
    for e in &manifest.conversations {
        if e.seed != derive_seed(manifest.master_seed, e.condition_id, &e.task_id, e.repetition) {
            return Err(RunnerError::ReplayRefused(format!("{}: recorded seed does not match derivation", e.conversation_id)));
        }
    }
    let failed: std::collections::BTreeSet<&str> =
        manifest.failures.iter().filter_map(|f| f.split(':').next()).collect();
    let run_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let verdicts: Vec<Option<(String, String)>> = units
        .par_iter()
        .map(|unit| {
            let id = unit.entry.conversation_id.clone();
            let path = transcript_path(run_dir, &id);
            let found = match std::fs::read(&path) {
                Ok(b) => Some(b),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                Err(e) => return Some((id, format!("cannot read {}: {e}", path.display()))),
            };
            match (conversation_bytes(unit, factory.as_ref()), found) {
                (Ok((_, text, _)), Some(found)) => first_difference(&text, &found).map(|d| (id, d)),
                (Ok(_), None) => Some((id, "transcript missing from the run directory".into())),
                (Err(_), None) if failed.contains(id.as_str()) => None,
                (Err(e), _) => Some((id, format!("re-execution failed: {e}"))),
            }
        })
        .collect();
    let conversations = units.len();
    Ok(match verdicts.into_iter().flatten().next() {
        Some((conversation_id, detail)) => ReplayVerdict::Fail { conversation_id, detail },
        None => ReplayVerdict::Pass { conversations },
    })
}
