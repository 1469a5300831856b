use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{atomic_write, read_to_string, RunnerError};
use crate::corpus::{load_transcript_file, ConversationStatus, ConversationTranscript};
use crate::embedding::{EmbeddingConfig, EmbeddingService, EmbeddingStats};
use crate::trajectory::{
    check_applicable, compute_feature_vector, pca_project_2d, write_features, write_projection,
    FeatureOptions, FeatureRow, Projection, Trajectory, TrajectoryError,
};

/// Embedding and feature settings for `analyze`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub embedding: EmbeddingConfig,
    pub features: FeatureOptions,
    /// Also write 2-D projections of each trajectory.
    pub projections: bool,
}

impl AnalyzeConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let mut c = Self::from_toml(&read_to_string(path)?)?;
        if let Some(dir) = c.embedding.cache_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = path.parent().unwrap_or_else(|| Path::new(".")).join(&*dir);
        }
        Ok(c)
    }

    fn feature_options(&self) -> FeatureOptions {
        FeatureOptions { role_prefix: self.features.role_prefix || self.embedding.role_prefix, ..self.features.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excluded {
    pub conversation_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    /// Sorted by conversation id.
    pub rows: Vec<FeatureRow>,
    pub excluded: Vec<Excluded>,
    pub projections: Vec<(String, Vec<u32>, Projection)>,
    pub stats: EmbeddingStats,
}

enum One {
    Row(FeatureRow, Option<(Vec<u32>, Projection)>),
    Skip(String),
}

fn analyze_one(
    t: &ConversationTranscript,
    service: &EmbeddingService,
    options: &FeatureOptions,
    projections: bool,
) -> Result<One, RunnerError> {
    if let Err(e @ TrajectoryError::NotApplicable { .. }) = check_applicable(t) {
        return Ok(One::Skip(e.to_string()));
    }
    if t.status == ConversationStatus::ProtocolFailure {
        return Ok(One::Skip(format!("{}: protocol failure transcripts are not analyzed", t.conversation_id)));
    }
    let mut vectors = None;
    let features = match compute_feature_vector(
        t,
        |texts| {
            let v = service.embed_batch(texts)?;
            vectors = Some(v.clone());
            Ok(v)
        },
        options,
    ) {
        Ok(f) => f,
        Err(e @ TrajectoryError::NoDiscussionTurns(_)) => return Ok(One::Skip(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let projection = match vectors.filter(|v| projections && v.len() >= 3) {
        Some(v) => {
            let indices = t.discussion_turns().map(|turn| turn.turn_index).collect();
            Some((indices, pca_project_2d(&Trajectory::from_embeddings(&v)?)?))
        }
        None => None,
    };
    Ok(One::Row(FeatureRow::new(t, features), projection))
}

/// Featurizes every analyzable transcript. Progressive and no-discussion
/// transcripts are skipped and logged.
pub fn analyze(
    transcripts: &[ConversationTranscript],
    service: &EmbeddingService,
    config: &AnalyzeConfig,
) -> Result<AnalyzeOutcome, RunnerError> {
    let mut seen = BTreeSet::new();
    if let Some(dup) = transcripts.iter().find(|t| !seen.insert(t.conversation_id.as_str())) {
        return Err(RunnerError::Config(format!("conversation {} appears twice", dup.conversation_id)));
    }
    let options = config.feature_options();
    let mut sorted: Vec<&ConversationTranscript> = transcripts.iter().collect();
    sorted.sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));
    let results: Vec<Result<One, RunnerError>> =
        sorted.par_iter().map(|t| analyze_one(t, service, &options, config.projections)).collect();
    let mut out = AnalyzeOutcome { rows: Vec::new(), excluded: Vec::new(), projections: Vec::new(), stats: Default::default() };
    for (t, r) in sorted.iter().zip(results) {
        match r? {
            One::Row(row, projection) => {
                if let Some((indices, p)) = projection {
                    out.projections.push((row.conversation_id.clone(), indices, p));
                }
                out.rows.push(row);
            }
            One::Skip(reason) => {
                tracing::info!(conversation_id = %t.conversation_id, %reason, "skipped");
                out.excluded.push(Excluded { conversation_id: t.conversation_id.clone(), reason });
            }
        }
    }
    out.stats = service.stats();
    Ok(out)
}

/// `*.jsonl` files directly inside `dir`, sorted.
pub fn transcript_files(dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| RunnerError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn analyze_paths(paths: &[PathBuf], config: &AnalyzeConfig) -> Result<AnalyzeOutcome, RunnerError> {
    let mut transcripts = Vec::new();
    for p in paths {
        transcripts.extend(load_transcript_file(p)?);
    }
    let service = EmbeddingService::from_config(&config.embedding)?;
    analyze(&transcripts, &service, config)
}

/// Writes `features.csv`, and `projections.csv` when projections were computed.
pub fn write_analysis(outcome: &AnalyzeOutcome, out_dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let mut buf = Vec::new();
    write_features(&outcome.rows, &mut buf)?;
    let features = out_dir.join("features.csv");
    atomic_write(&features, &buf)?;
    let mut written = vec![features];
    if !outcome.projections.is_empty() {
        let mut buf = Vec::new();
        for (i, (id, indices, p)) in outcome.projections.iter().enumerate() {
            write_projection(id, indices, p, &mut buf, i == 0)?;
        }
        let path = out_dir.join("projections.csv");
        atomic_write(&path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

