//! Config-driven experiment runs, analysis, reporting and replay.

mod analyze;
mod config;
mod execute;
mod plan;
mod replay;
mod report;

use std::io::Write;
use std::path::Path;

pub use analyze::{analyze, analyze_paths, transcript_files, write_analysis, AnalyzeConfig, AnalyzeOutcome, Excluded};
pub use config::{ConditionSelector, ModelPlan, RunConfig, RunMode, DEFAULT_REPETITIONS};
pub use execute::{conversation_bytes, plan_units, run_experiment, RunOutcome, Unit};
pub use plan::{
    conversation_id, derive_seed, expand_condition_matrix, load_personas, shipped_personas, team_for, Cell,
    MIXED_MODELS,
};
pub use replay::{replay, ReplayVerdict};
pub use report::{
    build_report, score_files, write_report, BetaRow, BetaTable, ComparisonRow, DescriptiveRow, GroupBy,
    GroupSummaryRow, Report, ReportOptions, ScatterRow, VifRow,
};

use crate::corpus::CorpusError;
use crate::embedding::EmbeddingError;
use crate::gateway::GatewayError;
use crate::protocol::ProtocolError;
use crate::stats::StatsError;
use crate::trajectory::TrajectoryError;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("replay refused: {0}")]
    ReplayRefused(String),
    #[error("no score rows join the feature rows on conversation_id")]
    EmptyJoin,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<GatewayError> for RunnerError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::MissingCredential(var) => RunnerError::MissingCredential(var),
            e => RunnerError::Gateway(e),
        }
    }
}

impl RunnerError {
    /// Errors caused by the user's configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, RunnerError::Config(_) | RunnerError::MissingCredential(_) | RunnerError::ReplayRefused(_))
            || matches!(self, RunnerError::Embedding(EmbeddingError::Config(_) | EmbeddingError::DimTooSmall(_)))
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io { path: path.display().to_string(), source }
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), RunnerError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| RunnerError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| RunnerError::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| RunnerError::io(path, e))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, RunnerError> {
    std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))
}
