//! Geometry of a conversation in embedding space: nine per-conversation
//! features, z-scoring, VIF, and a 2-D projection for plotting.

mod features;
mod kmeans;
mod output;
mod pca;

pub use features::{
    convergence_ratio, global_coherence, local_coherence, max_distance, path_length, revisit_score, revisit_window,
    semantic_spread, topic_switching_rate, trajectory_curvature, trajectory_curvature_detail, SWITCHING_CLUSTERS,
};
pub use kmeans::{distinct_points, init_indices, kmeans_lloyd, kmeans_restarts, within_ss, Clustering, KMEANS_MAX_ITER};
pub use output::{read_features, write_features, write_projection, FeatureRow, FEATURE_CSV_PREFIX};
pub use pca::{pca_project_2d, Projection};
pub use crate::stats::{compute_vif, Vif};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{ConversationTranscript, Discussion};
use crate::embedding::{EmbeddingError, EmbeddingVector};
use crate::stats::{zscore, StatsError};

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("{conversation_id}: {discussion} transcripts are excluded from trajectory feature analyses")]
    NotApplicable { conversation_id: String, discussion: Discussion },
    #[error("{0}: transcript has no discussion turns")]
    NoDiscussionTurns(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("k-means needs {k} distinct points, got {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered turn embeddings of one conversation, in 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, TrajectoryError> {
        let dim = points.first().map(Vec::len).ok_or_else(|| TrajectoryError::Precondition("empty trajectory".into()))?;
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(TrajectoryError::Precondition("turn embeddings differ in dimension".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TrajectoryError::Embedding(EmbeddingError::NonFinite));
        }
        Ok(Self { points })
    }

    pub fn from_embeddings(embeddings: &[EmbeddingVector]) -> Result<Self, TrajectoryError> {
        Self::new(embeddings.iter().map(|e| e.values.clone()).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for p in &self.points {
            c.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        let n = self.n() as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    LocalCoherence,
    GlobalCoherence,
    PathLength,
    ConvergenceRatio,
    MaxDistance,
    TrajectoryCurvature,
    TopicSwitchingRate,
    RevisitScore,
    SemanticSpread,
}

impl Feature {
    pub const ALL: [Feature; 9] = [
        Feature::LocalCoherence,
        Feature::GlobalCoherence,
        Feature::PathLength,
        Feature::ConvergenceRatio,
        Feature::MaxDistance,
        Feature::TrajectoryCurvature,
        Feature::TopicSwitchingRate,
        Feature::RevisitScore,
        Feature::SemanticSpread,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::LocalCoherence => "local_coherence",
            Feature::GlobalCoherence => "global_coherence",
            Feature::PathLength => "path_length",
            Feature::ConvergenceRatio => "convergence_ratio",
            Feature::MaxDistance => "max_distance",
            Feature::TrajectoryCurvature => "trajectory_curvature",
            Feature::TopicSwitchingRate => "topic_switching_rate",
            Feature::RevisitScore => "revisit_score",
            Feature::SemanticSpread => "semantic_spread",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a feature has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FeatureUndefined {
    #[error("too few turns")]
    InsufficientTurns,
    #[error("degenerate geometry")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFlag {
    #[default]
    Ok,
    UndefinedInsufficientTurns,
    Degenerate,
}

impl FeatureFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFlag::Ok => "ok",
            FeatureFlag::UndefinedInsufficientTurns => "undefined_insufficient_turns",
            FeatureFlag::Degenerate => "degenerate",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [FeatureFlag::Ok, FeatureFlag::UndefinedInsufficientTurns, FeatureFlag::Degenerate]
            .into_iter()
            .find(|f| f.as_str() == name)
    }
}

impl From<FeatureUndefined> for FeatureFlag {
    fn from(u: FeatureUndefined) -> Self {
        match u {
            FeatureUndefined::InsufficientTurns => FeatureFlag::UndefinedInsufficientTurns,
            FeatureUndefined::Degenerate => FeatureFlag::Degenerate,
        }
    }
}

/// The nine features. Undefined values are NaN with a non-ok flag, except
/// a degenerate convergence ratio, which is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFeatures {
    pub values: BTreeMap<Feature, f64>,
    pub flags: BTreeMap<Feature, FeatureFlag>,
    pub curvature_skipped_pairs: usize,
    pub turns: usize,
}

impl TrajectoryFeatures {
    pub fn get(&self, f: Feature) -> f64 {
        self.values[&f]
    }

    pub fn flag(&self, f: Feature) -> FeatureFlag {
        self.flags[&f]
    }

    pub fn is_complete(&self) -> bool {
        self.flags.values().all(|f| *f == FeatureFlag::Ok)
    }

    pub fn vector(&self) -> [f64; 9] {
        Feature::ALL.map(|f| self.get(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    /// Seeds the k-means initialization.
    pub seed: u64,
    pub kmeans_restarts: usize,
    /// Embed "Agent k: content" rather than the raw turn content.
    pub role_prefix: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { seed: 0, kmeans_restarts: 1, role_prefix: false }
    }
}

pub fn compute_features(t: &Trajectory, options: &FeatureOptions) -> TrajectoryFeatures {
    let mut values = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let mut skipped = 0;
    for f in Feature::ALL {
        let r = match f {
            Feature::LocalCoherence => local_coherence(t),
            Feature::GlobalCoherence => global_coherence(t),
            Feature::PathLength => path_length(t),
            Feature::ConvergenceRatio => convergence_ratio(t),
            Feature::MaxDistance => max_distance(t),
            Feature::TrajectoryCurvature => trajectory_curvature_detail(t).map(|(v, s)| {
                skipped = s;
                v
            }),
            Feature::TopicSwitchingRate => topic_switching_rate(t, options.seed, options.kmeans_restarts),
            Feature::RevisitScore => revisit_score(t),
            Feature::SemanticSpread => semantic_spread(t),
        };
        let (v, flag) = match r {
            Ok(v) => (v, FeatureFlag::Ok),
            Err(FeatureUndefined::Degenerate) if f == Feature::ConvergenceRatio => (0.0, FeatureFlag::Degenerate),
            Err(u) => (f64::NAN, u.into()),
        };
        values.insert(f, v);
        flags.insert(f, flag);
    }
    TrajectoryFeatures { values, flags, curvature_skipped_pairs: skipped, turns: t.n() }
}

/// Texts that would be embedded for a transcript's discussion turns.
pub fn discussion_texts(transcript: &ConversationTranscript, role_prefix: bool) -> Vec<String> {
    transcript
        .discussion_turns()
        .map(|t| if role_prefix { format!("Agent {}: {}", t.agent_index + 1, t.content) } else { t.content.clone() })
        .collect()
}

/// Rejects transcripts whose structure has no turn sequence to analyze.
pub fn check_applicable(transcript: &ConversationTranscript) -> Result<(), TrajectoryError> {
    match transcript.condition.discussion {
        Discussion::Open | Discussion::Instructed | Discussion::Iterative => Ok(()),
        d => Err(TrajectoryError::NotApplicable { conversation_id: transcript.conversation_id.clone(), discussion: d }),
    }
}

pub fn compute_feature_vector<F>(
    transcript: &ConversationTranscript,
    embed: F,
    options: &FeatureOptions,
) -> Result<TrajectoryFeatures, TrajectoryError>
where
    F: FnOnce(&[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>,
{
    check_applicable(transcript)?;
    let texts = discussion_texts(transcript, options.role_prefix);
    if texts.is_empty() {
        return Err(TrajectoryError::NoDiscussionTurns(transcript.conversation_id.clone()));
    }
    let vectors = embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(TrajectoryError::Precondition(format!("{} embeddings for {} turns", vectors.len(), texts.len())));
    }
    Ok(compute_features(&Trajectory::from_embeddings(&vectors)?, options))
}

/// Column-wise z-scores; constant columns are dropped and listed.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub columns: Vec<Feature>,
    pub dropped: Vec<Feature>,
    /// Row-major, one row per input row, one value per kept column.
    pub rows: Vec<Vec<f64>>,
}

impl Standardized {
    pub fn column(&self, f: Feature) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == f)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn zscore_features(rows: &[TrajectoryFeatures]) -> Result<Standardized, TrajectoryError> {
    if rows.len() < 2 {
        return Err(StatsError::TooFew { what: "feature rows", need: 2, got: rows.len() }.into());
    }
    if let Some(i) = rows.iter().position(|r| r.values.values().any(|v| !v.is_finite())) {
        return Err(TrajectoryError::Precondition(format!("feature row {i} has undefined values")));
    }
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for f in Feature::ALL {
        let raw: Vec<f64> = rows.iter().map(|r| r.get(f)).collect();
        match zscore(&raw) {
            Some(z) => {
                columns.push(f);
                data.push(z);
            }
            None => {
                tracing::warn!(feature = %f, "zero-variance feature dropped before standardization");
                dropped.push(f);
            }
        }
    }
    let rows = (0..rows.len()).map(|i| data.iter().map(|c| c[i]).collect()).collect();
    Ok(Standardized { columns, dropped, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConversationStatus, Phase};
    use crate::embedding::mock_embed;
    use crate::gateway::SyntheticGateway;
    use crate::matrix::ConditionMatrix;

    fn transcript(condition_id: u32) -> ConversationTranscript {
        let row = ConditionMatrix::shipped().row(condition_id).unwrap();
        let n = row.team_size;
        let cond = row.with_models(vec!["mock".into(); n as usize]);
        let gws = (0..n)
            .map(|a| std::sync::Arc::new(SyntheticGateway::new(1, a)) as std::sync::Arc<dyn crate::gateway::ChatGateway>)
            .collect();
        let task = crate::corpus::TaskPrompt::builtin_by_id("plastic_waste").unwrap();
        let agents = crate::protocol::testkit::agents(n);
        crate::protocol::run_condition(&cond, &task, agents, gws, "c", 1).unwrap().transcript
    }

    fn mock(texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| mock_embed(t, 16, 0)).collect()
    }

    #[test]
    fn open_transcript_gives_nine_finite_values() {
        let t = transcript(9);
        assert_eq!(t.status, ConversationStatus::Completed);
        assert_eq!(t.discussion_turns().count(), 30);
        let f = compute_feature_vector(&t, mock, &FeatureOptions::default()).unwrap();
        assert!(f.is_complete(), "{:?}", f.flags);
        assert!(f.vector().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn progressive_is_not_applicable() {
        let t = transcript(66);
        assert!(matches!(compute_feature_vector(&t, mock, &FeatureOptions::default()), Err(TrajectoryError::NotApplicable { .. })));
    }

    #[test]
    fn single_turn_leaves_only_global_coherence() {
        let mut t = transcript(9);
        let first = t.turns.iter().position(|x| x.phase == Phase::Discussion).unwrap();
        t.turns.retain(|x| x.phase != Phase::Discussion || x.turn_index as usize == first);
        let f = compute_feature_vector(&t, mock, &FeatureOptions::default()).unwrap();
        for feat in Feature::ALL {
            let expect = if feat == Feature::GlobalCoherence { FeatureFlag::Ok } else { FeatureFlag::UndefinedInsufficientTurns };
            assert_eq!(f.flag(feat), expect, "{feat}");
        }
    }

    #[test]
    fn role_prefix_changes_texts() {
        let t = transcript(9);
        let raw = discussion_texts(&t, false);
        let pre = discussion_texts(&t, true);
        assert!(pre[0].starts_with("Agent ") && pre[0].ends_with(&raw[0]));
    }

    fn feats(vals: [f64; 9]) -> TrajectoryFeatures {
        TrajectoryFeatures {
            values: Feature::ALL.into_iter().zip(vals).collect(),
            flags: Feature::ALL.into_iter().map(|f| (f, FeatureFlag::Ok)).collect(),
            curvature_skipped_pairs: 0,
            turns: 10,
        }
    }

    #[test]
    fn zscore_two_rows_and_constant_column() {
        let mut a = [5.0; 9];
        let mut b = [5.0; 9];
        a[0] = 1.0;
        b[0] = 3.0;
        let z = zscore_features(&[feats(a), feats(b)]).unwrap();
        assert_eq!(z.columns, vec![Feature::LocalCoherence]);
        assert_eq!(z.dropped.len(), 8);
        assert_eq!(z.rows, vec![vec![-1.0], vec![1.0]]);
    }
}
