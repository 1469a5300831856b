use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{Feature, FeatureFlag, Projection, TrajectoryError, TrajectoryFeatures};
use crate::corpus::{ConversationTranscript, Discussion};

pub const FEATURE_CSV_PREFIX: [&str; 5] = ["conversation_id", "condition_id", "task_id", "model", "discussion"];

/// One conversation's features plus the metadata needed to join them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub conversation_id: String,
    pub condition_id: u32,
    pub task_id: String,
    /// Single model name, or distinct names joined with '+'.
    pub model: String,
    pub discussion: Discussion,
    pub features: TrajectoryFeatures,
}

impl FeatureRow {
    pub fn new(t: &ConversationTranscript, features: TrajectoryFeatures) -> Self {
        let mut models: Vec<&str> = Vec::new();
        for m in &t.condition.model_assignment {
            if !models.contains(&m.as_str()) {
                models.push(m);
            }
        }
        Self {
            conversation_id: t.conversation_id.clone(),
            condition_id: t.condition.condition_id,
            task_id: t.task.task_id.clone(),
            model: models.join("+"),
            discussion: t.condition.discussion,
            features,
        }
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = FEATURE_CSV_PREFIX.iter().map(|s| s.to_string()).collect();
    h.extend(Feature::ALL.iter().map(|f| f.as_str().to_string()));
    h.extend(Feature::ALL.iter().map(|f| format!("{f}_flag")));
    h.push("curvature_skipped_pairs".into());
    h.push("turns".into());
    h
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn write_features<W: Write>(rows: &[FeatureRow], sink: W) -> Result<(), TrajectoryError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header())?;
    for r in rows {
        let mut rec = vec![
            r.conversation_id.clone(),
            r.condition_id.to_string(),
            r.task_id.clone(),
            r.model.clone(),
            r.discussion.as_str().to_string(),
        ];
        rec.extend(Feature::ALL.iter().map(|f| cell(r.features.get(*f))));
        rec.extend(Feature::ALL.iter().map(|f| r.features.flag(*f).as_str().to_string()));
        rec.push(r.features.curvature_skipped_pairs.to_string());
        rec.push(r.features.turns.to_string());
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> TrajectoryError {
    TrajectoryError::Precondition(format!("feature CSV: {}", msg.into()))
}

pub fn read_features<R: Read>(source: R) -> Result<Vec<FeatureRow>, TrajectoryError> {
    let mut r = csv::Reader::from_reader(source);
    let expected = header();
    if r.headers()?.iter().collect::<Vec<_>>() != expected {
        return Err(bad("unexpected header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or_default();
        let mut values = BTreeMap::new();
        let mut flags = BTreeMap::new();
        for (k, f) in Feature::ALL.iter().enumerate() {
            let raw = get(5 + k);
            let v = if raw.is_empty() { f64::NAN } else { raw.parse().map_err(|_| bad(format!("bad {f} value {raw:?}")))? };
            values.insert(*f, v);
            let flag = FeatureFlag::from_name(get(14 + k)).ok_or_else(|| bad(format!("bad {f} flag")))?;
            flags.insert(*f, flag);
        }
        out.push(FeatureRow {
            conversation_id: get(0).to_string(),
            condition_id: get(1).parse().map_err(|_| bad("bad condition_id"))?,
            task_id: get(2).to_string(),
            model: get(3).to_string(),
            discussion: get(4).parse().map_err(|_| bad("bad discussion"))?,
            features: TrajectoryFeatures {
                values,
                flags,
                curvature_skipped_pairs: get(23).parse().map_err(|_| bad("bad curvature_skipped_pairs"))?,
                turns: get(24).parse().map_err(|_| bad("bad turns"))?,
            },
        });
    }
    Ok(out)
}

/// `conversation_id,turn_index,x,y`; `turn_indices` align with the projection.
pub fn write_projection<W: Write>(
    conversation_id: &str,
    turn_indices: &[u32],
    projection: &Projection,
    sink: W,
    with_header: bool,
) -> Result<(), TrajectoryError> {
    if turn_indices.len() != projection.points.len() {
        return Err(TrajectoryError::Precondition("turn indices do not match projected points".into()));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    if with_header {
        w.write_record(["conversation_id", "turn_index", "x", "y"])?;
    }
    for (i, p) in turn_indices.iter().zip(&projection.points) {
        w.write_record([conversation_id.to_string(), i.to_string(), format!("{}", p[0]), format!("{}", p[1])])?;
    }
    w.flush()?;
    Ok(())
}
