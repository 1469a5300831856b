use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{atomic_write, RunnerError};
use crate::corpus::{load_ideas, load_ratings};
use crate::matrix::ConditionMatrix;
use crate::stats::{
    cohens_d, compute_vif, describe, percentile, score_ideas, standardized_betas, t_test_independent,
    top_share_mean, zscore, CreativityMode, NormalizationMode, OlsOptions, ScoreOutcome, ScoreRow, StatsError,
    TTestVariant,
};
use crate::trajectory::{Feature, FeatureRow};

/// Loads ideas and ratings files and scores them.
pub fn score_files(
    ideas: &Path,
    ratings: &Path,
    normalization: NormalizationMode,
    mode: CreativityMode,
) -> Result<ScoreOutcome, RunnerError> {
    let ideas = load_ideas(std::fs::File::open(ideas).map_err(|e| RunnerError::io(ideas, e))?)?;
    let ratings = load_ratings(std::fs::File::open(ratings).map_err(|e| RunnerError::io(ratings, e))?)?;
    Ok(score_ideas(&ideas, &ratings, normalization, mode)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// llm_team / llm_single / human_team.
    #[default]
    Source,
    /// Discussion structure of the idea's condition.
    Discussion,
    Condition,
}

impl GroupBy {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "source" => Some(GroupBy::Source),
            "discussion" => Some(GroupBy::Discussion),
            "condition" => Some(GroupBy::Condition),
            _ => None,
        }
    }

    fn label(self, row: &ScoreRow) -> String {
        let condition = row.condition_id.and_then(|c| ConditionMatrix::shipped().row(c));
        match (self, condition) {
            (GroupBy::Discussion, Some(c)) => c.discussion.as_str().to_string(),
            (GroupBy::Condition, Some(c)) => format!("c{:02}", c.condition_id),
            _ => row.source.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub group_by: GroupBy,
    pub t_test: TTestVariant,
    /// Percentile marked on the performance panels.
    pub percentile: f64,
    /// Share (percent) averaged for the top-share mean.
    pub top_share: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { group_by: GroupBy::Source, t_test: TTestVariant::Pooled, percentile: 95.0, top_share: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveRow {
    pub group: String,
    /// A task id, or "all".
    pub task_id: String,
    pub dimension: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummaryRow {
    pub group: String,
    pub dimension: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub p95: f64,
    pub top5_mean: f64,
}

/// `cohens_d` is (mean_b - mean_a) / pooled SD; `t` is (mean_a - mean_b) / SE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub dimension: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub cohens_d: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p95_a: f64,
    pub p95_b: f64,
    pub top5_mean_a: f64,
    pub top5_mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaRow {
    pub term: String,
    pub beta: f64,
    pub se_hc3: f64,
    pub se_plain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    pub rows: Vec<BetaRow>,
    pub n: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Constant features left out of the regression.
    pub dropped: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifRow {
    pub feature: String,
    pub vif: f64,
    pub infinite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub conversation_id: String,
    pub group: String,
    pub creativity: f64,
    pub features: [f64; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub descriptives: Vec<DescriptiveRow>,
    pub groups: Vec<GroupSummaryRow>,
    /// `None` when there is a single group.
    pub comparisons: Option<Vec<ComparisonRow>>,
    pub betas: Option<BetaTable>,
    pub vif: Option<Vec<VifRow>>,
    /// (group, score row) per idea.
    pub distribution: Vec<(String, ScoreRow)>,
    pub scatter: Vec<ScatterRow>,
    /// Why a section was left out.
    pub notes: Vec<String>,
}

fn dimensions(scores: &[ScoreRow]) -> Vec<(&'static str, fn(&ScoreRow) -> f64)> {
    let mut dims: Vec<(&'static str, fn(&ScoreRow) -> f64)> =
        vec![("novelty", |r| r.novelty), ("usefulness", |r| r.usefulness), ("creativity", |r| r.creativity)];
    if scores.iter().all(|r| r.creativity_additive.is_some()) {
        dims.push(("creativity_additive", |r| r.creativity_additive.unwrap_or(f64::NAN)));
    }
    dims
}

fn note(notes: &mut Vec<String>, msg: String) {
    tracing::warn!("{msg}");
    notes.push(msg);
}

fn comparison(dim: &str, a: (&str, &[f64]), b: (&str, &[f64]), o: &ReportOptions) -> Result<ComparisonRow, StatsError> {
    let t = t_test_independent(a.1, b.1, o.t_test)?;
    let (da, db) = (describe(a.1), describe(b.1));
    Ok(ComparisonRow {
        dimension: dim.to_string(),
        group_a: a.0.to_string(),
        group_b: b.0.to_string(),
        n_a: da.n,
        n_b: db.n,
        mean_a: da.mean,
        mean_b: db.mean,
        cohens_d: cohens_d(a.1, b.1)?,
        t: t.t,
        df: t.df,
        p: t.p,
        p95_a: percentile(a.1, o.percentile)?,
        p95_b: percentile(b.1, o.percentile)?,
        top5_mean_a: top_share_mean(a.1, o.top_share)?,
        top5_mean_b: top_share_mean(b.1, o.top_share)?,
    })
}

/// Builds every report section from score rows and, optionally, feature
/// rows joined on conversation id.
pub fn build_report(scores: &[ScoreRow], features: Option<&[FeatureRow]>, options: &ReportOptions) -> Result<Report, RunnerError> {
    if scores.is_empty() {
        return Err(StatsError::TooFew { what: "score rows", need: 1, got: 0 }.into());
    }
    let dims = dimensions(scores);
    let mut notes = Vec::new();
    let mut by_group: BTreeMap<String, Vec<&ScoreRow>> = BTreeMap::new();
    for r in scores {
        by_group.entry(options.group_by.label(r)).or_default().push(r);
    }

    let mut descriptives = Vec::new();
    let mut groups = Vec::new();
    for (g, rows) in &by_group {
        let mut by_task: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
        for r in rows {
            by_task.entry(r.task_id.as_str()).or_default().push(r);
        }
        for (name, get) in &dims {
            for (task, trs) in by_task.iter().map(|(t, v)| (*t, v)).chain([("all", rows)]) {
                let d = describe(&trs.iter().map(|r| get(r)).collect::<Vec<_>>());
                descriptives.push(DescriptiveRow {
                    group: g.clone(),
                    task_id: task.to_string(),
                    dimension: name.to_string(),
                    n: d.n,
                    mean: d.mean,
                    sd: d.sd,
                });
            }
            let values: Vec<f64> = rows.iter().map(|r| get(r)).collect();
            let d = describe(&values);
            groups.push(GroupSummaryRow {
                group: g.clone(),
                dimension: name.to_string(),
                n: d.n,
                mean: d.mean,
                sd: d.sd,
                p95: percentile(&values, options.percentile)?,
                top5_mean: top_share_mean(&values, options.top_share)?,
            });
        }
    }

    let comparisons = if by_group.len() < 2 {
        note(&mut notes, "single group: comparison section omitted".into());
        None
    } else {
        let names: Vec<&String> = by_group.keys().collect();
        let mut out = Vec::new();
        for (name, get) in &dims {
            for i in 0..names.len() {
                for j in i + 1..names.len() {
                    let a: Vec<f64> = by_group[names[i]].iter().map(|r| get(r)).collect();
                    let b: Vec<f64> = by_group[names[j]].iter().map(|r| get(r)).collect();
                    match comparison(name, (names[i], &a), (names[j], &b), options) {
                        Ok(c) => out.push(c),
                        Err(e) => note(&mut notes, format!("{name}: {} vs {} not compared: {e}", names[i], names[j])),
                    }
                }
            }
        }
        Some(out)
    };

    let mut report = Report {
        descriptives,
        groups,
        comparisons,
        betas: None,
        vif: None,
        distribution: scores.iter().map(|r| (options.group_by.label(r), r.clone())).collect(),
        scatter: Vec::new(),
        notes,
    };
    if let Some(features) = features {
        feature_sections(&mut report, scores, features, options)?;
    }
    Ok(report)
}

fn feature_sections(
    report: &mut Report,
    scores: &[ScoreRow],
    features: &[FeatureRow],
    options: &ReportOptions,
) -> Result<(), RunnerError> {
    let by_conv: HashMap<&str, &FeatureRow> = features.iter().map(|f| (f.conversation_id.as_str(), f)).collect();
    let joined: Vec<(&ScoreRow, &FeatureRow)> = scores
        .iter()
        .filter_map(|s| s.conversation_id.as_deref().and_then(|c| by_conv.get(c)).map(|f| (s, *f)))
        .collect();
    if joined.is_empty() {
        return Err(RunnerError::EmptyJoin);
    }
    report.scatter = joined
        .iter()
        .map(|(s, f)| ScatterRow {
            conversation_id: f.conversation_id.clone(),
            group: options.group_by.label(s),
            creativity: s.creativity,
            features: f.features.vector(),
        })
        .collect();
    let complete: Vec<&(&ScoreRow, &FeatureRow)> = joined.iter().filter(|(_, f)| f.features.is_complete()).collect();
    if complete.len() < joined.len() {
        let msg = format!("{} joined rows with undefined features left out of the regression", joined.len() - complete.len());
        note(&mut report.notes, msg);
    }
    let y: Vec<f64> = complete.iter().map(|(s, _)| s.creativity).collect();
    let mut kept = Vec::new();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for f in Feature::ALL {
        let col: Vec<f64> = complete.iter().map(|(_, r)| r.features.get(f)).collect();
        if col.len() >= 2 && zscore(&col).is_some() {
            kept.push(f);
            columns.push(col);
        } else {
            dropped.push(f);
        }
    }
    if !dropped.is_empty() {
        let names: Vec<&str> = dropped.iter().map(|f| f.as_str()).collect();
        note(&mut report.notes, format!("constant features left out of the regression: {}", names.join(", ")));
    }
    let names: Vec<String> = kept.iter().map(|f| f.as_str().to_string()).collect();
    match standardized_betas(&y, &columns, &names, OlsOptions { hc3: true }) {
        Ok(fit) => {
            let rows = fit
                .names
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, term)| BetaRow {
                    term: term.clone(),
                    beta: fit.coefficients[j],
                    se_hc3: fit.se_hc3[j],
                    se_plain: fit.se_plain[j],
                })
                .collect();
            report.betas =
                Some(BetaTable { rows, n: fit.n, r_squared: fit.r_squared, adj_r_squared: fit.adj_r_squared, dropped });
        }
        Err(e) => note(&mut report.notes, format!("standardized-beta table omitted: {e}")),
    }
    match compute_vif(&columns) {
        Ok(v) => {
            report.vif = Some(
                kept.iter()
                    .zip(v)
                    .map(|(f, v)| VifRow { feature: f.as_str().to_string(), vif: v.value, infinite: v.infinite })
                    .collect(),
            )
        }
        Err(e) => note(&mut report.notes, format!("VIF table omitted: {e}")),
    }
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, RunnerError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| RunnerError::Csv(e.into_error().into()))
}

/// Writes the report CSVs into `dir` and returns their paths.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), RunnerError> {
        let path = dir.join(name);
        atomic_write(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put("descriptives.csv", csv_bytes(&report.descriptives)?)?;
    put("group_summary.csv", csv_bytes(&report.groups)?)?;
    if let Some(c) = &report.comparisons {
        put("comparison.csv", csv_bytes(c)?)?;
    }
    if let Some(b) = &report.betas {
        put("betas.csv", csv_bytes(&b.rows)?)?;
    }
    if let Some(v) = &report.vif {
        put("vif.csv", csv_bytes(v)?)?;
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "idea_id", "task_id", "novelty", "usefulness", "creativity"])?;
    for (g, r) in &report.distribution {
        w.write_record([
            g.clone(),
            r.idea_id.clone(),
            r.task_id.clone(),
            r.novelty.to_string(),
            r.usefulness.to_string(),
            r.creativity.to_string(),
        ])?;
    }
    put("plot_distribution.csv", w.into_inner().map_err(|e| RunnerError::Csv(e.into_error().into()))?)?;

    if !report.scatter.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["conversation_id".to_string(), "group".into(), "creativity".into()];
        header.extend(Feature::ALL.iter().map(|f| f.as_str().to_string()));
        w.write_record(&header)?;
        for s in &report.scatter {
            let mut rec = vec![s.conversation_id.clone(), s.group.clone(), s.creativity.to_string()];
            rec.extend(s.features.iter().map(|v| if v.is_finite() { v.to_string() } else { String::new() }));
            w.write_record(&rec)?;
        }
        put("plot_scatter.csv", w.into_inner().map_err(|e| RunnerError::Csv(e.into_error().into()))?)?;
    }
    Ok(written)
}
