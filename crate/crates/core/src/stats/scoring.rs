use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{mean, StatsError};
use crate::corpus::{exclude_invalid_ideas, DropReason, Idea, IdeaSource, JudgeRatingRow};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Average the judges per idea, then min-max within task.
    #[default]
    JudgeMean,
    /// Min-max each judge's scores within task, then average per idea.
    PerJudge,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreativityMode {
    #[default]
    Product,
    Additive,
}

/// (x - min) / (max - min). All-equal input maps to zeros and reports
/// `true` for degenerate.
pub fn minmax(values: &[f64]) -> (Vec<f64>, bool) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi <= lo {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|v| (v - lo) / (hi - lo)).collect(), false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedIdea {
    pub idea_id: String,
    pub task_id: String,
    pub novelty: f64,
    pub usefulness: f64,
    pub novelty_degenerate: bool,
    pub usefulness_degenerate: bool,
}

/// Per-task min-max normalization of novelty and usefulness. Output order
/// follows `ideas`. Every idea needs at least one rating row.
pub fn minmax_normalize(
    ideas: &[Idea],
    ratings: &[JudgeRatingRow],
    mode: NormalizationMode,
) -> Result<Vec<NormalizedIdea>, StatsError> {
    let mut by_idea: HashMap<&str, Vec<&JudgeRatingRow>> = HashMap::new();
    for r in ratings {
        by_idea.entry(r.idea_id.as_str()).or_default().push(r);
    }
    let missing: Vec<String> =
        ideas.iter().filter(|i| !by_idea.contains_key(i.idea_id.as_str())).map(|i| i.idea_id.clone()).collect();
    if !missing.is_empty() {
        return Err(StatsError::UnknownIdeas(missing));
    }
    let mut tasks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, idea) in ideas.iter().enumerate() {
        tasks.entry(idea.provenance.task_id.as_str()).or_default().push(i);
    }
    let mut out: Vec<Option<NormalizedIdea>> = vec![None; ideas.len()];
    for members in tasks.values() {
        let (nov, use_, nd, ud) = match mode {
            NormalizationMode::JudgeMean => {
                let raw = |f: fn(&JudgeRatingRow) -> u8| -> Vec<f64> {
                    members
                        .iter()
                        .map(|&i| mean(&by_idea[ideas[i].idea_id.as_str()].iter().map(|r| f64::from(f(r))).collect::<Vec<_>>()))
                        .collect()
                };
                let (n, nd) = minmax(&raw(|r| r.novelty_raw));
                let (u, ud) = minmax(&raw(|r| r.usefulness_raw));
                (n, u, nd, ud)
            }
            NormalizationMode::PerJudge => per_judge(ideas, members, &by_idea),
        };
        for (pos, &i) in members.iter().enumerate() {
            out[i] = Some(NormalizedIdea {
                idea_id: ideas[i].idea_id.clone(),
                task_id: ideas[i].provenance.task_id.clone(),
                novelty: nov[pos],
                usefulness: use_[pos],
                novelty_degenerate: nd,
                usefulness_degenerate: ud,
            });
        }
    }
    Ok(out.into_iter().map(|o| o.expect("every idea belongs to a task")).collect())
}

fn per_judge(
    ideas: &[Idea],
    members: &[usize],
    by_idea: &HashMap<&str, Vec<&JudgeRatingRow>>,
) -> (Vec<f64>, Vec<f64>, bool, bool) {
    let judges: BTreeSet<&str> =
        members.iter().flat_map(|&i| by_idea[ideas[i].idea_id.as_str()].iter().map(|r| r.judge_id.as_str())).collect();
    let mut sums = vec![(0.0, 0.0, 0usize); members.len()];
    let (mut nd, mut ud) = (false, false);
    for judge in judges {
        // (member position, novelty, usefulness) for ideas this judge rated
        let rated: Vec<(usize, f64, f64)> = members
            .iter()
            .enumerate()
            .filter_map(|(pos, &i)| {
                by_idea[ideas[i].idea_id.as_str()]
                    .iter()
                    .find(|r| r.judge_id == judge)
                    .map(|r| (pos, f64::from(r.novelty_raw), f64::from(r.usefulness_raw)))
            })
            .collect();
        let (n, d1) = minmax(&rated.iter().map(|r| r.1).collect::<Vec<_>>());
        let (u, d2) = minmax(&rated.iter().map(|r| r.2).collect::<Vec<_>>());
        nd |= d1;
        ud |= d2;
        for (k, (pos, _, _)) in rated.iter().enumerate() {
            sums[*pos].0 += n[k];
            sums[*pos].1 += u[k];
            sums[*pos].2 += 1;
        }
    }
    let nov = sums.iter().map(|s| s.0 / s.2 as f64).collect();
    let use_ = sums.iter().map(|s| s.1 / s.2 as f64).collect();
    (nov, use_, nd, ud)
}

/// One row of the score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub idea_id: String,
    pub task_id: String,
    pub source: IdeaSource,
    pub novelty: f64,
    pub usefulness: f64,
    /// N × U.
    pub creativity: f64,
    /// N + U; present in additive mode.
    pub creativity_additive: Option<f64>,
    pub condition_id: Option<u32>,
    pub conversation_id: Option<String>,
}

/// Product N×U always; N+U as well in additive mode.
pub fn creativity_scores(rows: &[NormalizedIdea], ideas: &[Idea], mode: CreativityMode) -> Result<Vec<ScoreRow>, StatsError> {
    let by_id: HashMap<&str, &Idea> = ideas.iter().map(|i| (i.idea_id.as_str(), i)).collect();
    rows.iter()
        .map(|r| {
            let idea = by_id.get(r.idea_id.as_str()).ok_or_else(|| StatsError::UnknownIdeas(vec![r.idea_id.clone()]))?;
            Ok(ScoreRow {
                idea_id: r.idea_id.clone(),
                task_id: r.task_id.clone(),
                source: idea.provenance.source,
                novelty: r.novelty,
                usefulness: r.usefulness,
                creativity: r.novelty * r.usefulness,
                creativity_additive: (mode == CreativityMode::Additive).then_some(r.novelty + r.usefulness),
                condition_id: idea.provenance.condition_id,
                conversation_id: idea.provenance.conversation_id.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOutcome {
    pub rows: Vec<ScoreRow>,
    pub dropped: Vec<(String, DropReason)>,
    /// (task_id, dimension) pairs whose raw values were all equal.
    pub degenerate: Vec<(String, &'static str)>,
}

/// Exclusion, normalization and creativity over a ratings file. Rating
/// rows naming unknown ideas are an error.
pub fn score_ideas(
    ideas: &[Idea],
    ratings: &[JudgeRatingRow],
    normalization: NormalizationMode,
    mode: CreativityMode,
) -> Result<ScoreOutcome, StatsError> {
    let known: BTreeSet<&str> = ideas.iter().map(|i| i.idea_id.as_str()).collect();
    let orphans: BTreeSet<String> =
        ratings.iter().filter(|r| !known.contains(r.idea_id.as_str())).map(|r| r.idea_id.clone()).collect();
    if !orphans.is_empty() {
        return Err(StatsError::UnknownIdeas(orphans.into_iter().collect()));
    }
    for r in ratings {
        r.validate()?;
    }
    let exclusion = exclude_invalid_ideas(ideas, ratings)?;
    let normalized = minmax_normalize(&exclusion.kept, ratings, normalization)?;
    let mut degenerate = BTreeSet::new();
    for n in &normalized {
        if n.novelty_degenerate {
            degenerate.insert((n.task_id.clone(), "novelty"));
        }
        if n.usefulness_degenerate {
            degenerate.insert((n.task_id.clone(), "usefulness"));
        }
    }
    Ok(ScoreOutcome {
        rows: creativity_scores(&normalized, &exclusion.kept, mode)?,
        dropped: exclusion.dropped.into_iter().map(|(i, r)| (i.idea_id, r)).collect(),
        degenerate: degenerate.into_iter().collect(),
    })
}

pub fn write_scores<W: Write>(rows: &[ScoreRow], sink: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "idea_id",
            "task_id",
            "source",
            "novelty",
            "usefulness",
            "creativity",
            "creativity_additive",
            "condition_id",
            "conversation_id",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores<R: Read>(source: R) -> Result<Vec<ScoreRow>, StatsError> {
    csv::Reader::from_reader(source).deserialize().map(|r| r.map_err(StatsError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn idea(id: &str, task: &str) -> Idea {
        Idea {
            idea_id: id.into(),
            raw_text: format!("text {id}"),
            harmonized_text: None,
            provenance: Provenance { conversation_id: None, condition_id: None, task_id: task.into(), source: IdeaSource::LlmTeam },
        }
    }

    fn rating(id: &str, judge: &str, n: u8, u: u8) -> JudgeRatingRow {
        JudgeRatingRow { idea_id: id.into(), judge_id: judge.into(), novelty_raw: n, usefulness_raw: u }
    }

    #[test]
    fn minmax_landmarks() {
        assert_eq!(minmax(&[2.0, 4.0, 6.0]), (vec![0.0, 0.5, 1.0], false));
        assert_eq!(minmax(&[3.0, 3.0]), (vec![0.0, 0.0], true));
        let affine: Vec<f64> = [2.0, 4.0, 6.0].iter().map(|x| 3.0 * x - 7.0).collect();
        assert_eq!(minmax(&affine).0, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn tasks_normalize_independently() {
        let ideas = vec![idea("a", "t1"), idea("b", "t1"), idea("c", "t2"), idea("d", "t2")];
        let ratings = vec![
            rating("a", "j", 2, 5),
            rating("b", "j", 4, 9),
            rating("c", "j", 9, 1),
            rating("d", "j", 10, 3),
        ];
        let n = minmax_normalize(&ideas, &ratings, NormalizationMode::JudgeMean).unwrap();
        let nov: Vec<f64> = n.iter().map(|r| r.novelty).collect();
        assert_eq!(nov, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn per_judge_mode_averages_after_scaling() {
        let ideas = vec![idea("a", "t"), idea("b", "t"), idea("c", "t")];
        let ratings = vec![
            rating("a", "j1", 1, 1),
            rating("b", "j1", 2, 2),
            rating("c", "j1", 3, 3),
            rating("a", "j2", 9, 9),
            rating("b", "j2", 5, 5),
            rating("c", "j2", 7, 7),
        ];
        let n = minmax_normalize(&ideas, &ratings, NormalizationMode::PerJudge).unwrap();
        assert_eq!(n.iter().map(|r| r.novelty).collect::<Vec<_>>(), vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn creativity_modes() {
        let ideas = vec![idea("a", "t")];
        let row = NormalizedIdea {
            idea_id: "a".into(),
            task_id: "t".into(),
            novelty: 0.3,
            usefulness: 0.7,
            novelty_degenerate: false,
            usefulness_degenerate: false,
        };
        let p = creativity_scores(&[row.clone()], &ideas, CreativityMode::Product).unwrap();
        assert!((p[0].creativity - 0.21).abs() < 1e-15);
        assert_eq!(p[0].creativity_additive, None);
        let a = creativity_scores(&[row], &ideas, CreativityMode::Additive).unwrap();
        assert_eq!(a[0].creativity_additive, Some(1.0));
    }

    #[test]
    fn orphan_ratings_are_listed() {
        let err = score_ideas(&[idea("a", "t")], &[rating("a", "j", 1, 1), rating("zz", "j", 1, 1)], Default::default(), Default::default())
            .unwrap_err();
        assert!(matches!(err, StatsError::UnknownIdeas(ref ids) if ids == &["zz".to_string()]));
    }

    #[test]
    fn csv_round_trip() {
        let ideas = vec![idea("a", "t"), idea("b", "t")];
        let out = score_ideas(&ideas, &[rating("a", "j", 1, 4), rating("b", "j", 3, 2)], Default::default(), CreativityMode::Additive)
            .unwrap();
        let mut buf = Vec::new();
        write_scores(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("idea_id,task_id,source,novelty,usefulness,creativity,creativity_additive,condition_id,conversation_id\n"));
        assert_eq!(read_scores(&buf[..]).unwrap(), out.rows);
    }
}
