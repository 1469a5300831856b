use std::collections::{BTreeMap, HashSet};

use unicode_normalization::UnicodeNormalization;

use super::{CorpusError, Idea, JudgeRatingRow};

/// Judges giving zero on a dimension needed to mark an idea irrelevant.
pub const ZERO_RATING_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// At least three zero ratings on novelty or on usefulness.
    ZeroRated,
    /// Same normalized text as an earlier kept idea.
    Duplicate,
}

#[derive(Debug, Clone, Default)]
pub struct Exclusion {
    pub kept: Vec<Idea>,
    pub dropped: Vec<(Idea, DropReason)>,
}

/// NFC, lowercase, single spaces.
pub fn normalize_idea_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Drops ideas judged irrelevant and exact duplicates, keeping the earliest
/// copy. Order of `kept` and `dropped` follows the input.
pub fn exclude_invalid_ideas(
    ideas: &[Idea],
    ratings: &[JudgeRatingRow],
) -> Result<Exclusion, CorpusError> {
    // (rows, novelty zeros, usefulness zeros)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in ratings {
        let c = counts.entry(r.idea_id.as_str()).or_default();
        c.0 += 1;
        c.1 += usize::from(r.novelty_raw == 0);
        c.2 += usize::from(r.usefulness_raw == 0);
    }
    let unrated: Vec<String> = ideas
        .iter()
        .filter(|i| !counts.contains_key(i.idea_id.as_str()))
        .map(|i| i.idea_id.clone())
        .collect();
    if !unrated.is_empty() {
        return Err(CorpusError::Unrated(unrated));
    }

    let mut out = Exclusion::default();
    let mut seen = HashSet::new();
    for idea in ideas {
        let (_, nz, uz) = counts[idea.idea_id.as_str()];
        if nz >= ZERO_RATING_THRESHOLD || uz >= ZERO_RATING_THRESHOLD {
            out.dropped.push((idea.clone(), DropReason::ZeroRated));
        } else if !seen.insert(normalize_idea_text(&idea.raw_text)) {
            out.dropped.push((idea.clone(), DropReason::Duplicate));
        } else {
            out.kept.push(idea.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IdeaSource, Provenance};
    use proptest::prelude::*;

    fn idea(id: &str, text: &str) -> Idea {
        Idea {
            idea_id: id.into(),
            raw_text: text.into(),
            harmonized_text: None,
            provenance: Provenance {
                conversation_id: None,
                condition_id: None,
                task_id: "t".into(),
                source: IdeaSource::LlmTeam,
            },
        }
    }

    fn rows(id: &str, novelty: &[u8], usefulness: &[u8]) -> Vec<JudgeRatingRow> {
        novelty
            .iter()
            .zip(usefulness)
            .enumerate()
            .map(|(j, (&n, &u))| JudgeRatingRow {
                idea_id: id.into(),
                judge_id: format!("j{j}"),
                novelty_raw: n,
                usefulness_raw: u,
            })
            .collect()
    }

    #[test]
    fn three_zero_novelty_ratings_drop() {
        let r = rows("a", &[0, 0, 0, 5, 6], &[5; 5]);
        let out = exclude_invalid_ideas(&[idea("a", "x")], &r).unwrap();
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped[0].1, DropReason::ZeroRated);
    }

    #[test]
    fn two_zeros_are_kept() {
        let r = rows("a", &[0, 0, 4, 5, 6], &[5; 5]);
        let out = exclude_invalid_ideas(&[idea("a", "x")], &r).unwrap();
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn zero_usefulness_also_counts() {
        let r = rows("a", &[5; 5], &[0, 0, 0, 1, 1]);
        let out = exclude_invalid_ideas(&[idea("a", "x")], &r).unwrap();
        assert_eq!(out.dropped.len(), 1);
    }

    #[test]
    fn duplicate_after_normalization_drops_second() {
        let mut r = rows("a", &[5; 5], &[5; 5]);
        r.extend(rows("b", &[5; 5], &[5; 5]));
        let ideas = [idea("a", "Solar  Kiosks\tfor all"), idea("b", "solar kiosks for ALL")];
        let out = exclude_invalid_ideas(&ideas, &r).unwrap();
        assert_eq!(out.kept[0].idea_id, "a");
        assert_eq!(out.dropped[0].0.idea_id, "b");
        assert_eq!(out.dropped[0].1, DropReason::Duplicate);
    }

    #[test]
    fn nfc_normalization_merges_composed_forms() {
        assert_eq!(normalize_idea_text("caf\u{65}\u{301}"), normalize_idea_text("caf\u{e9}"));
    }

    #[test]
    fn unrated_idea_is_an_error() {
        let err = exclude_invalid_ideas(&[idea("a", "x")], &[]).unwrap_err();
        assert!(matches!(err, CorpusError::Unrated(ids) if ids == vec!["a".to_string()]));
    }

    proptest! {
        #[test]
        fn idempotent_partition(
            specs in proptest::collection::vec((0usize..4, proptest::collection::vec(0u8..3, 5)), 1..30)
        ) {
            let texts = ["alpha", "beta", "Alpha", "gamma"];
            let mut ideas = Vec::new();
            let mut ratings = Vec::new();
            for (i, (t, nov)) in specs.iter().enumerate() {
                let id = format!("i{i}");
                ideas.push(idea(&id, texts[*t]));
                ratings.extend(rows(&id, nov, &[4; 5]));
            }
            let once = exclude_invalid_ideas(&ideas, &ratings).unwrap();
            let twice = exclude_invalid_ideas(&once.kept, &ratings).unwrap();
            prop_assert_eq!(&twice.kept, &once.kept);
            prop_assert!(twice.dropped.is_empty());

            let mut all: Vec<String> = once.kept.iter().map(|i| i.idea_id.clone())
                .chain(once.dropped.iter().map(|(i, _)| i.idea_id.clone()))
                .collect();
            all.sort();
            let mut input: Vec<String> = ideas.iter().map(|i| i.idea_id.clone()).collect();
            input.sort();
            prop_assert_eq!(all, input);
        }
    }
}
