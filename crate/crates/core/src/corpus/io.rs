use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    ConditionSpec, ConversationStatus, ConversationTranscript, CorpusError, Idea, JudgeRatingRow,
    TaskPrompt, Turn,
};

/// First line of a transcript record. Condition fields are flattened; the
/// task text and the final idea ride along so a load is lossless.
#[derive(Debug, Serialize, Deserialize)]
struct Header {
    conversation_id: String,
    #[serde(flatten)]
    condition: ConditionSpec,
    task_id: String,
    seed: u64,
    status: ConversationStatus,
    final_idea_id: Option<String>,
    task_premise: String,
    task_instruction: String,
    final_idea: Option<Idea>,
}

pub fn save_transcript<W: Write>(t: &ConversationTranscript, sink: &mut W) -> Result<(), CorpusError> {
    t.validate()?;
    let header = Header {
        conversation_id: t.conversation_id.clone(),
        condition: t.condition.clone(),
        task_id: t.task.task_id.clone(),
        seed: t.seed,
        status: t.status,
        final_idea_id: t.final_idea.as_ref().map(|i| i.idea_id.clone()),
        task_premise: t.task.premise.clone(),
        task_instruction: t.task.shared_instruction.clone(),
        final_idea: t.final_idea.clone(),
    };
    serde_json::to_writer(&mut *sink, &header).map_err(std::io::Error::other)?;
    sink.write_all(b"\n")?;
    for turn in &t.turns {
        serde_json::to_writer(&mut *sink, turn).map_err(std::io::Error::other)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn transcript_to_string(t: &ConversationTranscript) -> Result<String, CorpusError> {
    let mut buf = Vec::new();
    save_transcript(t, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parses a stream holding one or more transcripts. A line carrying
/// `conversation_id` starts a new record; every record is re-validated.
pub fn load_transcripts<R: Read>(source: R) -> Result<Vec<ConversationTranscript>, CorpusError> {
    let reader = BufReader::new(source);
    let mut out = Vec::new();
    let mut current: Option<ConversationTranscript> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, reason: e.to_string() })?;
        let malformed = |e: serde_json::Error| CorpusError::Malformed { line: line_no, reason: e.to_string() };
        if value.get("conversation_id").is_some() {
            if let Some(done) = current.take() {
                done.validate()?;
                out.push(done);
            }
            let h: Header = serde_json::from_value(value).map_err(malformed)?;
            current = Some(ConversationTranscript {
                conversation_id: h.conversation_id,
                condition: h.condition,
                task: TaskPrompt {
                    task_id: h.task_id,
                    premise: h.task_premise,
                    shared_instruction: h.task_instruction,
                },
                seed: h.seed,
                turns: Vec::new(),
                final_idea: h.final_idea,
                status: h.status,
            });
        } else {
            let turn: Turn = serde_json::from_value(value).map_err(malformed)?;
            match current.as_mut() {
                Some(t) => t.turns.push(turn),
                None => {
                    return Err(CorpusError::Malformed {
                        line: line_no,
                        reason: "turn record before any transcript header".into(),
                    })
                }
            }
        }
    }
    if let Some(done) = current.take() {
        done.validate()?;
        out.push(done);
    }
    Ok(out)
}

pub fn load_transcript_file(path: &Path) -> Result<Vec<ConversationTranscript>, CorpusError> {
    load_transcripts(std::fs::File::open(path)?)
}

pub fn save_ideas<W: Write>(ideas: &[Idea], sink: &mut W) -> Result<(), CorpusError> {
    for idea in ideas {
        idea.validate()?;
        serde_json::to_writer(&mut *sink, idea).map_err(std::io::Error::other)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_ideas<R: Read>(source: R) -> Result<Vec<Idea>, CorpusError> {
    let mut ideas = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let idea: Idea = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: i + 1, reason: e.to_string() })?;
        idea.validate()?;
        ideas.push(idea);
    }
    Ok(ideas)
}

pub fn save_ratings<W: Write>(rows: &[JudgeRatingRow], sink: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        row.validate()?;
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Ratings CSV with header `idea_id,judge_id,novelty_raw,usefulness_raw`.
pub fn load_ratings<R: Read>(source: R) -> Result<Vec<JudgeRatingRow>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(source);
    let expected = ["idea_id", "judge_id", "novelty_raw", "usefulness_raw"];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CorpusError::Malformed {
            line: 1,
            reason: format!("expected header {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<JudgeRatingRow>().enumerate() {
        let row = rec.map_err(|e| CorpusError::Malformed { line: i + 2, reason: e.to_string() })?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;

    pub(crate) fn sample() -> ConversationTranscript {
        let condition = crate::matrix::ConditionMatrix::shipped()
            .row(9)
            .unwrap()
            .with_models(vec!["gpt-4.1".into(); 3]);
        let task = TaskPrompt::builtin().remove(0);
        let turns = (0..3)
            .map(|i| Turn {
                turn_index: i,
                agent_index: i % 3,
                phase: if i == 2 { Phase::Synthesis } else { Phase::Discussion },
                action: if i == 2 { Action::Synthesize } else { Action::Speak },
                content: format!("turn {i}"),
                payload: None,
                token_count: Some(3),
            })
            .collect();
        ConversationTranscript {
            conversation_id: "c9".into(),
            final_idea: Some(Idea {
                idea_id: "c9/i0".into(),
                raw_text: "turn 2".into(),
                harmonized_text: None,
                provenance: Provenance {
                    conversation_id: Some("c9".into()),
                    condition_id: Some(9),
                    task_id: task.task_id.clone(),
                    source: IdeaSource::LlmTeam,
                },
            }),
            condition,
            task,
            seed: u64::MAX - 3,
            turns,
            status: ConversationStatus::Completed,
        }
    }

    #[test]
    fn three_turns_make_four_lines() {
        let text = transcript_to_string(&sample()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"final_idea_id\":\"c9/i0\""));
    }

    #[test]
    fn empty_transcript_is_schema_violation() {
        let mut t = sample();
        t.turns.clear();
        let err = save_transcript(&t, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { .. }), "{err}");
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let text = transcript_to_string(&t).unwrap();
        let back = load_transcripts(text.as_bytes()).unwrap();
        assert_eq!(back, vec![t]);
    }

    #[test]
    fn truncated_final_line_reports_line_number() {
        let text = transcript_to_string(&sample()).unwrap();
        let cut = &text[..text.len() - 10];
        match load_transcripts(cut.as_bytes()) {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_contiguous_turn_index_is_invariant_error() {
        let text = transcript_to_string(&sample()).unwrap();
        let edited = text.replacen("\"turn_index\":1", "\"turn_index\":5", 1);
        let err = load_transcripts(edited.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Invariant { .. }), "{err}");
    }

    #[test]
    fn phase_out_of_order_is_rejected() {
        let mut t = sample();
        t.turns[0].phase = Phase::Synthesis;
        t.turns[0].action = Action::Synthesize;
        assert!(t.validate().is_err());
    }

    #[test]
    fn ratings_csv_round_trip_and_header_check() {
        let rows = vec![JudgeRatingRow {
            idea_id: "a".into(),
            judge_id: "j1".into(),
            novelty_raw: 3,
            usefulness_raw: 10,
        }];
        let mut buf = Vec::new();
        save_ratings(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("idea_id,judge_id,novelty_raw,usefulness_raw\n"));
        assert_eq!(load_ratings(buf.as_slice()).unwrap(), rows);
        assert!(load_ratings("id,judge\n".as_bytes()).is_err());
        assert!(load_ratings("idea_id,judge_id,novelty_raw,usefulness_raw\na,j,11,2\n".as_bytes()).is_err());
    }
}
