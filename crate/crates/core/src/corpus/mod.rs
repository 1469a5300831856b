//! Domain types shared by every stage, plus transcript, idea and rating
//! persistence and the validity filter applied before scoring.

mod filter;
mod io;
mod types;

pub use filter::{exclude_invalid_ideas, normalize_idea_text, DropReason, Exclusion};
pub use io::{
    load_ideas, load_ratings, load_transcript_file, load_transcripts, save_ideas, save_ratings,
    save_transcript, transcript_to_string,
};
pub use types::*;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation in {id}: {reason}")]
    Schema { id: String, reason: String },
    #[error("invariant violated in {id}: {reason}")]
    Invariant { id: String, reason: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown {kind} value {value:?}")]
    UnknownValue { kind: &'static str, value: String },
    #[error("ideas without any rating rows: {}", .0.join(", "))]
    Unrated(Vec<String>),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CorpusError {
    pub(crate) fn invariant(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invariant { id: id.into(), reason: reason.into() }
    }

    pub(crate) fn schema(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Schema { id: id.into(), reason: reason.into() }
    }
}
