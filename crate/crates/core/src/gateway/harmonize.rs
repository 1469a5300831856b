//! Stylistic normalization of final ideas before judging.

use super::{ChatGateway, ChatMessage, ChatRequest, GatewayError, RequestPurpose};
use crate::corpus::{word_count, Idea, HARMONIZED_MAX_WORDS};

/// Verbatim harmonization system prompt. Its SHA-256 is pinned in tests.
pub const HARMONIZE_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/harmonize_system.txt");
pub const HARMONIZE_USER_TEMPLATE: &str = include_str!("../../assets/prompts/harmonize_user.txt");
pub const HARMONIZE_MODEL: &str = "gpt-4.1";

pub(crate) fn user_prefix() -> &'static str {
    HARMONIZE_USER_TEMPLATE.trim_end_matches("{idea}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonized {
    pub idea: Idea,
    /// Reply used first- or second-person pronouns.
    pub style_violation: bool,
}

pub fn harmonize_request(idea: &Idea, model: &str) -> ChatRequest {
    ChatRequest {
        model_name: model.to_string(),
        messages: vec![
            ChatMessage::system(HARMONIZE_SYSTEM_PROMPT),
            ChatMessage::user(HARMONIZE_USER_TEMPLATE.replace("{idea}", &idea.raw_text)),
        ],
        temperature: Some(0.0),
        max_output_tokens: None,
        reasoning_effort: None,
        purpose: RequestPurpose::Harmonize,
    }
}

/// True when the text uses any of we/I/you/us/our as a word.
pub fn detect_style_violation(text: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.split('\'').next().unwrap_or(w))
        .any(|w| w == "I" || matches!(w.to_lowercase().as_str(), "we" | "you" | "us" | "our"))
}

pub fn harmonize_idea(idea: &Idea, gateway: &dyn ChatGateway, model: &str) -> Result<Harmonized, GatewayError> {
    if idea.raw_text.trim().is_empty() {
        return Err(GatewayError::Precondition(format!("idea {} has empty text", idea.idea_id)));
    }
    let reply = gateway.complete(&harmonize_request(idea, model))?;
    let text = reply.content.trim().to_string();
    let words = word_count(&text);
    if words > HARMONIZED_MAX_WORDS {
        return Err(GatewayError::TooLong(words));
    }
    let style_violation = detect_style_violation(&text);
    let mut idea = idea.clone();
    idea.harmonized_text = Some(text);
    Ok(Harmonized { idea, style_violation })
}
