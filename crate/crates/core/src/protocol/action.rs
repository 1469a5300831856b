use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Agree,
    Modify,
    Replace,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Agree => "agree",
            Self::Modify => "modify",
            Self::Replace => "replace",
        }
    }
}

/// A parsed instructed-discussion reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentAction {
    pub kind: ActionKind,
    pub idea_text: Option<String>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized action: {0}")]
pub struct ParseFailure(pub String);

const REASON_MARKER: &str = " - reason:";

fn rfind_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).rev().find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Reads the leading Agree/Modify/Replace keyword (any case). Modify and
/// Replace are split at the last " - Reason:" marker.
pub fn parse_agent_action(text: &str) -> Result<AgentAction, ParseFailure> {
    let trimmed = text.trim().trim_start_matches(['*', '#', ' ']);
    let (kind, rest) = [ActionKind::Agree, ActionKind::Modify, ActionKind::Replace]
        .into_iter()
        .find_map(|k| {
            let kw = k.as_str();
            let head = trimmed.get(..kw.len())?;
            let rest = &trimmed[kw.len()..];
            let boundary = rest.chars().next().is_none_or(|c| !c.is_alphanumeric());
            (head.eq_ignore_ascii_case(kw) && boundary).then_some((k, rest))
        })
        .ok_or_else(|| ParseFailure(text.chars().take(60).collect()))?;
    if kind == ActionKind::Agree {
        return Ok(AgentAction { kind, idea_text: None, reason: None });
    }
    let body = rest.trim_start_matches(['*', ' ']).strip_prefix(':').unwrap_or(rest);
    let body = body.trim_start_matches('*');
    let (idea, reason) = match rfind_ascii_ci(body, REASON_MARKER) {
        Some(i) => (&body[..i], Some(body[i + REASON_MARKER.len()..].trim().to_string())),
        None => (body, None),
    };
    let idea = idea.trim();
    if idea.is_empty() {
        return Err(ParseFailure(format!("{} without idea text", kind.as_str())));
    }
    Ok(AgentAction { kind, idea_text: Some(idea.to_string()), reason: reason.filter(|r| !r.is_empty()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agree() {
        let a = parse_agent_action("Agree: No changes needed").unwrap();
        assert_eq!(a, AgentAction { kind: ActionKind::Agree, idea_text: None, reason: None });
        assert_eq!(parse_agent_action("  agree").unwrap().kind, ActionKind::Agree);
    }

    #[test]
    fn modify_with_reason() {
        let a = parse_agent_action("Modify: Build solar kiosks - Reason: wider reach").unwrap();
        assert_eq!(a.kind, ActionKind::Modify);
        assert_eq!(a.idea_text.as_deref(), Some("Build solar kiosks"));
        assert_eq!(a.reason.as_deref(), Some("wider reach"));
    }

    #[test]
    fn splits_on_last_marker() {
        let a = parse_agent_action("REPLACE: A - Reason: inner - reason: outer").unwrap();
        assert_eq!(a.kind, ActionKind::Replace);
        assert_eq!(a.idea_text.as_deref(), Some("A - Reason: inner"));
        assert_eq!(a.reason.as_deref(), Some("outer"));
    }

    #[test]
    fn markdown_bold_keyword() {
        let a = parse_agent_action("**Modify:** Solar kiosks").unwrap();
        assert_eq!(a.idea_text.as_deref(), Some("Solar kiosks"));
    }

    #[test]
    fn no_keyword_fails() {
        assert!(parse_agent_action("I love this plan!").is_err());
        assert!(parse_agent_action("Agreeable idea").is_err());
        assert!(parse_agent_action("Modify: - Reason: none").is_err());
    }
}
