//! Input provenance tags for messages entering an agent context.
//!
//! The kind set is closed. A document with any other `kind` is treated as
//! unprovenanced external input, so a message cannot claim to be
//! `internal_system` by inventing a value.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Prepended to inter-session turns. Byte-stable; tests depend on it.
pub const INTER_SESSION_PREFIX: &str = "[Inter-session message] ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputProvenanceKind {
    ExternalUser,
    InterSession,
    InternalSystem,
}

impl InputProvenanceKind {
    pub const ALL: [InputProvenanceKind; 3] = [
        InputProvenanceKind::ExternalUser,
        InputProvenanceKind::InterSession,
        InputProvenanceKind::InternalSystem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputProvenanceKind::ExternalUser => "external_user",
            InputProvenanceKind::InterSession => "inter_session",
            InputProvenanceKind::InternalSystem => "internal_system",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputProvenance {
    pub kind: InputProvenanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_session_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tool: Option<String>,
}

impl InputProvenance {
    pub fn new(kind: InputProvenanceKind) -> Self {
        Self {
            kind,
            source_session_key: None,
            source_channel: None,
            source_tool: None,
        }
    }

    pub fn inter_session(source_session_key: impl Into<String>) -> Self {
        Self {
            source_session_key: Some(source_session_key.into()),
            ..Self::new(InputProvenanceKind::InterSession)
        }
    }
}

/// Accepts a loosely-typed document and returns a provenance tag only when
/// `kind` is one of the closed values. Source fields are kept only for
/// kinds that carry them, and only when they are strings.
pub fn normalize_input_provenance(candidate: &Value) -> Option<InputProvenance> {
    let obj = candidate.as_object()?;
    let kind = InputProvenanceKind::parse(obj.get("kind")?.as_str()?)?;
    let mut out = InputProvenance::new(kind);
    if kind != InputProvenanceKind::ExternalUser {
        let field = |name: &str| obj.get(name).and_then(Value::as_str).map(str::to_string);
        out.source_session_key = field("sourceSessionKey");
        out.source_channel = field("sourceChannel");
        out.source_tool = field("sourceTool");
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMessage {
    pub role: Role,
    pub content: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "deserialize_provenance"
    )]
    pub provenance: Option<InputProvenance>,
    /// Set on messages produced by [`sanitize_session_history`]; never
    /// persisted.
    #[serde(skip)]
    pub annotated: bool,
}

fn deserialize_provenance<'de, D>(de: D) -> Result<Option<InputProvenance>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = Value::deserialize(de)?;
    Ok(normalize_input_provenance(&raw))
}

impl SessionMessage {
    pub fn new(role: Role, content: impl Into<String>, provenance: Option<InputProvenance>) -> Self {
        Self {
            role,
            content: content.into(),
            provenance,
            annotated: false,
        }
    }

    fn is_inter_session(&self) -> bool {
        matches!(&self.provenance, Some(p) if p.kind == InputProvenanceKind::InterSession)
    }
}

/// Returns an annotated copy of `messages`. The input is not modified.
/// Already-annotated messages are not prefixed again; the guard is the
/// in-memory flag, not the content text.
pub fn sanitize_session_history(messages: &[SessionMessage]) -> Vec<SessionMessage> {
    messages
        .iter()
        .map(|m| {
            if m.is_inter_session() && !m.annotated {
                SessionMessage {
                    content: format!("{INTER_SESSION_PREFIX}{}", m.content),
                    annotated: true,
                    ..m.clone()
                }
            } else {
                m.clone()
            }
        })
        .collect()
}

/// Memory builders skip turns for which this returns true.
pub fn has_inter_session_user_provenance(message: &SessionMessage) -> bool {
    message.role == Role::User && message.is_inter_session()
}
