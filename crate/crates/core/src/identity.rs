//! Channel sender allowlists keyed on immutable platform identifiers.
//!
//! Display names and `@handles` can be changed by their owner, so they are
//! never compared. [`MatchSource`] has no name variant; a handle-based
//! match cannot be expressed.

use serde::{Deserialize, Serialize};

pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSource {
    Wildcard,
    Id,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllowlistMatch {
    pub allowed: bool,
    pub match_key: Option<String>,
    pub match_source: Option<MatchSource>,
}

impl AllowlistMatch {
    fn denied() -> Self {
        Self {
            allowed: false,
            match_key: None,
            match_source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderContext {
    sender_id: String,
    /// Carried for logging only.
    raw_handle: Option<String>,
}

impl SenderContext {
    pub fn new(sender_id: impl Into<String>, raw_handle: Option<String>) -> Option<Self> {
        let sender_id = sender_id.into();
        (!sender_id.is_empty()).then_some(Self {
            sender_id,
            raw_handle,
        })
    }

    pub fn sender_id(&self) -> &str {
        &self.sender_id
    }

    pub fn raw_handle(&self) -> Option<&str> {
        self.raw_handle.as_deref()
    }
}

pub fn resolve_allowlist_identity(allow_from: &[String], sender: &SenderContext) -> AllowlistMatch {
    if allow_from.iter().any(|e| e.trim() == WILDCARD) {
        return AllowlistMatch {
            allowed: true,
            match_key: Some(WILDCARD.into()),
            match_source: Some(MatchSource::Wildcard),
        };
    }
    match allow_from.iter().find(|e| e.trim() == sender.sender_id) {
        Some(entry) => AllowlistMatch {
            allowed: true,
            match_key: Some(entry.trim().to_string()),
            match_source: Some(MatchSource::Id),
        },
        None => AllowlistMatch::denied(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupError {
    NotFound,
    Transport(String),
}

/// Resolves a mutable handle to the platform's immutable id. Production
/// implementations call the platform API; tests use a table.
pub trait HandleResolver {
    fn lookup(&self, handle: &str) -> Result<String, LookupError>;
}

impl<F> HandleResolver for F
where
    F: Fn(&str) -> Result<String, LookupError>,
{
    fn lookup(&self, handle: &str) -> Result<String, LookupError> {
        self(handle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RepairOutcome {
    Passthrough,
    Rewritten { id: String },
    Unresolved { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairRecord {
    pub entry: String,
    #[serde(flatten)]
    pub outcome: RepairOutcome,
}

fn is_numeric_id(entry: &str) -> bool {
    !entry.is_empty() && entry.bytes().all(|b| b.is_ascii_digit())
}

/// Rewrites handle entries to immutable ids. Lookup failures keep the entry
/// and are reported per entry; the batch never aborts. Order is preserved.
pub fn repair_allow_from_handles(
    entries: &[String],
    resolver: &dyn HandleResolver,
) -> (Vec<String>, Vec<RepairRecord>) {
    let mut repaired = Vec::with_capacity(entries.len());
    let mut report = Vec::with_capacity(entries.len());
    for raw in entries {
        let entry = raw.trim();
        let needs_lookup = entry != WILDCARD && (entry.starts_with('@') || !is_numeric_id(entry));
        let outcome = if !needs_lookup {
            repaired.push(entry.to_string());
            RepairOutcome::Passthrough
        } else {
            match resolver.lookup(entry) {
                Ok(id) if is_numeric_id(id.trim()) => {
                    let id = id.trim().to_string();
                    repaired.push(id.clone());
                    RepairOutcome::Rewritten { id }
                }
                Ok(id) => {
                    repaired.push(entry.to_string());
                    RepairOutcome::Unresolved {
                        reason: format!("resolver returned non-numeric id {id:?}"),
                    }
                }
                Err(LookupError::NotFound) => {
                    repaired.push(entry.to_string());
                    RepairOutcome::Unresolved {
                        reason: "not found".into(),
                    }
                }
                Err(LookupError::Transport(e)) => {
                    repaired.push(entry.to_string());
                    RepairOutcome::Unresolved {
                        reason: format!("lookup failed: {e}"),
                    }
                }
            }
        };
        report.push(RepairRecord {
            entry: entry.to_string(),
            outcome,
        });
    }
    (repaired, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn table(handle: &str) -> Result<String, LookupError> {
        match handle {
            "@alice" => Ok("777".into()),
            "@bob" => Ok("not-a-number".into()),
            "@flaky" => Err(LookupError::Transport("timeout".into())),
            _ => Err(LookupError::NotFound),
        }
    }

    #[test]
    fn exact_id_match() {
        let sender = SenderContext::new("123456789", None).unwrap();
        let m = resolve_allowlist_identity(&strings(&["123456789"]), &sender);
        assert!(m.allowed);
        assert_eq!(m.match_source, Some(MatchSource::Id));
    }

    #[test]
    fn handles_never_match() {
        let sender = SenderContext::new("987", Some("@alice".into())).unwrap();
        let m = resolve_allowlist_identity(&strings(&["@alice"]), &sender);
        assert!(!m.allowed);
        assert_eq!(m.match_source, None);
    }

    #[test]
    fn wildcard() {
        let sender = SenderContext::new("x", None).unwrap();
        let m = resolve_allowlist_identity(&strings(&["*"]), &sender);
        assert_eq!(m.match_source, Some(MatchSource::Wildcard));
        assert!(resolve_allowlist_identity(&[], &sender).allowed == false);
    }

    #[test]
    fn ids_are_case_sensitive() {
        let sender = SenderContext::new("U01ABC", None).unwrap();
        assert!(!resolve_allowlist_identity(&strings(&["u01abc"]), &sender).allowed);
        assert!(SenderContext::new("", None).is_none());
    }

    #[test]
    fn repair_rewrites_handles() {
        let (out, report) = repair_allow_from_handles(&strings(&["@alice", "42"]), &table);
        assert_eq!(out, strings(&["777", "42"]));
        assert_eq!(report[0].outcome, RepairOutcome::Rewritten { id: "777".into() });
        assert_eq!(report[1].outcome, RepairOutcome::Passthrough);
    }

    #[test]
    fn repair_failures_are_per_entry() {
        let (out, report) =
            repair_allow_from_handles(&strings(&["@ghost", "*", "@flaky", "@bob", "carol"]), &table);
        assert_eq!(out, strings(&["@ghost", "*", "@flaky", "@bob", "carol"]));
        assert!(matches!(report[0].outcome, RepairOutcome::Unresolved { .. }));
        assert_eq!(report[1].outcome, RepairOutcome::Passthrough);
        assert!(matches!(&report[2].outcome, RepairOutcome::Unresolved { reason } if reason.contains("timeout")));
        assert!(matches!(report[3].outcome, RepairOutcome::Unresolved { .. }));
    }

    #[test]
    fn repair_is_idempotent() {
        let input = strings(&["@alice", "@ghost", "5", "*"]);
        let (once, _) = repair_allow_from_handles(&input, &table);
        let (twice, _) = repair_allow_from_handles(&once, &table);
        assert_eq!(once, twice);
    }

    proptest! {
        #[test]
        fn handle_blindness(
            allow in proptest::collection::vec("[@*0-9a-c]{1,4}", 0..5),
            id in "[0-9a-c]{1,4}",
            h1 in proptest::option::of("[@0-9a-c]{0,4}"),
            h2 in proptest::option::of("[@0-9a-c]{0,4}"),
        ) {
            let a = resolve_allowlist_identity(&allow, &SenderContext::new(id.clone(), h1).unwrap());
            let b = resolve_allowlist_identity(&allow, &SenderContext::new(id, h2).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
