//! Sender allowlists keyed on immutable ids, plus repairing legacy configs
//! that still list @handles.
//!
//!     cargo run --example identity_allowlist

use agentguard::identity::{repair_allow_from_handles, resolve_allowlist_identity, LookupError, SenderContext};

fn main() {
    let allow_from: Vec<String> = vec!["123456789".into(), "@alice".into()];

    let owner = SenderContext::new("123456789", Some("@owner".into())).expect("non-empty id");
    // Someone who renamed themselves to @alice gains nothing.
    let impostor = SenderContext::new("987", Some("@alice".into())).expect("non-empty id");
    for sender in [&owner, &impostor] {
        println!(
            "{} ({:?}) -> {:?}",
            sender.sender_id(),
            sender.raw_handle(),
            resolve_allowlist_identity(&allow_from, sender)
        );
    }

    let platform = |handle: &str| match handle {
        "@alice" => Ok("777".to_string()),
        "@down" => Err(LookupError::Transport("503 from platform API".into())),
        _ => Err(LookupError::NotFound),
    };
    let legacy: Vec<String> = ["@alice", "42", "*", "@ghost", "@down"].map(String::from).to_vec();
    let (repaired, report) = repair_allow_from_handles(&legacy, &platform);
    println!("repaired allowFrom: {repaired:?}");
    for record in report {
        println!("  {:<8} {:?}", record.entry, record.outcome);
    }
}
