//! Policy enforcement for AI-agent execution runtimes.
//!
//! The crate never executes anything. Every entry point takes a request
//! (a shell command, a sandbox configuration, a gateway URL, a webhook
//! delivery, a skill directory) and returns a decision that the runtime
//! enforces.
//!
//! - [`shell`] tokenizes shell text and fails closed on constructs whose
//!   runtime meaning differs from their lexical form.
//! - [`wrapper`] unwraps dispatch wrappers (`env`, `nice`, `nohup`) and
//!   shell multiplexers (`busybox`, `toybox`).
//! - [`safe_bin`] checks per-binary flag policies with GNU long-option
//!   abbreviation resolved first.
//! - [`exec`] is the three-phase allowlist pipeline and the approval store.
//! - [`sandbox`] validates container bind mounts, network mode and
//!   security profiles.
//! - [`gateway`] validates gateway URL overrides and node-invoke methods.
//! - [`identity`] matches channel senders on immutable ids only.
//! - [`webhook`] verifies HMAC-SHA256 signed deliveries.
//! - [`provenance`] tags and annotates inter-session messages.
//! - [`skill`] builds and verifies content manifests and scans for dropper
//!   indicators.
//! - [`taxonomy`] labels every reason with an attack surface and a kill
//!   chain stage.
//!
//! ```
//! use agentguard::exec::{evaluate_shell_allowlist, ApprovalStore, StaticResolver, Verdict};
//! use agentguard::policy::PolicyDocument;
//! use agentguard::shell::RawCommand;
//!
//! let policy = PolicyDocument::from_json(r#"{
//!     "version": 1,
//!     "allowlist": [{ "pattern": "sort", "safe_bin_profile": "sort" }]
//! }"#).unwrap();
//! let resolver = StaticResolver::new(["/usr/bin"], ["/usr/bin/sort"]);
//! let store = ApprovalStore::default();
//!
//! let raw = RawCommand::new("sort -u notes.txt").unwrap();
//! let decision = evaluate_shell_allowlist(&raw, &policy, &store, &resolver);
//! assert_eq!(decision.verdict, Verdict::Allow);
//!
//! let raw = RawCommand::new("sort --compress-prog=sh notes.txt").unwrap();
//! let decision = evaluate_shell_allowlist(&raw, &policy, &store, &resolver);
//! assert_eq!(decision.verdict, Verdict::Deny);
//! ```

pub mod cli;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod identity;
pub mod paths;
pub mod policy;
pub mod provenance;
pub mod safe_bin;
pub mod sandbox;
pub mod shell;
pub mod skill;
pub mod taxonomy;
pub mod webhook;
pub mod wrapper;

pub use error::{Error, Result};
