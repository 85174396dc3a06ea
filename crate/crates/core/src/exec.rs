//! The three-phase exec decision pipeline and the persistent approval store.
//!
//! 1. Lexical and semantic allowlist evaluation over the analyzed chain.
//! 2. Approval-state lookup for commands the allowlist did not cover.
//! 3. A single [`ExecDecision`] for the whole chain: `Deny` dominates
//!    `RequireApproval`, which dominates `Allow`.
//!
//! Nothing here runs a process or consults the ambient `PATH`; executable
//! lookup goes through an injected [`PathResolver`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{basename, normalize};
use crate::policy::PolicyDocument;
use crate::safe_bin::{evaluate_safe_bin, FlagDecision};
use crate::shell::{analyze, CommandAnalysis, RawCommand, SimpleCommand};
use crate::taxonomy::{label_decision, AuditReason, Label};
use crate::wrapper::{is_multiplexer, resolve_invocation, Invocation, MAX_UNWRAP_DEPTH};

/// Interpreters whose `-c` payload is re-analyzed as shell text.
pub const SHELL_INTERPRETERS: &[&str] = &["sh", "ash", "bash", "dash", "hush", "ksh", "mksh", "zsh"];

pub const STORE_FORMAT: &str = "approval-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Session,
    #[default]
    AllowAlways,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Operator,
    ApprovalFlow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllowlistEntry {
    /// Executable basename, or an absolute path matched exactly.
    pub pattern: String,
    #[serde(default)]
    pub scope: Scope,
    /// Name of a safe-bin profile (its `binary`) that must permit the argv.
    #[serde(default)]
    pub safe_bin_profile: Option<String>,
}

impl AllowlistEntry {
    pub fn validate(&self) -> Result<()> {
        if self.pattern.is_empty() {
            return Err(Error::Config("allowlist pattern must not be empty".into()));
        }
        if self.pattern.starts_with('/') {
            if normalize(&self.pattern) != self.pattern {
                return Err(Error::Config(format!(
                    "allowlist pattern {} is not normalized",
                    self.pattern
                )));
            }
        } else if self.pattern.contains('/') {
            return Err(Error::Config(format!(
                "allowlist pattern {} must be a basename or an absolute path",
                self.pattern
            )));
        }
        Ok(())
    }

    fn matches(&self, identity: &ExecutableIdentity) -> bool {
        if self.pattern.starts_with('/') {
            self.pattern == identity.as_str()
        } else {
            self.pattern == basename(identity.as_str())
        }
    }
}

/// A resolved, normalized absolute executable path. Only produced by
/// resolution through a [`PathResolver`] or by loading a validated store.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ExecutableIdentity(String);

impl ExecutableIdentity {
    pub fn resolve(program: &str, resolver: &dyn PathResolver) -> Option<Self> {
        let resolved = resolver.resolve(program)?;
        Self::from_resolved(&resolved).ok()
    }

    /// Identity for an already-resolved absolute path.
    pub fn from_path(path: &str) -> Result<Self> {
        Self::from_resolved(path)
    }

    fn from_resolved(path: &str) -> Result<Self> {
        if !path.starts_with('/') {
            return Err(Error::PolicyViolation(format!("{path:?} is not an absolute path")));
        }
        let normalized = normalize(path);
        if normalized == "/" {
            return Err(Error::PolicyViolation("root is not an executable".into()));
        }
        Ok(Self(normalized))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ExecutableIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Maps a program word to an absolute path using an explicit search path.
pub trait PathResolver {
    fn resolve(&self, program: &str) -> Option<String>;
}

impl<F> PathResolver for F
where
    F: Fn(&str) -> Option<String>,
{
    fn resolve(&self, program: &str) -> Option<String> {
        self(program)
    }
}

/// Table-backed resolver: a search path plus the set of executables that
/// exist. Pure, so evaluations are reproducible.
#[derive(Debug, Clone, Default)]
pub struct StaticResolver {
    search_path: Vec<String>,
    executables: BTreeSet<String>,
}

impl StaticResolver {
    pub fn new<I, S, J, T>(search_path: I, executables: J) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        J: IntoIterator<Item = T>,
        T: Into<String>,
    {
        Self {
            search_path: search_path.into_iter().map(Into::into).collect(),
            executables: executables.into_iter().map(|e| normalize(&e.into())).collect(),
        }
    }
}

impl PathResolver for StaticResolver {
    fn resolve(&self, program: &str) -> Option<String> {
        if program.contains('/') {
            let path = normalize(program);
            return (program.starts_with('/') && self.executables.contains(&path)).then_some(path);
        }
        self.search_path
            .iter()
            .map(|dir| normalize(&format!("{dir}/{program}")))
            .find(|candidate| self.executables.contains(candidate))
    }
}

/// Filesystem resolver over an explicit directory list. Never reads `PATH`.
#[derive(Debug, Clone)]
pub struct SearchPathResolver {
    search_path: Vec<PathBuf>,
}

impl SearchPathResolver {
    pub fn new<I, P>(search_path: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<PathBuf>,
    {
        Self {
            search_path: search_path.into_iter().map(Into::into).collect(),
        }
    }

    fn is_executable(path: &Path) -> bool {
        let Ok(meta) = fs::metadata(path) else {
            return false;
        };
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            meta.is_file() && meta.permissions().mode() & 0o111 != 0
        }
        #[cfg(not(unix))]
        {
            meta.is_file()
        }
    }
}

impl PathResolver for SearchPathResolver {
    fn resolve(&self, program: &str) -> Option<String> {
        if program.contains('/') {
            let path = normalize(program);
            return (program.starts_with('/') && Self::is_executable(Path::new(&path)))
                .then_some(path);
        }
        self.search_path
            .iter()
            .map(|dir| dir.join(program))
            .find(|candidate| Self::is_executable(candidate))
            .and_then(|p| p.to_str().map(normalize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalState {
    pub scope: Scope,
    /// Seconds since the Unix epoch, UTC.
    pub created_at: u64,
    pub origin: Origin,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreHeader {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreRecord {
    identity: String,
    scope: Scope,
    created_at: u64,
    origin: Origin,
}

/// Persistent map from resolved executable identity to approval state.
///
/// Callers serialize mutation; evaluation only reads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApprovalStore {
    entries: BTreeMap<ExecutableIdentity, ApprovalState>,
}

impl ApprovalStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, identity: &ExecutableIdentity) -> bool {
        self.entries.contains_key(identity)
    }

    pub fn lookup(&self, identity: &ExecutableIdentity) -> Option<&ApprovalState> {
        self.entries.get(identity)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ExecutableIdentity, &ApprovalState)> {
        self.entries.iter()
    }

    /// Records an approval. Multiplexer binaries are refused: approving
    /// `busybox` would approve every applet behind it.
    pub fn record_approval(
        &mut self,
        identity: &ExecutableIdentity,
        scope: Scope,
        origin: Origin,
        now: u64,
    ) -> Result<()> {
        if is_multiplexer(identity.as_str()) {
            return Err(Error::PolicyViolation(format!(
                "{identity} is a multiplexer; approvals must name the dispatched tool"
            )));
        }
        self.entries.insert(
            identity.clone(),
            ApprovalState {
                scope,
                created_at: now,
                origin,
            },
        );
        Ok(())
    }

    pub fn revoke(&mut self, identity: &ExecutableIdentity) -> Option<ApprovalState> {
        self.entries.remove(identity)
    }

    /// Drops session-scoped approvals.
    pub fn end_session(&mut self) {
        self.entries.retain(|_, state| state.scope != Scope::Session);
    }

    /// One header line, then one JSON record per line in identity order.
    pub fn to_jsonl(&self) -> String {
        let header = StoreHeader {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (identity, state) in &self.entries {
            let record = StoreRecord {
                identity: identity.0.clone(),
                scope: state.scope,
                created_at: state.created_at,
                origin: state.origin,
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: StoreHeader = match lines.next() {
            Some(line) => serde_json::from_str(line)?,
            None => return Ok(Self::default()),
        };
        if header.format != STORE_FORMAT || header.version != STORE_VERSION {
            return Err(Error::Config(format!(
                "unsupported approval store {} v{}",
                header.format, header.version
            )));
        }
        let mut store = Self::default();
        for line in lines {
            let record: StoreRecord = serde_json::from_str(line)?;
            let identity = ExecutableIdentity::from_resolved(&record.identity)?;
            if identity.as_str() != record.identity {
                return Err(Error::Config(format!(
                    "approval identity {} is not normalized",
                    record.identity
                )));
            }
            store.record_approval(&identity, record.scope, record.origin, record.created_at)?;
        }
        Ok(store)
    }

    /// Loads a store file; a missing file is an empty store.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }
}

/// Ordered so that the meet of a chain is `min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Deny,
    RequireApproval,
    Allow,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Deny => "deny",
            Verdict::RequireApproval => "require_approval",
            Verdict::Allow => "allow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    AnalysisFailure,
    NotAllowlisted,
    DeniedFlag,
    BlockedMultiplexer,
    ExpansionPresent,
    Approved,
    Allowlisted,
}

impl Reason {
    pub const ALL: [Reason; 7] = [
        Reason::AnalysisFailure,
        Reason::NotAllowlisted,
        Reason::DeniedFlag,
        Reason::BlockedMultiplexer,
        Reason::ExpansionPresent,
        Reason::Approved,
        Reason::Allowlisted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::AnalysisFailure => "analysis_failure",
            Reason::NotAllowlisted => "not_allowlisted",
            Reason::DeniedFlag => "denied_flag",
            Reason::BlockedMultiplexer => "blocked_multiplexer",
            Reason::ExpansionPresent => "expansion_present",
            Reason::Approved => "approved",
            Reason::Allowlisted => "allowlisted",
        }
    }
}

/// Verdict for one simple command of the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandDecision {
    pub argv: Vec<String>,
    pub wrapper_chain: Vec<String>,
    pub identity: Option<ExecutableIdentity>,
    pub verdict: Verdict,
    pub reason: Reason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecDecision {
    pub verdict: Verdict,
    pub reason: Reason,
    pub taxonomy: Label,
    pub commands: Vec<CommandDecision>,
}

impl ExecDecision {
    fn from_commands(commands: Vec<CommandDecision>) -> Self {
        let worst = commands
            .iter()
            .min_by_key(|c| c.verdict)
            .expect("a decision covers at least one command");
        let (verdict, reason) = if worst.verdict == Verdict::Allow {
            let all_allowlisted = commands.iter().all(|c| c.reason == Reason::Allowlisted);
            let reason = if all_allowlisted {
                Reason::Allowlisted
            } else {
                Reason::Approved
            };
            (Verdict::Allow, reason)
        } else {
            (worst.verdict, worst.reason)
        };
        ExecDecision {
            verdict,
            reason,
            taxonomy: label_decision(&AuditReason::Exec(reason)),
            commands,
        }
    }

    /// Identities an operator could approve to move this chain forward.
    pub fn approvable_identities(&self) -> Vec<&ExecutableIdentity> {
        self.commands
            .iter()
            .filter(|c| c.verdict == Verdict::RequireApproval && c.reason == Reason::NotAllowlisted)
            .filter_map(|c| c.identity.as_ref())
            .collect()
    }

    /// First non-allow detail, or the first command's detail.
    pub fn detail(&self) -> String {
        self.commands
            .iter()
            .find(|c| c.verdict == self.verdict && c.reason == self.reason)
            .or(self.commands.first())
            .map(|c| c.detail.clone())
            .unwrap_or_default()
    }
}

/// Shell-string entry point.
pub fn evaluate_shell_allowlist(
    raw: &RawCommand,
    policy: &PolicyDocument,
    store: &ApprovalStore,
    resolver: &dyn PathResolver,
) -> ExecDecision {
    let evaluator = Evaluator {
        policy,
        store,
        resolver,
        reanalyze_shells: policy.shell_reanalysis,
    };
    ExecDecision::from_commands(evaluator.shell_text(raw, 0, &[]))
}

/// Direct-argv entry point: the argv is executed without a shell, so no
/// shell analysis happens and `sh -c` payloads are treated as opaque
/// arguments to an ordinary executable.
pub fn evaluate_argv(
    argv: &[String],
    policy: &PolicyDocument,
    store: &ApprovalStore,
    resolver: &dyn PathResolver,
) -> Result<ExecDecision> {
    let command = SimpleCommand::from_argv(argv.iter().cloned())?;
    let evaluator = Evaluator {
        policy,
        store,
        resolver,
        reanalyze_shells: false,
    };
    Ok(ExecDecision::from_commands(evaluator.command(&command, 0, &[])))
}

struct Evaluator<'a> {
    policy: &'a PolicyDocument,
    store: &'a ApprovalStore,
    resolver: &'a dyn PathResolver,
    reanalyze_shells: bool,
}

fn decision(
    cmd: &SimpleCommand,
    wrapper_chain: &[String],
    identity: Option<ExecutableIdentity>,
    verdict: Verdict,
    reason: Reason,
    detail: impl Into<String>,
) -> CommandDecision {
    CommandDecision {
        argv: cmd.argv.clone(),
        wrapper_chain: wrapper_chain.to_vec(),
        identity,
        verdict,
        reason,
        detail: detail.into(),
    }
}

enum ShellForm<'c> {
    /// `sh -c PAYLOAD [...]`
    Payload(&'c str),
    /// Some other option before the payload.
    UnsupportedOptions,
    /// Script file or interactive shell.
    Plain,
}

fn shell_form(cmd: &SimpleCommand) -> Option<ShellForm<'_>> {
    if !SHELL_INTERPRETERS.contains(&basename(cmd.program())) {
        return None;
    }
    let args = cmd.args();
    Some(match args.first().map(String::as_str) {
        Some("-c") => match args.get(1) {
            Some(payload) => ShellForm::Payload(payload),
            None => ShellForm::UnsupportedOptions,
        },
        Some(flag) if flag.starts_with('-') || flag.starts_with('+') => ShellForm::UnsupportedOptions,
        _ => ShellForm::Plain,
    })
}

impl Evaluator<'_> {
    fn shell_text(&self, raw: &RawCommand, depth: usize, outer: &[String]) -> Vec<CommandDecision> {
        match analyze(raw, &self.policy.analysis) {
            CommandAnalysis::Failure(failure) => vec![CommandDecision {
                argv: Vec::new(),
                wrapper_chain: outer.to_vec(),
                identity: None,
                verdict: Verdict::RequireApproval,
                reason: Reason::AnalysisFailure,
                detail: format!("{} at byte {}", failure.reason, failure.offset),
            }],
            CommandAnalysis::Chain { commands, .. } => commands
                .iter()
                .flat_map(|cmd| self.command(cmd, depth, outer))
                .collect(),
        }
    }

    fn command(&self, cmd: &SimpleCommand, depth: usize, outer: &[String]) -> Vec<CommandDecision> {
        let (command, mut chain) = match resolve_invocation(cmd, &self.policy.shell_applets) {
            Invocation::Blocked { reason } => {
                return vec![decision(cmd, outer, None, Verdict::Deny, Reason::BlockedMultiplexer, reason)]
            }
            Invocation::Resolved {
                command,
                wrapper_chain,
            } => (command, wrapper_chain),
        };
        chain.splice(0..0, outer.iter().cloned());
        let via_multiplexer = chain.iter().any(|w| is_multiplexer(w));

        if let Some((name, _)) = command
            .env_assignments
            .iter()
            .find(|(name, _)| self.policy.analysis.dangerous_env_vars.contains(name))
        {
            return vec![decision(
                &command,
                &chain,
                None,
                Verdict::RequireApproval,
                Reason::AnalysisFailure,
                format!("dangerous_env_assignment {name} via wrapper"),
            )];
        }

        match shell_form(&command) {
            Some(ShellForm::Payload(payload)) if self.reanalyze_shells => {
                if depth + 1 > MAX_UNWRAP_DEPTH {
                    return vec![decision(
                        &command,
                        &chain,
                        None,
                        Verdict::Deny,
                        Reason::BlockedMultiplexer,
                        format!("more than {MAX_UNWRAP_DEPTH} nested shell levels"),
                    )];
                }
                let mut inner_chain = chain.clone();
                inner_chain.push(basename(command.program()).to_string());
                return match RawCommand::new(payload) {
                    Ok(raw) => self.shell_text(&raw, depth + 1, &inner_chain),
                    Err(_) => vec![decision(
                        &command,
                        &chain,
                        None,
                        Verdict::RequireApproval,
                        Reason::AnalysisFailure,
                        "empty shell payload",
                    )],
                };
            }
            Some(ShellForm::UnsupportedOptions) if self.reanalyze_shells => {
                return vec![decision(
                    &command,
                    &chain,
                    None,
                    Verdict::RequireApproval,
                    Reason::AnalysisFailure,
                    "shell options other than a leading -c",
                )];
            }
            Some(_) if via_multiplexer => {
                return vec![decision(
                    &command,
                    &chain,
                    None,
                    Verdict::Deny,
                    Reason::BlockedMultiplexer,
                    "multiplexer shell applet without payload re-analysis",
                )];
            }
            _ => {}
        }

        if command.has_parameter_expansion {
            return vec![decision(
                &command,
                &chain,
                None,
                Verdict::RequireApproval,
                Reason::ExpansionPresent,
                "parameter expansion value is not known lexically",
            )];
        }

        let Some(identity) = ExecutableIdentity::resolve(command.program(), self.resolver) else {
            return vec![decision(
                &command,
                &chain,
                None,
                Verdict::RequireApproval,
                Reason::NotAllowlisted,
                format!("cannot resolve {}", command.program()),
            )];
        };
        vec![self.match_identity(&command, chain, identity)]
    }

    fn match_identity(
        &self,
        command: &SimpleCommand,
        chain: Vec<String>,
        identity: ExecutableIdentity,
    ) -> CommandDecision {
        let matched: Vec<_> = self
            .policy
            .allowlist
            .iter()
            .filter(|entry| entry.matches(&identity))
            .collect();

        if !matched.is_empty() {
            let mut checked = command.clone();
            checked.argv[0] = identity.as_str().to_string();
            let mut outcome = (Verdict::Allow, Reason::Allowlisted, format!("{identity} allowlisted"));
            for name in matched.iter().filter_map(|e| e.safe_bin_profile.as_deref()) {
                let step = if command.has_unquoted_glob {
                    (
                        Verdict::RequireApproval,
                        Reason::ExpansionPresent,
                        "unquoted glob can expand to option-like file names".to_string(),
                    )
                } else {
                    match self.policy.safe_bin_profiles.get(name).map(|p| evaluate_safe_bin(&checked, p)) {
                        Some(Ok(FlagDecision::Permitted)) => continue,
                        Some(Ok(FlagDecision::Denied)) => (
                            Verdict::Deny,
                            Reason::DeniedFlag,
                            format!("denied flag for {name}"),
                        ),
                        Some(Ok(FlagDecision::AnalysisFailure)) => (
                            Verdict::RequireApproval,
                            Reason::AnalysisFailure,
                            format!("flag outside the {name} profile"),
                        ),
                        Some(Err(e)) => (Verdict::RequireApproval, Reason::AnalysisFailure, e.to_string()),
                        None => (
                            Verdict::RequireApproval,
                            Reason::AnalysisFailure,
                            format!("unknown safe-bin profile {name}"),
                        ),
                    }
                };
                if step.0 < outcome.0 {
                    outcome = step;
                }
            }
            let (verdict, reason, detail) = outcome;
            return decision(command, &chain, Some(identity), verdict, reason, detail);
        }

        match self.store.lookup(&identity) {
            Some(_) => {
                let detail = format!("{identity} approved");
                decision(command, &chain, Some(identity), Verdict::Allow, Reason::Approved, detail)
            }
            None => {
                let detail = format!("{identity} is not allowlisted");
                decision(
                    command,
                    &chain,
                    Some(identity),
                    Verdict::RequireApproval,
                    Reason::NotAllowlisted,
                    detail,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolver() -> StaticResolver {
        StaticResolver::new(
            ["/usr/local/bin", "/usr/bin", "/bin"],
            [
                "/usr/bin/sort",
                "/usr/bin/grep",
                "/bin/ls",
                "/usr/bin/whoami",
                "/bin/busybox",
                "/bin/sh",
                "/bin/rm",
                "/usr/bin/env",
                "/usr/bin/wc",
            ],
        )
    }

    fn policy(json: &str) -> PolicyDocument {
        PolicyDocument::from_json(json).unwrap()
    }

    fn sort_policy() -> PolicyDocument {
        policy(
            r#"{"version":1,"allowlist":[{"pattern":"sort","safe_bin_profile":"sort"},{"pattern":"ls"}]}"#,
        )
    }

    fn eval(text: &str, policy: &PolicyDocument, store: &ApprovalStore) -> ExecDecision {
        evaluate_shell_allowlist(&RawCommand::new(text).unwrap(), policy, store, &resolver())
    }

    fn identity(path: &str) -> ExecutableIdentity {
        ExecutableIdentity::resolve(path, &resolver()).unwrap()
    }

    #[test]
    fn allowlisted_safe_bin() {
        let d = eval("sort -u f.txt", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Allow, Reason::Allowlisted));
    }

    #[test]
    fn line_continuation_requires_approval() {
        let d = eval("echo \"ok $\\\n(id -u)\"", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::AnalysisFailure));
    }

    #[test]
    fn abbreviated_denied_flag_denies() {
        let d = eval("sort --compress-prog=sh f", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::DeniedFlag));
        let d = eval("sort --frobnicate f", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::AnalysisFailure));
    }

    #[test]
    fn chain_conjunction() {
        let d = eval("ls && unknowncmd", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::NotAllowlisted));
        let d = eval("ls && whoami", &sort_policy(), &ApprovalStore::default());
        assert_eq!(d.verdict, Verdict::RequireApproval);
        assert_eq!(d.approvable_identities(), vec![&identity("whoami")]);
        let d = eval("whoami; sort --output=x f", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::DeniedFlag));
    }

    #[test]
    fn busybox_non_shell_applet_denied() {
        let p = policy(r#"{"version":1,"allowlist":[{"pattern":"busybox"}]}"#);
        let d = eval("busybox ls", &p, &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::BlockedMultiplexer));
    }

    #[test]
    fn busybox_shell_payload_reanalyzed() {
        let p = policy(r#"{"version":1,"allowlist":[{"pattern":"busybox"},{"pattern":"whoami"}]}"#);
        let d = eval("busybox sh -c 'rm -rf /'", &p, &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::NotAllowlisted));
        assert_eq!(d.commands[0].argv, vec!["rm", "-rf", "/"]);
        assert_eq!(d.commands[0].wrapper_chain, vec!["busybox", "sh"]);
        // The inner command stands on its own merits.
        let d = eval("busybox sh -c 'whoami'", &p, &ApprovalStore::default());
        assert_eq!(d.verdict, Verdict::Allow);
        let d = eval("busybox sh -c 'echo \"$(id)\"'", &p, &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::AnalysisFailure));
    }

    #[test]
    fn busybox_shell_without_reanalysis_denied() {
        let p = policy(
            r#"{"version":1,"shell_reanalysis":false,"allowlist":[{"pattern":"busybox"},{"pattern":"sh"}]}"#,
        );
        let d = eval("busybox sh -c 'rm -rf /'", &p, &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::BlockedMultiplexer));
    }

    #[test]
    fn nested_shells_hit_depth_limit() {
        let mut text = "whoami".to_string();
        for _ in 0..10 {
            text = format!("sh -c {}", shell_quote(&text));
        }
        let p = policy(r#"{"version":1,"allowlist":[{"pattern":"whoami"}]}"#);
        let d = eval(&text, &p, &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::BlockedMultiplexer));
    }

    fn shell_quote(s: &str) -> String {
        format!("'{}'", s.replace('\'', r"'\''"))
    }

    #[test]
    fn expansion_requires_approval() {
        let d = eval("ls \"$HOME\"", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::ExpansionPresent));
        let d = eval("sort *.txt", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::ExpansionPresent));
        // Globs are harmless for entries without a flag profile.
        let d = eval("ls *.txt", &sort_policy(), &ApprovalStore::default());
        assert_eq!(d.verdict, Verdict::Allow);
    }

    #[test]
    fn env_wrapper_dangerous_assignment() {
        let d = eval("env LD_PRELOAD=/tmp/x.so ls", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::AnalysisFailure));
        let d = eval("env LANG=C nice -n 5 sort f", &sort_policy(), &ApprovalStore::default());
        assert_eq!(d.verdict, Verdict::Allow);
        assert_eq!(d.commands[0].wrapper_chain, vec!["env", "nice"]);
    }

    #[test]
    fn unresolvable_requires_approval() {
        let d = eval("./script.sh", &sort_policy(), &ApprovalStore::default());
        assert_eq!((d.verdict, d.reason), (Verdict::RequireApproval, Reason::NotAllowlisted));
        assert!(d.approvable_identities().is_empty());
    }

    #[test]
    fn absolute_patterns_match_exactly() {
        let p = policy(r#"{"version":1,"allowlist":[{"pattern":"/usr/bin/whoami"}]}"#);
        assert_eq!(eval("whoami", &p, &ApprovalStore::default()).verdict, Verdict::Allow);
        assert_eq!(eval("/usr/bin/whoami", &p, &ApprovalStore::default()).verdict, Verdict::Allow);
        assert_eq!(eval("ls", &p, &ApprovalStore::default()).verdict, Verdict::RequireApproval);
    }

    #[test]
    fn approval_round_trip() {
        let p = sort_policy();
        let mut store = ApprovalStore::default();
        store
            .record_approval(&identity("whoami"), Scope::AllowAlways, Origin::ApprovalFlow, 1_700_000_000)
            .unwrap();
        let d = eval("whoami", &p, &store);
        assert_eq!((d.verdict, d.reason), (Verdict::Allow, Reason::Approved));
        let d = eval("ls; whoami", &p, &store);
        assert_eq!((d.verdict, d.reason), (Verdict::Allow, Reason::Approved));
    }

    #[test]
    fn multiplexer_approvals_rejected() {
        let mut store = ApprovalStore::default();
        let err = store
            .record_approval(&identity("busybox"), Scope::AllowAlways, Origin::Operator, 0)
            .unwrap_err();
        assert!(matches!(err, Error::PolicyViolation(_)));
        assert!(store.is_empty());
        store
            .record_approval(&identity("/usr/bin/sort"), Scope::AllowAlways, Origin::Operator, 0)
            .unwrap();
        assert!(store.contains(&identity("sort")));
    }

    #[test]
    fn store_approval_cannot_override_denied_flag() {
        let mut store = ApprovalStore::default();
        store
            .record_approval(&identity("sort"), Scope::AllowAlways, Origin::Operator, 0)
            .unwrap();
        let d = eval("sort --compress-program=sh f", &sort_policy(), &store);
        assert_eq!(d.verdict, Verdict::Deny);
    }

    #[test]
    fn store_serialization() {
        let mut store = ApprovalStore::default();
        store.record_approval(&identity("whoami"), Scope::Session, Origin::Operator, 5).unwrap();
        store.record_approval(&identity("ls"), Scope::AllowAlways, Origin::ApprovalFlow, 7).unwrap();
        let text = store.to_jsonl();
        assert_eq!(
            text,
            "{\"format\":\"approval-store\",\"version\":1}\n\
             {\"identity\":\"/bin/ls\",\"scope\":\"allow_always\",\"created_at\":7,\"origin\":\"approval_flow\"}\n\
             {\"identity\":\"/usr/bin/whoami\",\"scope\":\"session\",\"created_at\":5,\"origin\":\"operator\"}\n"
        );
        assert_eq!(ApprovalStore::from_jsonl(&text).unwrap(), store);
        store.end_session();
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn store_rejects_bad_records() {
        let header = "{\"format\":\"approval-store\",\"version\":1}\n";
        for record in [
            "{\"identity\":\"/bin/busybox\",\"scope\":\"session\",\"created_at\":1,\"origin\":\"operator\"}",
            "{\"identity\":\"busybox\",\"scope\":\"session\",\"created_at\":1,\"origin\":\"operator\"}",
            "{\"identity\":\"/bin/../bin/ls\",\"scope\":\"session\",\"created_at\":1,\"origin\":\"operator\"}",
            "{\"identity\":\"/bin/ls\",\"scope\":\"forever\",\"created_at\":1,\"origin\":\"operator\"}",
            "{\"identity\":\"/bin/ls\",\"scope\":\"session\",\"created_at\":1,\"origin\":\"operator\",\"x\":1}",
        ] {
            assert!(ApprovalStore::from_jsonl(&format!("{header}{record}\n")).is_err(), "{record}");
        }
        assert!(ApprovalStore::from_jsonl("{\"format\":\"approval-store\",\"version\":2}\n").is_err());
        assert!(ApprovalStore::from_jsonl("").unwrap().is_empty());
    }

    #[test]
    fn argv_mode_skips_shell_analysis() {
        let p = sort_policy();
        let argv: Vec<String> = ["sort", "-u", "f"].iter().map(|s| s.to_string()).collect();
        let d = evaluate_argv(&argv, &p, &ApprovalStore::default(), &resolver()).unwrap();
        assert_eq!(d.verdict, Verdict::Allow);
        // Shell metacharacters are plain bytes in argv mode.
        let argv: Vec<String> = ["ls", "$(id)", "a\\\nb"].iter().map(|s| s.to_string()).collect();
        let d = evaluate_argv(&argv, &p, &ApprovalStore::default(), &resolver()).unwrap();
        assert_eq!(d.verdict, Verdict::Allow);
        let argv: Vec<String> = ["sh", "-c", "$(id)"].iter().map(|s| s.to_string()).collect();
        let d = evaluate_argv(&argv, &p, &ApprovalStore::default(), &resolver()).unwrap();
        assert_ne!(d.reason, Reason::AnalysisFailure);
        assert!(evaluate_argv(&[], &p, &ApprovalStore::default(), &resolver()).is_err());
    }

    #[test]
    fn search_path_resolver_uses_explicit_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let tool = dir.path().join("mytool");
        fs::write(&tool, "#!/bin/sh\n").unwrap();
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(&tool, fs::Permissions::from_mode(0o755)).unwrap();
        }
        let r = SearchPathResolver::new([dir.path()]);
        assert_eq!(r.resolve("mytool").as_deref(), tool.to_str());
        assert_eq!(r.resolve("missing"), None);
        assert_eq!(SearchPathResolver::new(Vec::<PathBuf>::new()).resolve("mytool"), None);
    }
}
