//! Audit command-line frontend.
//!
//! Every check prints a versioned JSON [`AuditReport`] on stdout;
//! diagnostics go to stderr. Exit codes are frozen:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | allow / pass                              |
//! | 1    | deny / violation / rejected               |
//! | 2    | approval required (`check-exec` only)    |
//! | 3    | configuration, usage, or input error      |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec::{
    evaluate_argv, evaluate_shell_allowlist, ApprovalStore, ExecDecision, ExecutableIdentity, Origin,
    PathResolver, Scope, SearchPathResolver, StaticResolver, Verdict,
};
use crate::gateway::{gate_node_invoke_method, validate_gateway_url_override, MethodDecision, UrlDecision};
use crate::identity::{
    repair_allow_from_handles, resolve_allowlist_identity, LookupError, MatchSource, RepairOutcome,
    SenderContext,
};
use crate::policy::PolicyDocument;
use crate::provenance::{normalize_input_provenance, sanitize_session_history, InputProvenanceKind, SessionMessage};
use crate::sandbox::{realpath_probe, validate_sandbox_config_with_probe, FsProbe, SandboxConfig};
use crate::shell::RawCommand;
use crate::skill::{build_manifest, scan_indicators, verify_manifest, ManifestDecision, SkillManifest};
use crate::taxonomy::{label_decision, AuditReason, Stage, Surface};
use crate::webhook::{verify_webhook, WebhookDecision, WebhookVerificationRequest};

pub const REPORT_FORMAT: &str = "audit-report";
pub const REPORT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DENY: i32 = 1;
pub const EXIT_APPROVAL: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

const DEFAULT_SEARCH_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Debug, Parser)]
#[command(name = "agentguard", version, about = "Policy checks for agent execution runtimes")]
pub struct Cli {
    /// Policy document (JSON). Built-in defaults apply when omitted.
    #[arg(long, global = true)]
    policy: Option<PathBuf>,

    /// Current time in epoch seconds. Defaults to the system clock.
    #[arg(long, global = true)]
    now: Option<i64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a shell command string, or an argv with --argv.
    CheckExec(CheckExecArgs),
    /// Record an operator approval for a resolved executable.
    Approve(ApproveArgs),
    /// Validate a sandbox configuration file.
    CheckSandbox {
        config: PathBuf,
        /// Also check bind sources after resolving symlinks on this host.
        #[arg(long)]
        resolve_symlinks: bool,
    },
    /// Validate a gateway URL override.
    CheckUrl { url: String },
    /// Gate a node.invoke method name.
    CheckMethod { method: String },
    /// Check a sender against an allowFrom list.
    CheckIdentity(CheckIdentityArgs),
    /// Rewrite @handle allowFrom entries to immutable ids.
    RepairConfig(RepairConfigArgs),
    /// Verify an HMAC-SHA256 webhook signature.
    VerifyWebhook(VerifyWebhookArgs),
    /// Scan a skill directory for dropper indicators.
    ScanSkill {
        dir: PathBuf,
        /// Also verify the directory against this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        entropy_threshold: Option<f64>,
    },
    /// Print (or write) the content manifest of a skill directory.
    BuildManifest {
        dir: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Annotate inter-session turns of a session history file.
    SanitizeHistory {
        history: PathBuf,
        /// Write the sanitized history here.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CheckExecArgs {
    /// Treat the operands as an argv executed without a shell.
    #[arg(long)]
    argv: bool,
    /// Approval store (JSONL). A missing file is an empty store.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Colon-separated directories searched for bare program names.
    #[arg(long, default_value = DEFAULT_SEARCH_PATH)]
    search_path: String,
    /// Treat these absolute paths as the only existing executables instead
    /// of consulting the filesystem.
    #[arg(long = "executable")]
    executables: Vec<String>,
    #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
    command: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Session,
    AllowAlways,
}

#[derive(Debug, Args)]
struct ApproveArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_enum, default_value = "allow-always")]
    scope: ScopeArg,
    /// Absolute path of the executable.
    identity: String,
}

#[derive(Debug, Args)]
struct CheckIdentityArgs {
    #[arg(long)]
    sender_id: String,
    /// Logged only; never used for matching.
    #[arg(long)]
    raw_handle: Option<String>,
    /// Allowlist entry; repeatable.
    #[arg(long = "allow-from")]
    allow_from: Vec<String>,
    /// JSON config with an `allowFrom` array (strings or numbers).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RepairConfigArgs {
    /// Lines of `<handle> <id>`; `#` starts a comment.
    #[arg(long)]
    resolver_table: PathBuf,
    /// Where to write the repaired config. Defaults to `<config>.repaired`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    config: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyWebhookArgs {
    #[arg(long)]
    body: PathBuf,
    #[arg(long)]
    signature: String,
    /// File holding the shared secret; trailing newlines are stripped.
    #[arg(long)]
    secret_file: PathBuf,
    #[arg(long)]
    timestamp: Option<String>,
    #[arg(long, default_value_t = 300)]
    tolerance: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub verdict: String,
    pub reason: String,
    pub surface: Surface,
    pub stage: Stage,
    pub detail: String,
}

impl CheckRecord {
    pub fn new(check: impl Into<String>, verdict: impl Into<String>, reason: AuditReason, detail: impl Into<String>) -> Self {
        let label = label_decision(&reason);
        Self {
            check: check.into(),
            verdict: verdict.into(),
            reason: reason.code().to_string(),
            surface: label.surface,
            stage: label.stage,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub format: &'static str,
    pub version: u32,
    pub tool_version: &'static str,
    pub checks: Vec<CheckRecord>,
}

impl AuditReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        Self {
            format: REPORT_FORMAT,
            version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn exec_exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Allow => EXIT_OK,
        Verdict::Deny => EXIT_DENY,
        Verdict::RequireApproval => EXIT_APPROVAL,
    }
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_ERROR
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn now_or_clock(now: Option<i64>) -> i64 {
    now.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(stdout: &mut dyn Write, report: &AuditReport) -> Result<()> {
    stdout
        .write_all(report.to_json().as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let policy = match &cli.policy {
        Some(path) => PolicyDocument::load(path)?,
        None => PolicyDocument::default(),
    };
    let now = cli.now;
    match cli.command {
        Command::CheckExec(args) => check_exec(args, &policy, stdout),
        Command::Approve(args) => approve(args, now_or_clock(now), stdout, stderr),
        Command::CheckSandbox { config, resolve_symlinks } => {
            check_sandbox(&config, resolve_symlinks, &policy, stdout)
        }
        Command::CheckUrl { url } => check_url(&url, &policy, stdout),
        Command::CheckMethod { method } => check_method(&method, &policy, stdout),
        Command::CheckIdentity(args) => check_identity(args, stdout),
        Command::RepairConfig(args) => repair_config(args, stdout, stderr),
        Command::VerifyWebhook(args) => check_webhook(args, now_or_clock(now), stdout),
        Command::ScanSkill { dir, manifest, entropy_threshold } => scan_skill(
            &dir,
            manifest.as_deref(),
            entropy_threshold.unwrap_or(policy.entropy_threshold),
            stdout,
        ),
        Command::BuildManifest { dir, output } => {
            let manifest = build_manifest(&dir)?;
            match output {
                Some(path) => manifest.save(&path)?,
                None => stdout
                    .write_all(manifest.to_text().as_bytes())
                    .map_err(|e| Error::io("<stdout>", e))?,
            }
            Ok(EXIT_OK)
        }
        Command::SanitizeHistory { history, output } => sanitize_history(&history, output.as_deref(), stdout),
    }
}

fn exec_report(decision: &ExecDecision) -> AuditReport {
    let mut checks = vec![CheckRecord::new(
        "exec",
        decision.verdict.as_str(),
        AuditReason::Exec(decision.reason),
        decision.detail(),
    )];
    for c in &decision.commands {
        let mut detail = format!("argv={:?}", c.argv);
        if !c.wrapper_chain.is_empty() {
            detail.push_str(&format!(" via={:?}", c.wrapper_chain));
        }
        if let Some(id) = &c.identity {
            detail.push_str(&format!(" identity={id}"));
        }
        if !c.detail.is_empty() {
            detail.push_str(": ");
            detail.push_str(&c.detail);
        }
        checks.push(CheckRecord::new("exec.command", c.verdict.as_str(), AuditReason::Exec(c.reason), detail));
    }
    AuditReport::new(checks)
}

fn check_exec(args: CheckExecArgs, policy: &PolicyDocument, stdout: &mut dyn Write) -> Result<i32> {
    let store = match &args.store {
        Some(path) => ApprovalStore::load(path)?,
        None => ApprovalStore::default(),
    };
    let dirs: Vec<String> = args
        .search_path
        .split(':')
        .filter(|d| !d.is_empty())
        .map(str::to_string)
        .collect();
    let resolver: Box<dyn PathResolver> = if args.executables.is_empty() {
        Box::new(SearchPathResolver::new(dirs))
    } else {
        Box::new(StaticResolver::new(dirs, args.executables))
    };
    let decision = if args.argv {
        evaluate_argv(&args.command, policy, &store, resolver.as_ref())?
    } else {
        if args.command.len() != 1 {
            return Err(Error::Usage(
                "shell mode takes the command as one argument; use --argv for an argument vector".into(),
            ));
        }
        let raw = RawCommand::new(args.command[0].clone())?;
        evaluate_shell_allowlist(&raw, policy, &store, resolver.as_ref())
    };
    emit(stdout, &exec_report(&decision))?;
    Ok(exec_exit_code(decision.verdict))
}

fn approve(args: ApproveArgs, now: i64, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let identity = ExecutableIdentity::from_path(&args.identity)?;
    let mut store = ApprovalStore::load(&args.store)?;
    let scope = match args.scope {
        ScopeArg::Session => Scope::Session,
        ScopeArg::AllowAlways => Scope::AllowAlways,
    };
    let now = u64::try_from(now).map_err(|_| Error::Usage("--now must not be negative".into()))?;
    match store.record_approval(&identity, scope, Origin::Operator, now) {
        Ok(()) => {
            store.save(&args.store)?;
            let _ = writeln!(stdout, "approved {identity}");
            Ok(EXIT_OK)
        }
        Err(Error::PolicyViolation(msg)) => {
            let _ = writeln!(stderr, "refused: {msg}");
            Ok(EXIT_DENY)
        }
        Err(e) => Err(e),
    }
}

fn check_sandbox(config: &Path, resolve_symlinks: bool, policy: &PolicyDocument, stdout: &mut dyn Write) -> Result<i32> {
    let cfg: SandboxConfig =
        serde_json::from_str(&read_text(config)?).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let probe: FsProbe<'_> = &realpath_probe;
    let result = validate_sandbox_config_with_probe(&cfg, policy, resolve_symlinks.then_some(probe));
    let mut checks: Vec<CheckRecord> = result
        .violations
        .iter()
        .map(|v| {
            CheckRecord::new(
                format!("sandbox.{}", v.field),
                "fail",
                AuditReason::Sandbox(v.kind),
                format!("{}: {}", v.value, v.reason),
            )
        })
        .collect();
    checks.extend(
        result
            .warnings
            .iter()
            .map(|w| CheckRecord::new("sandbox.network", "warn", AuditReason::SandboxOk, w.clone())),
    );
    if result.ok {
        checks.insert(0, CheckRecord::new("sandbox", "pass", AuditReason::SandboxOk, ""));
    }
    emit(stdout, &AuditReport::new(checks))?;
    Ok(if result.ok { EXIT_OK } else { EXIT_DENY })
}

fn check_url(url: &str, policy: &PolicyDocument, stdout: &mut dyn Write) -> Result<i32> {
    let (record, code) = match validate_gateway_url_override(url, &policy.gateway) {
        UrlDecision::NoOverride => (
            CheckRecord::new("gateway.url", "allow", AuditReason::GatewayUrlAllowed, "no override; configured endpoint kept"),
            EXIT_OK,
        ),
        UrlDecision::Allowed { endpoint } => (
            CheckRecord::new("gateway.url", "allow", AuditReason::GatewayUrlAllowed, endpoint.to_string()),
            EXIT_OK,
        ),
        UrlDecision::Rejected { reason, detail } => (
            CheckRecord::new("gateway.url", "deny", AuditReason::GatewayUrl(reason), detail),
            EXIT_DENY,
        ),
    };
    emit(stdout, &AuditReport::new(vec![record]))?;
    Ok(code)
}

fn check_method(method: &str, policy: &PolicyDocument, stdout: &mut dyn Write) -> Result<i32> {
    let (record, code) = match gate_node_invoke_method(method, &policy.node_commands) {
        MethodDecision::Dispatchable => (
            CheckRecord::new("gateway.method", "allow", AuditReason::GatewayMethodDispatchable, method),
            EXIT_OK,
        ),
        MethodDecision::Denied { reason } => (
            CheckRecord::new("gateway.method", "deny", AuditReason::GatewayMethod(reason), method),
            EXIT_DENY,
        ),
    };
    emit(stdout, &AuditReport::new(vec![record]))?;
    Ok(code)
}

/// Reads `allowFrom` from an identity config. Numbers become their decimal
/// string form.
fn allow_from_entries(doc: &Value, source: &Path) -> Result<Vec<String>> {
    let bad = |what: &str| Error::Config(format!("{}: {what}", source.display()));
    let list = doc
        .get("allowFrom")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("expected an `allowFrom` array"))?;
    list.iter()
        .map(|v| match v {
            Value::String(s) => Ok(s.trim().to_string()),
            Value::Number(n) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
            _ => Err(bad("allowFrom entries must be strings or integers")),
        })
        .collect()
}

fn check_identity(args: CheckIdentityArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut allow_from: Vec<String> = args.allow_from.iter().map(|e| e.trim().to_string()).collect();
    if let Some(path) = &args.config {
        let doc: Value = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        allow_from.extend(allow_from_entries(&doc, path)?);
    }
    let sender = SenderContext::new(args.sender_id.trim(), args.raw_handle)
        .ok_or_else(|| Error::Usage("--sender-id must not be empty".into()))?;
    let m = resolve_allowlist_identity(&allow_from, &sender);
    let (reason, verdict) = match m.match_source {
        Some(MatchSource::Id) => (AuditReason::SenderIdMatch, "allow"),
        Some(MatchSource::Wildcard) => (AuditReason::SenderWildcardMatch, "allow"),
        None => (AuditReason::SenderNotAllowed, "deny"),
    };
    let detail = match &m.match_key {
        Some(key) => format!("sender {} matched {key:?}", sender.sender_id()),
        None => format!("sender {} not in allowFrom", sender.sender_id()),
    };
    emit(stdout, &AuditReport::new(vec![CheckRecord::new("identity", verdict, reason, detail)]))?;
    Ok(if m.allowed { EXIT_OK } else { EXIT_DENY })
}

fn parse_resolver_table(text: &str) -> Result<Vec<(String, String)>> {
    let mut table = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(handle), Some(id), None) => table.push((handle.to_string(), id.to_string())),
            _ => {
                return Err(Error::Config(format!(
                    "resolver table line {}: expected `<handle> <id>`",
                    n + 1
                )))
            }
        }
    }
    Ok(table)
}

fn repair_config(args: RepairConfigArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let table = parse_resolver_table(&read_text(&args.resolver_table)?)?;
    let lookup = |handle: &str| -> std::result::Result<String, LookupError> {
        table
            .iter()
            .find(|(h, _)| h == handle)
            .map(|(_, id)| id.clone())
            .ok_or(LookupError::NotFound)
    };
    let mut doc: Value = serde_json::from_str(&read_text(&args.config)?)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let entries = allow_from_entries(&doc, &args.config)?;
    let (repaired, report) = repair_allow_from_handles(&entries, &lookup);
    doc["allowFrom"] = Value::from(repaired);

    let output = args.output.unwrap_or_else(|| {
        let mut name = args.config.clone().into_os_string();
        name.push(".repaired");
        PathBuf::from(name)
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&output, text).map_err(|e| Error::io(&output, e))?;
    let _ = writeln!(stderr, "wrote {}", output.display());

    let mut unresolved = false;
    let checks = report
        .into_iter()
        .map(|r| match r.outcome {
            RepairOutcome::Passthrough => {
                CheckRecord::new("identity.repair", "pass", AuditReason::HandlePassthrough, r.entry)
            }
            RepairOutcome::Rewritten { id } => CheckRecord::new(
                "identity.repair",
                "pass",
                AuditReason::HandleRewritten,
                format!("{} -> {id}", r.entry),
            ),
            RepairOutcome::Unresolved { reason } => {
                unresolved = true;
                CheckRecord::new(
                    "identity.repair",
                    "fail",
                    AuditReason::HandleUnresolved,
                    format!("{}: {reason}", r.entry),
                )
            }
        })
        .collect();
    emit(stdout, &AuditReport::new(checks))?;
    Ok(if unresolved { EXIT_DENY } else { EXIT_OK })
}

fn check_webhook(args: VerifyWebhookArgs, now: i64, stdout: &mut dyn Write) -> Result<i32> {
    let body = fs::read(&args.body).map_err(|e| Error::io(&args.body, e))?;
    let mut secret = fs::read(&args.secret_file).map_err(|e| Error::io(&args.secret_file, e))?;
    while matches!(secret.last(), Some(b'\n' | b'\r')) {
        secret.pop();
    }
    let req = WebhookVerificationRequest::new(body, args.signature, secret, args.timestamp, args.tolerance)?;
    let (record, code) = match verify_webhook(&req, now) {
        WebhookDecision::Authentic => (
            CheckRecord::new("webhook", "pass", AuditReason::WebhookAuthentic, "signature verified"),
            EXIT_OK,
        ),
        WebhookDecision::Rejected { reason } => (
            CheckRecord::new("webhook", "fail", AuditReason::Webhook(reason), reason.as_str()),
            EXIT_DENY,
        ),
    };
    emit(stdout, &AuditReport::new(vec![record]))?;
    Ok(code)
}

fn scan_skill(dir: &Path, manifest: Option<&Path>, threshold: f64, stdout: &mut dyn Write) -> Result<i32> {
    if !dir.is_dir() {
        return Err(Error::Usage(format!("{} is not a directory", dir.display())));
    }
    if !(0.0..=8.0).contains(&threshold) {
        return Err(Error::Usage(format!("entropy threshold {threshold} is outside [0, 8]")));
    }
    let report = scan_indicators(dir, threshold);
    let mut checks: Vec<CheckRecord> = report
        .findings
        .iter()
        .map(|f| {
            CheckRecord::new(
                "skill.indicator",
                "fail",
                AuditReason::Skill(f.indicator),
                format!("{}: {}", f.path, f.detail),
            )
        })
        .collect();
    if let Some(path) = manifest {
        let expected = SkillManifest::load(path)?;
        match verify_manifest(dir, &expected)? {
            ManifestDecision::Intact => {
                checks.push(CheckRecord::new("skill.manifest", "pass", AuditReason::ManifestIntact, ""))
            }
            ManifestDecision::Mismatch { differences } => {
                checks.extend(differences.into_iter().map(|(p, why)| {
                    let why = serde_json::to_value(why).ok().and_then(|v| v.as_str().map(str::to_string));
                    CheckRecord::new(
                        "skill.manifest",
                        "fail",
                        AuditReason::ManifestMismatch,
                        format!("{p}: {}", why.unwrap_or_default()),
                    )
                }))
            }
        }
    }
    let failed = checks.iter().any(|c| c.verdict == "fail");
    if !failed {
        checks.insert(0, CheckRecord::new("skill", "pass", AuditReason::SkillClean, ""));
    }
    emit(stdout, &AuditReport::new(checks))?;
    Ok(if failed { EXIT_DENY } else { EXIT_OK })
}

fn sanitize_history(path: &Path, output: Option<&Path>, stdout: &mut dyn Write) -> Result<i32> {
    let raw: Vec<Value> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut checks = Vec::new();
    let mut messages = Vec::with_capacity(raw.len());
    for (i, doc) in raw.iter().enumerate() {
        let message: SessionMessage = serde_json::from_value(doc.clone())
            .map_err(|e| Error::Config(format!("{} message {i}: {e}", path.display())))?;
        match (doc.get("provenance"), &message.provenance) {
            (Some(candidate), None) if !candidate.is_null() => {
                debug_assert!(normalize_input_provenance(candidate).is_none());
                checks.push(CheckRecord::new(
                    "provenance",
                    "warn",
                    AuditReason::ProvenanceRejected,
                    format!("message {i}: provenance {candidate} treated as external input"),
                ));
            }
            (_, Some(p)) if p.kind == InputProvenanceKind::InterSession => checks.push(CheckRecord::new(
                "provenance",
                "annotate",
                AuditReason::InterSessionTurn,
                format!(
                    "message {i}: inter-session from {}",
                    p.source_session_key.as_deref().unwrap_or("unknown session")
                ),
            )),
            _ => {}
        }
        messages.push(message);
    }
    let sanitized = sanitize_session_history(&messages);
    if let Some(out) = output {
        let mut text = serde_json::to_string_pretty(&sanitized)?;
        text.push('\n');
        fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    if checks.is_empty() {
        checks.push(CheckRecord::new("provenance", "pass", AuditReason::ProvenanceAccepted, ""));
    }
    emit(stdout, &AuditReport::new(checks))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["agentguard"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_codes_are_frozen() {
        assert_eq!(exec_exit_code(Verdict::Allow), 0);
        assert_eq!(exec_exit_code(Verdict::Deny), 1);
        assert_eq!(exec_exit_code(Verdict::RequireApproval), 2);
    }

    #[test]
    fn parse_errors_are_exit_3() {
        let (code, _, err) = run_capture(&["check-exec"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(!err.is_empty());
        let (code, _, _) = run_capture(&["no-such-command"]);
        assert_eq!(code, EXIT_ERROR);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("check-exec"));
    }

    #[test]
    fn missing_policy_is_exit_3() {
        let (code, out, err) = run_capture(&["check-url", "--policy", "/nonexistent/policy.json", "ws://127.0.0.1:18789"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(out.is_empty());
        assert!(err.contains("/nonexistent/policy.json"));
    }

    #[test]
    fn resolver_table_parsing() {
        let t = parse_resolver_table("# comment\n@alice 777\n\n@bob 42 # trailing\n").unwrap();
        assert_eq!(t, vec![("@alice".into(), "777".into()), ("@bob".into(), "42".into())]);
        assert!(parse_resolver_table("@alice\n").is_err());
    }

    #[test]
    fn numeric_allow_from_is_coerced() {
        let doc = serde_json::json!({"allowFrom": [123, "@a", " 9 "]});
        assert_eq!(allow_from_entries(&doc, Path::new("x")).unwrap(), vec!["123", "@a", "9"]);
        assert!(allow_from_entries(&serde_json::json!({"allowFrom": [1.5]}), Path::new("x")).is_err());
    }
}
