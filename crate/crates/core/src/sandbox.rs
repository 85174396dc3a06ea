//! Container sandbox configuration validation.
//!
//! Runs before any container arguments are built. A bind source is
//! rejected when it is a blocked host path, lies beneath one, or is an
//! ancestor of one (mounting `/run` exposes `/run/docker.sock`).

use serde::{Deserialize, Serialize};

use crate::paths::{is_same_or_under, normalize};
use crate::policy::PolicyDocument;

/// Host paths no sandbox may mount. Operator policy can extend this list
/// but never shrink it.
pub const BLOCKED_HOST_PATHS: &[&str] = &[
    "/etc",
    "/proc",
    "/sys",
    "/dev",
    "/root",
    "/boot",
    "/var/run/docker.sock",
    "/run/docker.sock",
    // macOS aliases
    "/private/etc",
    "/private/var/run/docker.sock",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxConfig {
    #[serde(default)]
    pub binds: Vec<String>,
    #[serde(default)]
    pub network: Option<String>,
    #[serde(default)]
    pub seccomp_profile: Option<String>,
    #[serde(default)]
    pub apparmor_profile: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    BlockedHostPath,
    AncestorOfBlockedPath,
    MalformedBind,
    RelativeBindSource,
    HostNetwork,
    UnconfinedSeccomp,
    UnconfinedApparmor,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 7] = [
        ViolationKind::BlockedHostPath,
        ViolationKind::AncestorOfBlockedPath,
        ViolationKind::MalformedBind,
        ViolationKind::RelativeBindSource,
        ViolationKind::HostNetwork,
        ViolationKind::UnconfinedSeccomp,
        ViolationKind::UnconfinedApparmor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::BlockedHostPath => "blocked_host_path",
            ViolationKind::AncestorOfBlockedPath => "ancestor_of_blocked_path",
            ViolationKind::MalformedBind => "malformed_bind",
            ViolationKind::RelativeBindSource => "relative_bind_source",
            ViolationKind::HostNetwork => "host_network",
            ViolationKind::UnconfinedSeccomp => "unconfined_seccomp",
            ViolationKind::UnconfinedApparmor => "unconfined_apparmor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
    pub reason: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationResult {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Advisory findings that do not affect `ok`.
    pub warnings: Vec<String>,
}

impl ValidationResult {
    fn from_parts(violations: Vec<Violation>, warnings: Vec<String>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
            warnings,
        }
    }
}

/// Resolves symlinks in a host path. Returning `None` keeps the lexical
/// form (for example when the path does not exist).
pub type FsProbe<'a> = &'a (dyn Fn(&str) -> Option<String> + Sync);

/// Probe backed by `std::fs::canonicalize`.
pub fn realpath_probe(path: &str) -> Option<String> {
    std::fs::canonicalize(path)
        .ok()
        .and_then(|p| p.to_str().map(str::to_string))
}

fn is_windows_drive(bind: &str) -> bool {
    let b = bind.as_bytes();
    b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1] == b':'
        && (b.len() == 2 || b[2] == b'\\' || b[2] == b'/')
}

/// Checks one normalized absolute source against the blocklist in both
/// directions.
fn check_source(source: &str, blocked: &[String]) -> Option<(ViolationKind, String)> {
    if let Some(p) = blocked.iter().find(|p| is_same_or_under(source, p)) {
        return Some((ViolationKind::BlockedHostPath, format!("blocked host path: {source} (under {p})")));
    }
    if let Some(p) = blocked.iter().find(|p| is_same_or_under(p, source)) {
        return Some((
            ViolationKind::AncestorOfBlockedPath,
            format!("ancestor of blocked path: {source} contains {p}"),
        ));
    }
    None
}

pub fn validate_bind_mounts(binds: &[String], blocked: &[String], fs_probe: Option<FsProbe<'_>>) -> ValidationResult {
    let blocked: Vec<String> = blocked.iter().map(|p| normalize(p)).collect();
    let mut violations = Vec::new();
    for bind in binds {
        let violation = |kind, reason: String| Violation {
            field: "binds".into(),
            kind,
            reason,
            value: bind.clone(),
        };
        if is_windows_drive(bind) {
            violations.push(violation(ViolationKind::MalformedBind, "drive-letter paths are not supported".into()));
            continue;
        }
        let Some((raw_source, target)) = bind.split_once(':') else {
            violations.push(violation(ViolationKind::MalformedBind, "expected source:target[:mode]".into()));
            continue;
        };
        if raw_source.is_empty() || target.is_empty() || target.starts_with(':') {
            violations.push(violation(ViolationKind::MalformedBind, "empty source or target".into()));
            continue;
        }
        if !raw_source.starts_with('/') {
            violations.push(violation(
                ViolationKind::RelativeBindSource,
                format!("bind source {raw_source} is not absolute"),
            ));
            continue;
        }
        let lexical = normalize(raw_source);
        let mut candidates = vec![lexical.clone()];
        if let Some(resolved) = fs_probe.and_then(|probe| probe(&lexical)) {
            let resolved = normalize(&resolved);
            if resolved != lexical {
                candidates.push(resolved);
            }
        }
        if let Some((kind, reason)) = candidates.iter().find_map(|c| check_source(c, &blocked)) {
            violations.push(violation(kind, reason));
        }
    }
    ValidationResult::from_parts(violations, Vec::new())
}

pub fn validate_sandbox_config(cfg: &SandboxConfig, policy: &PolicyDocument) -> ValidationResult {
    validate_sandbox_config_with_probe(cfg, policy, None)
}

pub fn validate_sandbox_config_with_probe(
    cfg: &SandboxConfig,
    policy: &PolicyDocument,
    fs_probe: Option<FsProbe<'_>>,
) -> ValidationResult {
    let binds = validate_bind_mounts(&cfg.binds, &policy.sandbox_blocklist, fs_probe);
    let mut violations = binds.violations;
    let mut warnings = Vec::new();

    let network = cfg.network.as_deref().unwrap_or("none");
    if network.eq_ignore_ascii_case("host") {
        violations.push(Violation {
            field: "network".into(),
            kind: ViolationKind::HostNetwork,
            reason: "host networking shares the host network namespace".into(),
            value: network.into(),
        });
    } else if network != "none" {
        warnings.push(format!("network {network:?} is neither \"none\" nor \"host\""));
    }

    for (field, value, kind) in [
        ("seccomp_profile", &cfg.seccomp_profile, ViolationKind::UnconfinedSeccomp),
        ("apparmor_profile", &cfg.apparmor_profile, ViolationKind::UnconfinedApparmor),
    ] {
        if let Some(v) = value {
            if v.eq_ignore_ascii_case("unconfined") {
                violations.push(Violation {
                    field: field.into(),
                    kind,
                    reason: format!("{field} \"unconfined\" disables the security module"),
                    value: v.clone(),
                });
            }
        }
    }
    ValidationResult::from_parts(violations, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn floor() -> Vec<String> {
        BLOCKED_HOST_PATHS.iter().map(|s| s.to_string()).collect()
    }

    fn check(bind: &str) -> ValidationResult {
        validate_bind_mounts(&[bind.to_string()], &floor(), None)
    }

    #[test]
    fn direct_and_ancestor_mounts() {
        assert!(!check("/var/run/docker.sock:/var/run/docker.sock").ok);
        assert!(check("/home/u/project:/workspace").ok);
        let r = check("/run:/run");
        assert_eq!(r.violations[0].kind, ViolationKind::AncestorOfBlockedPath);
        assert!(check("/etc/../home/u:/w").ok);
        assert_eq!(check("/etc/ssl:/x").violations[0].kind, ViolationKind::BlockedHostPath);
        assert!(!check("/:/host").ok);
        assert!(check("/etcetera:/x").ok);
    }

    #[test]
    fn aliases_are_caught() {
        for p in BLOCKED_HOST_PATHS {
            assert!(!check(&format!("{p}/.:x")).ok, "{p}");
            assert!(!check(&format!("{p}/sub/..:x")).ok, "{p}");
            assert!(!check(&format!("/tmp/../{p}//:x:ro")).ok, "{p}");
        }
    }

    #[test]
    fn malformed_binds() {
        for bind in ["/data", ":/x", "/data:", "C:\\data:/x", "c:/data:/x", "/a::ro"] {
            let r = check(bind);
            assert_eq!(r.violations.len(), 1, "{bind}");
            assert_eq!(r.violations[0].kind, ViolationKind::MalformedBind, "{bind}");
        }
        assert_eq!(check("data:/x").violations[0].kind, ViolationKind::RelativeBindSource);
    }

    #[test]
    fn probe_resolves_symlinks() {
        let probe = |p: &str| (p == "/home/u/link").then(|| "/etc".to_string());
        let r = validate_bind_mounts(&["/home/u/link:/x".to_string()], &floor(), Some(&probe));
        assert!(!r.ok);
        let r = validate_bind_mounts(&["/home/u/other:/x".to_string()], &floor(), Some(&probe));
        assert!(r.ok);
    }

    #[test]
    fn realpath_probe_on_real_symlink() {
        let dir = tempfile::tempdir().unwrap();
        let link = dir.path().join("sneaky");
        #[cfg(unix)]
        std::os::unix::fs::symlink("/proc", &link).unwrap();
        let bind = format!("{}:/x", link.display());
        let r = validate_bind_mounts(&[bind], &floor(), Some(&realpath_probe));
        assert!(!r.ok);
    }

    #[test]
    fn config_level_checks() {
        let policy = PolicyDocument::default();
        let cfg = SandboxConfig {
            network: Some("host".into()),
            ..Default::default()
        };
        assert!(!validate_sandbox_config(&cfg, &policy).ok);
        assert!(validate_sandbox_config(&SandboxConfig::default(), &policy).ok);
        let cfg = SandboxConfig {
            seccomp_profile: Some("unconfined".into()),
            ..Default::default()
        };
        assert!(!validate_sandbox_config(&cfg, &policy).ok);
        let cfg = SandboxConfig {
            apparmor_profile: Some("Unconfined".into()),
            ..Default::default()
        };
        assert!(!validate_sandbox_config(&cfg, &policy).ok);
        let cfg = SandboxConfig {
            network: Some("agents".into()),
            seccomp_profile: Some("default".into()),
            ..Default::default()
        };
        let r = validate_sandbox_config(&cfg, &policy);
        assert!(r.ok);
        assert_eq!(r.warnings.len(), 1);
    }

    proptest! {
        #[test]
        fn adding_blocked_paths_is_monotone(
            source in "(/[a-c.]{1,3}){1,4}",
            extra in "(/[a-c]{1,2}){1,3}",
        ) {
            let bind = vec![format!("{source}:/x")];
            let base = validate_bind_mounts(&bind, &floor(), None);
            let mut more = floor();
            more.push(extra);
            let extended = validate_bind_mounts(&bind, &more, None);
            prop_assert!(base.ok || !extended.ok);
        }
    }
}
