//! Validate container sandbox settings before any container arguments are
//! built: blocked host paths in both directions, host networking, and
//! unconfined security profiles.
//!
//!     cargo run --example sandbox_validation

use agentguard::policy::PolicyDocument;
use agentguard::sandbox::{realpath_probe, validate_sandbox_config, validate_sandbox_config_with_probe, SandboxConfig};

fn main() -> agentguard::Result<()> {
    let policy = PolicyDocument::from_json(r#"{"version":1,"sandbox_blocklist_extra":["/srv/secrets"]}"#)?;
    let configs = [
        r#"{"binds":["/var/run/docker.sock:/var/run/docker.sock"]}"#,
        r#"{"binds":["/run:/run"]}"#,
        r#"{"binds":["/etc/../home/u:/work"]}"#,
        r#"{"binds":["/home/u/project:/workspace:ro"],"network":"none"}"#,
        r#"{"binds":["/srv:/srv"],"network":"host","seccomp_profile":"unconfined"}"#,
        r#"{"binds":["C:\\data:/data"],"network":"agents"}"#,
    ];
    for text in configs {
        let cfg: SandboxConfig = serde_json::from_str(text)?;
        let result = validate_sandbox_config(&cfg, &policy);
        println!("{text}\n  ok={}", result.ok);
        for v in &result.violations {
            println!("  {} {}: {}", v.field, v.kind.as_str(), v.reason);
        }
        for w in &result.warnings {
            println!("  warning: {w}");
        }
    }

    // Symlinked bind sources are checked after resolution as well.
    let dir = std::env::temp_dir().join(format!("agentguard-sandbox-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| agentguard::Error::Usage(e.to_string()))?;
    #[cfg(unix)]
    {
        let link = dir.join("innocent");
        let _ = std::fs::remove_file(&link);
        if std::os::unix::fs::symlink("/etc", &link).is_ok() {
            let cfg = SandboxConfig {
                binds: vec![format!("{}:/data", link.display())],
                ..Default::default()
            };
            let result = validate_sandbox_config_with_probe(&cfg, &policy, Some(&realpath_probe));
            println!("symlink to /etc: ok={} {:?}", result.ok, result.violations.first().map(|v| v.kind));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
