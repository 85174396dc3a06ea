//! The operator-authored policy document.
//!
//! On disk it is a JSON object with a leading `"version": 1`. Unknown
//! fields are rejected. Every list that carries a safety floor (sandbox
//! blocklist, dangerous environment variables) extends the built-in set;
//! it cannot remove entries from it.
//!
//! ```json
//! {
//!   "version": 1,
//!   "allowlist": [
//!     { "pattern": "sort", "scope": "allow_always", "safe_bin_profile": "sort" },
//!     { "pattern": "/usr/bin/git" }
//!   ],
//!   "safe_bin_profiles": [],
//!   "sandbox_blocklist_extra": ["/srv/secrets"],
//!   "gateway": { "port": 18789, "remote_url": "wss://gw.example.org" },
//!   "dangerous_env_vars": ["PYTHONPATH"],
//!   "entropy_threshold": 7.9,
//!   "shell_reanalysis": true
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exec::AllowlistEntry;
use crate::gateway::{GatewayEndpointPolicy, NodeCommandPolicy};
use crate::paths::normalize;
use crate::safe_bin::{default_profiles, SafeBinProfile};
use crate::sandbox::BLOCKED_HOST_PATHS;
use crate::shell::AnalysisPolicy;
use crate::skill::DEFAULT_ENTROPY_THRESHOLD;
use crate::wrapper::{default_shell_applets, MULTIPLEXERS};

pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    version: u32,
    #[serde(default)]
    allowlist: Vec<AllowlistEntry>,
    #[serde(default)]
    safe_bin_profiles: Vec<SafeBinProfile>,
    #[serde(default)]
    sandbox_blocklist_extra: Vec<String>,
    #[serde(default)]
    gateway: GatewayEndpointPolicy,
    #[serde(default)]
    dangerous_env_vars: Vec<String>,
    #[serde(default)]
    entropy_threshold: Option<f64>,
    #[serde(default)]
    shell_reanalysis: Option<bool>,
    #[serde(default)]
    shell_applets: Option<Vec<String>>,
    #[serde(default)]
    node_commands: Option<Vec<String>>,
}

/// A loaded and validated policy with all built-in floors applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDocument {
    pub allowlist: Vec<AllowlistEntry>,
    /// Shipped profiles overlaid with operator profiles, keyed by binary.
    pub safe_bin_profiles: BTreeMap<String, SafeBinProfile>,
    /// Built-in blocklist plus operator extras, normalized.
    pub sandbox_blocklist: Vec<String>,
    pub gateway: GatewayEndpointPolicy,
    pub node_commands: NodeCommandPolicy,
    pub analysis: AnalysisPolicy,
    pub entropy_threshold: f64,
    pub shell_reanalysis: bool,
    pub shell_applets: BTreeSet<String>,
}

impl Default for PolicyDocument {
    fn default() -> Self {
        Self {
            allowlist: Vec::new(),
            safe_bin_profiles: default_profiles()
                .into_iter()
                .map(|p| (p.binary.clone(), p))
                .collect(),
            sandbox_blocklist: BLOCKED_HOST_PATHS.iter().map(|s| s.to_string()).collect(),
            gateway: GatewayEndpointPolicy::default(),
            node_commands: NodeCommandPolicy::default(),
            analysis: AnalysisPolicy::default(),
            entropy_threshold: DEFAULT_ENTROPY_THRESHOLD,
            shell_reanalysis: true,
            shell_applets: default_shell_applets(),
        }
    }
}

impl PolicyDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("policy: {e}")))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn from_file(file: PolicyFile) -> Result<Self> {
        if file.version != POLICY_VERSION {
            return Err(Error::Config(format!(
                "unsupported policy version {} (expected {POLICY_VERSION})",
                file.version
            )));
        }
        let mut doc = Self::default();

        for profile in file.safe_bin_profiles {
            profile.validate()?;
            doc.safe_bin_profiles.insert(profile.binary.clone(), profile);
        }
        for entry in &file.allowlist {
            entry.validate()?;
            if let Some(name) = &entry.safe_bin_profile {
                if !doc.safe_bin_profiles.contains_key(name) {
                    return Err(Error::Config(format!(
                        "allowlist entry {} references unknown profile {name}",
                        entry.pattern
                    )));
                }
            }
        }
        doc.allowlist = file.allowlist;

        for extra in file.sandbox_blocklist_extra {
            if !extra.starts_with('/') {
                return Err(Error::Config(format!("sandbox blocklist path {extra} is not absolute")));
            }
            let extra = normalize(&extra);
            if !doc.sandbox_blocklist.contains(&extra) {
                doc.sandbox_blocklist.push(extra);
            }
        }

        file.gateway.validate()?;
        doc.gateway = file.gateway;

        doc.analysis
            .dangerous_env_vars
            .extend(file.dangerous_env_vars.into_iter().filter(|v| !v.is_empty()));

        if let Some(threshold) = file.entropy_threshold {
            if !(0.0..=8.0).contains(&threshold) {
                return Err(Error::Config(format!(
                    "entropy_threshold {threshold} is outside [0, 8]"
                )));
            }
            doc.entropy_threshold = threshold;
        }
        if let Some(reanalyze) = file.shell_reanalysis {
            doc.shell_reanalysis = reanalyze;
        }
        if let Some(applets) = file.shell_applets {
            if let Some(bad) = applets.iter().find(|a| a.is_empty() || MULTIPLEXERS.contains(&a.as_str())) {
                return Err(Error::Config(format!("invalid shell applet {bad:?}")));
            }
            doc.shell_applets = applets.into_iter().collect();
        }
        if let Some(commands) = file.node_commands {
            doc.node_commands = NodeCommandPolicy {
                allowed: commands.into_iter().collect(),
            };
        }
        Ok(doc)
    }

    pub fn profile(&self, binary: &str) -> Option<&SafeBinProfile> {
        self.safe_bin_profiles.get(binary)
    }
}
