//! Gateway URL override validation and node-invoke method gating.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use url::{Host, Url};

use crate::error::{Error, Result};

pub const DEFAULT_GATEWAY_PORT: u16 = 18789;

/// Methods a remote operator may dispatch through `node.invoke`.
pub const DEFAULT_NODE_COMMANDS: &[&str] =
    &["system.run", "system.which", "system.notify", "browser.proxy"];

/// Approval-policy methods. Rejected before the dispatch allowlist is
/// consulted, so no configuration can re-expose them.
pub const APPROVAL_POLICY_PREFIX: &str = "system.execApprovals.";

const LOOPBACK_HOSTS: &[&str] = &["127.0.0.1", "::1", "localhost"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayEndpointPolicy {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub remote_url: Option<String>,
}

fn default_port() -> u16 {
    DEFAULT_GATEWAY_PORT
}

impl Default for GatewayEndpointPolicy {
    fn default() -> Self {
        Self {
            port: DEFAULT_GATEWAY_PORT,
            remote_url: None,
        }
    }
}

impl GatewayEndpointPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.port == 0 {
            return Err(Error::Config("gateway.port must be in 1..=65535".into()));
        }
        if let Some(remote) = &self.remote_url {
            canonicalize(remote)
                .map_err(|e| Error::Config(format!("gateway.remote_url: {e}")))?;
        }
        Ok(())
    }

    /// Loopback variants at the configured port plus the configured remote.
    pub fn allowlist(&self) -> BTreeSet<CanonicalEndpoint> {
        let mut set: BTreeSet<CanonicalEndpoint> = LOOPBACK_HOSTS
            .iter()
            .map(|host| CanonicalEndpoint {
                scheme: "ws".into(),
                host: host.to_string(),
                port: self.port,
            })
            .collect();
        if let Some(remote) = self.remote_url.as_deref().and_then(|u| canonicalize(u).ok()) {
            set.insert(remote);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CanonicalEndpoint {
    pub scheme: String,
    /// Lowercased; IPv6 literals without brackets.
    pub host: String,
    pub port: u16,
}

impl fmt::Display for CanonicalEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "{}://[{}]:{}", self.scheme, self.host, self.port)
        } else {
            write!(f, "{}://{}:{}", self.scheme, self.host, self.port)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlRejection {
    Unparseable,
    UnsupportedScheme,
    NotAllowlisted,
}

impl UrlRejection {
    pub fn as_str(self) -> &'static str {
        match self {
            UrlRejection::Unparseable => "unparseable_url",
            UrlRejection::UnsupportedScheme => "unsupported_scheme",
            UrlRejection::NotAllowlisted => "url_not_allowlisted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum UrlDecision {
    /// Empty candidate: the caller keeps its configured endpoint.
    NoOverride,
    Allowed { endpoint: CanonicalEndpoint },
    Rejected { reason: UrlRejection, detail: String },
}

impl UrlDecision {
    pub fn is_rejected(&self) -> bool {
        matches!(self, UrlDecision::Rejected { .. })
    }
}

/// Parses a `ws`/`wss` URL into its scheme, host and effective port.
pub fn canonicalize(candidate: &str) -> std::result::Result<CanonicalEndpoint, String> {
    let url = Url::parse(candidate.trim()).map_err(|e| e.to_string())?;
    let scheme = url.scheme().to_ascii_lowercase();
    if scheme != "ws" && scheme != "wss" {
        return Err(format!("unsupported scheme {scheme:?}"));
    }
    let host = match url.host() {
        Some(Host::Domain(d)) => d.to_ascii_lowercase(),
        Some(Host::Ipv4(ip)) => ip.to_string(),
        Some(Host::Ipv6(ip)) => ip.to_string(),
        None => return Err("missing host".into()),
    };
    let port = url
        .port_or_known_default()
        .ok_or_else(|| "missing port".to_string())?;
    Ok(CanonicalEndpoint { scheme, host, port })
}

pub fn validate_gateway_url_override(candidate: &str, policy: &GatewayEndpointPolicy) -> UrlDecision {
    if candidate.trim().is_empty() {
        return UrlDecision::NoOverride;
    }
    let endpoint = match canonicalize(candidate) {
        Ok(endpoint) => endpoint,
        Err(detail) => {
            let reason = if detail.starts_with("unsupported scheme") {
                UrlRejection::UnsupportedScheme
            } else {
                UrlRejection::Unparseable
            };
            return UrlDecision::Rejected { reason, detail };
        }
    };
    if policy.allowlist().contains(&endpoint) {
        UrlDecision::Allowed { endpoint }
    } else {
        UrlDecision::Rejected {
            reason: UrlRejection::NotAllowlisted,
            detail: format!("{endpoint} is not a loopback gateway or the configured remote"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCommandPolicy {
    pub allowed: BTreeSet<String>,
}

impl Default for NodeCommandPolicy {
    fn default() -> Self {
        Self {
            allowed: DEFAULT_NODE_COMMANDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodDenial {
    ApprovalPolicyMutation,
    NotDispatchable,
    InvalidMethod,
}

impl MethodDenial {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodDenial::ApprovalPolicyMutation => "approval_policy_method",
            MethodDenial::NotDispatchable => "method_not_dispatchable",
            MethodDenial::InvalidMethod => "invalid_method",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum MethodDecision {
    Dispatchable,
    Denied { reason: MethodDenial },
}

fn is_dotted_identifier(method: &str) -> bool {
    !method.is_empty()
        && method.split('.').all(|part| {
            let mut chars = part.chars();
            matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

pub fn gate_node_invoke_method(method: &str, policy: &NodeCommandPolicy) -> MethodDecision {
    if method.starts_with(APPROVAL_POLICY_PREFIX) {
        return MethodDecision::Denied {
            reason: MethodDenial::ApprovalPolicyMutation,
        };
    }
    if !is_dotted_identifier(method) {
        return MethodDecision::Denied {
            reason: MethodDenial::InvalidMethod,
        };
    }
    if policy.allowed.contains(method) {
        MethodDecision::Dispatchable
    } else {
        MethodDecision::Denied {
            reason: MethodDenial::NotDispatchable,
        }
    }
}
