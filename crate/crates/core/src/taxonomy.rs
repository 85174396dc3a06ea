//! Attack-surface and kill-chain vocabulary used to label audit findings.
//!
//! Every label produced by [`label_decision`] falls on a cell the threat
//! matrix marks as reachable; `MARKED_CELLS` is that matrix.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::exec;
use crate::gateway::{MethodDenial, UrlRejection};
use crate::sandbox::ViolationKind;
use crate::skill::Indicator;
use crate::webhook::RejectReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Surface {
    ChannelInput,
    PluginSkill,
    AgentContext,
    GatewayWebSocket,
    ToolDispatch,
    ExecPolicy,
    Container,
    HostOs,
    LlmProvider,
    InterAgent,
}

impl Surface {
    pub const ALL: [Surface; 10] = [
        Surface::ChannelInput,
        Surface::PluginSkill,
        Surface::AgentContext,
        Surface::GatewayWebSocket,
        Surface::ToolDispatch,
        Surface::ExecPolicy,
        Surface::Container,
        Surface::HostOs,
        Surface::LlmProvider,
        Surface::InterAgent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Surface::ChannelInput => "Channel Input Interface",
            Surface::PluginSkill => "Plugin & Skill Distribution",
            Surface::AgentContext => "Agent Context Window",
            Surface::GatewayWebSocket => "Gateway WebSocket Interface",
            Surface::ToolDispatch => "Tool Dispatch Interface",
            Surface::ExecPolicy => "Exec Policy Engine",
            Surface::Container => "Container Boundary",
            Surface::HostOs => "Host OS Interface",
            Surface::LlmProvider => "LLM Provider Interface",
            Surface::InterAgent => "Inter-Agent Communication",
        }
    }
}

/// Kill-chain stages, in attack order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    InitialAccess,
    ContextManipulation,
    Execution,
    CredentialAccess,
    PrivilegeEscalation,
    Impact,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::InitialAccess,
        Stage::ContextManipulation,
        Stage::Execution,
        Stage::CredentialAccess,
        Stage::PrivilegeEscalation,
        Stage::Impact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::InitialAccess => "Initial Access",
            Stage::ContextManipulation => "Context Manipulation",
            Stage::Execution => "Execution",
            Stage::CredentialAccess => "Credential Access",
            Stage::PrivilegeEscalation => "Privilege Escalation",
            Stage::Impact => "Impact",
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Surface {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Serialize for Stage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Surface x stage cells marked in the threat matrix.
pub const MARKED_CELLS: &[(Surface, &[Stage])] = {
    use Stage::*;
    &[
        (Surface::ChannelInput, &[InitialAccess, ContextManipulation]),
        (Surface::PluginSkill, &[InitialAccess, ContextManipulation, Impact]),
        (Surface::AgentContext, &[ContextManipulation, Execution]),
        (Surface::GatewayWebSocket, &[Execution, CredentialAccess, PrivilegeEscalation]),
        (Surface::ToolDispatch, &[Execution, PrivilegeEscalation, Impact]),
        (Surface::ExecPolicy, &[PrivilegeEscalation, Impact]),
        (Surface::Container, &[PrivilegeEscalation, Impact]),
        (Surface::HostOs, &[Impact]),
        (Surface::LlmProvider, &[ContextManipulation, Execution]),
        (
            Surface::InterAgent,
            &[InitialAccess, ContextManipulation, Execution, CredentialAccess, PrivilegeEscalation, Impact],
        ),
    ]
};

pub fn is_marked(surface: Surface, stage: Stage) -> bool {
    MARKED_CELLS
        .iter()
        .any(|(s, stages)| *s == surface && stages.contains(&stage))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Label {
    pub surface: Surface,
    pub stage: Stage,
}

/// Every outcome an audit check can report, passing or failing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuditReason {
    Exec(exec::Reason),
    Sandbox(ViolationKind),
    SandboxOk,
    GatewayUrl(UrlRejection),
    GatewayUrlAllowed,
    GatewayMethod(MethodDenial),
    GatewayMethodDispatchable,
    SenderNotAllowed,
    SenderIdMatch,
    SenderWildcardMatch,
    HandleRewritten,
    HandleUnresolved,
    HandlePassthrough,
    Webhook(RejectReason),
    WebhookAuthentic,
    ProvenanceRejected,
    InterSessionTurn,
    ProvenanceAccepted,
    Skill(Indicator),
    ManifestMismatch,
    ManifestIntact,
    SkillClean,
}

impl AuditReason {
    /// Every variant, for exhaustiveness checks.
    pub fn all() -> Vec<AuditReason> {
        let mut out: Vec<AuditReason> = exec::Reason::ALL.into_iter().map(AuditReason::Exec).collect();
        out.extend(ViolationKind::ALL.into_iter().map(AuditReason::Sandbox));
        out.extend(
            [UrlRejection::Unparseable, UrlRejection::UnsupportedScheme, UrlRejection::NotAllowlisted]
                .map(AuditReason::GatewayUrl),
        );
        out.extend(
            [
                MethodDenial::ApprovalPolicyMutation,
                MethodDenial::NotDispatchable,
                MethodDenial::InvalidMethod,
            ]
            .map(AuditReason::GatewayMethod),
        );
        out.extend(RejectReason::ALL.map(AuditReason::Webhook));
        out.extend(Indicator::ALL.map(AuditReason::Skill));
        out.extend([
            AuditReason::SandboxOk,
            AuditReason::GatewayUrlAllowed,
            AuditReason::GatewayMethodDispatchable,
            AuditReason::SenderNotAllowed,
            AuditReason::SenderIdMatch,
            AuditReason::SenderWildcardMatch,
            AuditReason::HandleRewritten,
            AuditReason::HandleUnresolved,
            AuditReason::HandlePassthrough,
            AuditReason::WebhookAuthentic,
            AuditReason::ProvenanceRejected,
            AuditReason::InterSessionTurn,
            AuditReason::ProvenanceAccepted,
            AuditReason::ManifestMismatch,
            AuditReason::ManifestIntact,
            AuditReason::SkillClean,
        ]);
        out
    }

    /// Stable snake_case code used in reports.
    pub fn code(self) -> &'static str {
        match self {
            AuditReason::Exec(r) => r.as_str(),
            AuditReason::Sandbox(k) => k.as_str(),
            AuditReason::SandboxOk => "ok",
            AuditReason::GatewayUrl(r) => r.as_str(),
            AuditReason::GatewayUrlAllowed => "url_allowed",
            AuditReason::GatewayMethod(d) => d.as_str(),
            AuditReason::GatewayMethodDispatchable => "dispatchable",
            AuditReason::SenderNotAllowed => "sender_not_allowed",
            AuditReason::SenderIdMatch => "id_match",
            AuditReason::SenderWildcardMatch => "wildcard_match",
            AuditReason::HandleRewritten => "rewritten",
            AuditReason::HandleUnresolved => "unresolved",
            AuditReason::HandlePassthrough => "passthrough",
            AuditReason::Webhook(r) => r.as_str(),
            AuditReason::WebhookAuthentic => "authentic",
            AuditReason::ProvenanceRejected => "provenance_rejected",
            AuditReason::InterSessionTurn => "inter_session",
            AuditReason::ProvenanceAccepted => "provenance_accepted",
            AuditReason::Skill(i) => i.as_str(),
            AuditReason::ManifestMismatch => "manifest_mismatch",
            AuditReason::ManifestIntact => "intact",
            AuditReason::SkillClean => "clean",
        }
    }
}

/// Total mapping from audit outcome to the surface it protects and the
/// kill-chain stage it interrupts.
pub fn label_decision(reason: &AuditReason) -> Label {
    use AuditReason as R;
    let (surface, stage) = match reason {
        R::Exec(_) => (Surface::ExecPolicy, Stage::PrivilegeEscalation),
        R::Sandbox(_) | R::SandboxOk => (Surface::Container, Stage::PrivilegeEscalation),
        R::GatewayUrl(_) | R::GatewayUrlAllowed => (Surface::GatewayWebSocket, Stage::CredentialAccess),
        R::GatewayMethod(_) | R::GatewayMethodDispatchable => {
            (Surface::GatewayWebSocket, Stage::PrivilegeEscalation)
        }
        R::SenderNotAllowed
        | R::SenderIdMatch
        | R::SenderWildcardMatch
        | R::HandleRewritten
        | R::HandleUnresolved
        | R::HandlePassthrough
        | R::Webhook(_)
        | R::WebhookAuthentic => (Surface::ChannelInput, Stage::InitialAccess),
        R::ProvenanceRejected | R::InterSessionTurn | R::ProvenanceAccepted => {
            (Surface::InterAgent, Stage::ContextManipulation)
        }
        R::Skill(_) | R::ManifestMismatch | R::ManifestIntact | R::SkillClean => {
            (Surface::PluginSkill, Stage::InitialAccess)
        }
    };
    Label { surface, stage }
}
