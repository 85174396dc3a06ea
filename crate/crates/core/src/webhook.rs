//! HMAC-SHA256 webhook verification.
//!
//! [`WebhookVerificationRequest`] has no source-address field, so there is
//! no way to express "trust this caller without a signature".

use hmac::{Hmac, Mac};
use serde::Serialize;
use sha2::Sha256;

use crate::error::{Error, Result};

type HmacSha256 = Hmac<Sha256>;

/// Optional prefix some platforms put in front of the hex digest.
pub const SIGNATURE_PREFIX: &str = "sha256=";

#[derive(Debug, Clone)]
pub struct WebhookVerificationRequest {
    body: Vec<u8>,
    signature_header: String,
    secret: Vec<u8>,
    timestamp_header: Option<String>,
    tolerance_seconds: u64,
}

impl WebhookVerificationRequest {
    pub fn new(
        body: impl Into<Vec<u8>>,
        signature_header: impl Into<String>,
        secret: impl Into<Vec<u8>>,
        timestamp_header: Option<String>,
        tolerance_seconds: u64,
    ) -> Result<Self> {
        let secret = secret.into();
        if secret.is_empty() {
            return Err(Error::Usage("webhook secret must not be empty".into()));
        }
        Ok(Self {
            body: body.into(),
            signature_header: signature_header.into(),
            secret,
            timestamp_header,
            tolerance_seconds,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BadSignature,
    StaleTimestamp,
    MalformedHeader,
}

impl RejectReason {
    pub const ALL: [RejectReason; 3] = [
        RejectReason::BadSignature,
        RejectReason::StaleTimestamp,
        RejectReason::MalformedHeader,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BadSignature => "bad_signature",
            RejectReason::StaleTimestamp => "stale_timestamp",
            RejectReason::MalformedHeader => "malformed_header",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum WebhookDecision {
    Authentic,
    Rejected { reason: RejectReason },
}

/// The bytes that are signed: `timestamp + "." + body`, or just the body.
pub fn signed_payload(timestamp: Option<&str>, body: &[u8]) -> Vec<u8> {
    match timestamp {
        Some(ts) => {
            let mut payload = Vec::with_capacity(ts.len() + 1 + body.len());
            payload.extend_from_slice(ts.as_bytes());
            payload.push(b'.');
            payload.extend_from_slice(body);
            payload
        }
        None => body.to_vec(),
    }
}

/// Hex HMAC-SHA256 of the signed payload, for producing test deliveries.
pub fn sign(secret: &[u8], timestamp: Option<&str>, body: &[u8]) -> String {
    let mut mac = HmacSha256::new_from_slice(secret).expect("HMAC accepts any key length");
    mac.update(&signed_payload(timestamp, body));
    hex::encode(mac.finalize().into_bytes())
}

pub fn verify_webhook(req: &WebhookVerificationRequest, now: i64) -> WebhookDecision {
    let timestamp = req.timestamp_header.as_deref().map(str::trim);
    let mut mac = HmacSha256::new_from_slice(&req.secret).expect("HMAC accepts any key length");
    mac.update(&signed_payload(timestamp, &req.body));

    let header = req.signature_header.trim();
    let hex_part = header.strip_prefix(SIGNATURE_PREFIX).unwrap_or(header);
    let provided = hex::decode(hex_part);
    let parsed_ts = timestamp.map(str::parse::<i64>);

    // The MAC is computed before any early exit so timing does not reveal
    // which check failed.
    let signature_ok = match &provided {
        Ok(bytes) => mac.verify_slice(bytes).is_ok(),
        Err(_) => false,
    };

    let reject = |reason| WebhookDecision::Rejected { reason };
    if provided.is_err() || hex_part.is_empty() {
        return reject(RejectReason::MalformedHeader);
    }
    match parsed_ts {
        Some(Err(_)) => return reject(RejectReason::MalformedHeader),
        Some(Ok(ts)) => {
            let tolerance = i64::try_from(req.tolerance_seconds).unwrap_or(i64::MAX);
            if now.abs_diff(ts) > tolerance.unsigned_abs() {
                return reject(RejectReason::StaleTimestamp);
            }
        }
        None => {}
    }
    if signature_ok {
        WebhookDecision::Authentic
    } else {
        reject(RejectReason::BadSignature)
    }
}
