//! HMAC-SHA256 webhook verification with replay tolerance.
//!
//!     cargo run --example webhook_verify

use agentguard::webhook::{sign, verify_webhook, WebhookVerificationRequest};

fn main() -> agentguard::Result<()> {
    // Known-answer vector: key 20 x 0x0b, message "Hi There".
    let kat = "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7";
    let req = WebhookVerificationRequest::new(&b"Hi There"[..], kat, vec![0x0b; 20], None, 0)?;
    println!("known answer: {:?}", verify_webhook(&req, 0));

    let secret = b"whsec_demo".to_vec();
    let body = br#"{"event":"message","text":"hi"}"#.to_vec();
    let ts = "1700000000";
    let signature = format!("sha256={}", sign(&secret, Some(ts), &body));

    let cases: [(&str, Vec<u8>, String, i64); 4] = [
        ("fresh", body.clone(), signature.clone(), 1_700_000_060),
        ("replayed", body.clone(), signature.clone(), 1_700_010_000),
        ("tampered body", b"{}".to_vec(), signature.clone(), 1_700_000_060),
        ("not hex", body.clone(), "sha256=not-hex".into(), 1_700_000_060),
    ];
    for (name, body, sig, now) in cases {
        let req = WebhookVerificationRequest::new(body, sig, secret.clone(), Some(ts.into()), 300)?;
        println!("{name:<14} {:?}", verify_webhook(&req, now));
    }

    match WebhookVerificationRequest::new(&b""[..], "00", Vec::new(), None, 0) {
        Err(e) => println!("empty secret: {e}"),
        Ok(_) => unreachable!("empty secrets are rejected"),
    }
    Ok(())
}
