//! Gateway URL override validation and node.invoke method gating.
//!
//!     cargo run --example gateway_gating

use agentguard::gateway::{gate_node_invoke_method, validate_gateway_url_override, GatewayEndpointPolicy, NodeCommandPolicy};

fn main() {
    let endpoint = GatewayEndpointPolicy {
        port: 18789,
        remote_url: Some("wss://gateway.example.org".into()),
    };
    for url in [
        "ws://127.0.0.1:18789",
        "ws://[::1]:18789",
        "ws://localhost:18789",
        "WSS://Gateway.Example.Org:443/",
        "ws://attacker.example.com:4444",
        "ws://127.0.0.1:9999",
        "http://127.0.0.1:18789",
        "",
    ] {
        println!("{url:<36} {:?}", validate_gateway_url_override(url, &endpoint));
    }

    // Even a policy that lists the approval methods cannot make them dispatchable.
    let mut permissive = NodeCommandPolicy::default();
    permissive.allowed.insert("system.execApprovals.set".into());
    for method in ["system.run", "system.execApprovals.set", "system.execApprovals.get", "fs.write"] {
        println!("{method:<28} {:?}", gate_node_invoke_method(method, &permissive));
    }
}
