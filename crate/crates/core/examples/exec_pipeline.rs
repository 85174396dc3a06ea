//! The three-phase exec decision: allowlist evaluation, approval lookup,
//! and a single verdict for the whole chain. Includes the three known
//! bypass strings and an approval store round trip.
//!
//!     cargo run --example exec_pipeline

use agentguard::exec::{
    evaluate_argv, evaluate_shell_allowlist, ApprovalStore, ExecutableIdentity, Origin, Scope, StaticResolver,
};
use agentguard::policy::PolicyDocument;
use agentguard::shell::RawCommand;

const POLICY: &str = r#"{
  "version": 1,
  "allowlist": [
    { "pattern": "sort", "safe_bin_profile": "sort" },
    { "pattern": "echo" },
    { "pattern": "busybox" }
  ]
}"#;

fn main() -> agentguard::Result<()> {
    let policy = PolicyDocument::from_json(POLICY)?;
    let resolver = StaticResolver::new(
        ["/usr/bin", "/bin"],
        ["/usr/bin/sort", "/bin/echo", "/bin/busybox", "/usr/bin/id", "/usr/bin/git"],
    );
    let mut store = ApprovalStore::default();

    let commands = [
        "sort -u notes.txt",
        "echo \"ok $\\\n(id -u)\"",
        "busybox sh -c 'id'",
        "busybox ls",
        "sort --compress-prog=sh notes.txt",
        "git status && sort notes.txt",
    ];
    for text in commands {
        let decision = evaluate_shell_allowlist(&RawCommand::new(text)?, &policy, &store, &resolver);
        println!(
            "{:<40} {:<16} {:<20} {}",
            format!("{text:?}"),
            decision.verdict.as_str(),
            decision.reason.as_str(),
            decision.detail()
        );
    }

    let mut no_reanalysis = policy.clone();
    no_reanalysis.shell_reanalysis = false;
    let d = evaluate_shell_allowlist(&RawCommand::new("busybox sh -c 'id'")?, &no_reanalysis, &store, &resolver);
    println!("without sh re-analysis: busybox sh -c 'id' -> {} ({})", d.verdict.as_str(), d.reason.as_str());

    // An operator approves git; the next evaluation finds it in the store.
    let git = ExecutableIdentity::from_path("/usr/bin/git")?;
    store.record_approval(&git, Scope::AllowAlways, Origin::Operator, 1_700_000_000)?;
    let d = evaluate_shell_allowlist(&RawCommand::new("git status")?, &policy, &store, &resolver);
    println!("after approval: git status -> {} ({})", d.verdict.as_str(), d.reason.as_str());

    let busybox = ExecutableIdentity::from_path("/bin/busybox")?;
    if let Err(e) = store.record_approval(&busybox, Scope::AllowAlways, Origin::ApprovalFlow, 0) {
        println!("approving busybox refused: {e}");
    }

    let text = store.to_jsonl();
    print!("store:\n{text}");
    assert_eq!(ApprovalStore::from_jsonl(&text)?, store);

    // Direct-argv mode skips shell analysis entirely.
    let argv: Vec<String> = ["sort", "-u", "notes.txt"].map(String::from).to_vec();
    let d = evaluate_argv(&argv, &policy, &store, &resolver)?;
    println!("argv {argv:?} -> {}", d.verdict.as_str());
    Ok(())
}
