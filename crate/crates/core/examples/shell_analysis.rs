//! Tokenize command strings the way a POSIX shell would, failing closed on
//! anything whose runtime meaning cannot be fixed lexically.
//!
//!     cargo run --example shell_analysis -- 'sort -u notes.txt | head -n 5'

use agentguard::shell::{analyze_text, AnalysisPolicy, CommandAnalysis};

fn main() -> agentguard::Result<()> {
    let policy = AnalysisPolicy::default();
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = vec![
            "sort -u notes.txt | head -n 5".into(),
            "grep -r 'TODO' src && echo done".into(),
            "echo \"ok $\\\n(id -u)\"".into(),
            "cat $(ls)".into(),
            "LD_PRELOAD=/tmp/x.so ls".into(),
            "echo 'unterminated".into(),
        ];
    }
    for text in &inputs {
        println!("{text:?}");
        match analyze_text(text, &policy)? {
            CommandAnalysis::Chain { commands, connectors } => {
                for (i, cmd) in commands.iter().enumerate() {
                    println!("  [{i}] argv={:?}", cmd.argv);
                    if !cmd.env_assignments.is_empty() {
                        println!("      env={:?}", cmd.env_assignments);
                    }
                    if !cmd.redirections.is_empty() {
                        println!("      redirections={:?}", cmd.redirections);
                    }
                }
                let ops: Vec<_> = connectors.iter().map(|c| c.as_str()).collect();
                println!("  connectors={ops:?}");
            }
            CommandAnalysis::Failure(f) => {
                println!("  analysis failure: {} at byte {}", f.reason, f.offset);
            }
        }
    }
    Ok(())
}
