//! GNU long-option canonicalization: abbreviations resolve to the flag the
//! program would actually see before the profile is consulted.
//!
//!     cargo run --example safe_bin_flags -- --compress-prog=sh --rev --re

use agentguard::safe_bin::{consume_long_option_token, default_profiles, resolve_canonical_long_flag};

fn main() -> agentguard::Result<()> {
    let sort = default_profiles()
        .into_iter()
        .find(|p| p.binary == "sort")
        .expect("sort profile ships by default");
    let mut tokens: Vec<String> = std::env::args().skip(1).collect();
    if tokens.is_empty() {
        tokens = ["--compress-prog=gzip", "--compress", "--rev", "--re", "--unique", "--uniq", "--no-such", "--te=/tmp"]
            .map(String::from)
            .to_vec();
    }
    println!("sort profile denies {:?}", sort.denied_long_flags);
    for token in &tokens {
        let resolution = resolve_canonical_long_flag(token, &sort)?;
        let decision = consume_long_option_token(token, &sort);
        println!("{token:<22} {resolution:?} -> {decision:?}");
    }
    Ok(())
}
