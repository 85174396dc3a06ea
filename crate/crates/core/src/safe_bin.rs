//! Per-binary flag policies for utilities that are safe to run with the
//! right flags.
//!
//! GNU `getopt_long` accepts any unambiguous prefix of a long option, so a
//! denylist keyed on exact spellings is bypassed by `--compress-prog`.
//! Every long token is therefore canonicalized first, and anything that
//! does not canonicalize is an analysis failure rather than a pass.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::basename;
use crate::shell::SimpleCommand;

/// Shortest abbreviation, counted after `--`, that may resolve to a longer
/// flag. Exact spellings of shorter flags still match, and shorter prefixes
/// that hit several flags are still reported as ambiguous.
pub const MIN_ABBREVIATION_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionalPolicy {
    #[default]
    Any,
    None,
    FilesOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeBinProfile {
    pub binary: String,
    #[serde(default)]
    pub allowed_long_flags: BTreeSet<String>,
    #[serde(default)]
    pub denied_long_flags: BTreeSet<String>,
    #[serde(default)]
    pub allowed_short_flags: BTreeSet<char>,
    /// Allowed short flags that consume a value, attached (`-n5`) or as the
    /// next argument.
    #[serde(default)]
    pub value_short_flags: BTreeSet<char>,
    /// Allowed long flags that consume a value, inline or as the next
    /// argument.
    #[serde(default)]
    pub value_long_flags: BTreeSet<String>,
    #[serde(default)]
    pub positional_policy: PositionalPolicy,
}

impl SafeBinProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("profile {}: {msg}", self.binary)));
        if self.binary.is_empty() || self.binary.contains('/') {
            return bad("binary must be a non-empty basename".into());
        }
        for flag in self.allowed_long_flags.iter().chain(&self.denied_long_flags) {
            if !flag.starts_with("--") || flag.len() < 3 || flag.contains('=') {
                return bad(format!("malformed long flag {flag:?}"));
            }
        }
        if let Some(flag) = self.allowed_long_flags.intersection(&self.denied_long_flags).next() {
            return bad(format!("{flag} is both allowed and denied"));
        }
        if let Some(flag) = self.value_long_flags.difference(&self.allowed_long_flags).next() {
            return bad(format!("value flag {flag} is not allowed"));
        }
        if let Some(c) = self.value_short_flags.difference(&self.allowed_short_flags).next() {
            return bad(format!("value flag -{c} is not allowed"));
        }
        if let Some(c) = self.allowed_short_flags.iter().find(|c| **c == '-') {
            return bad(format!("invalid short flag {c:?}"));
        }
        Ok(())
    }

    pub fn known_long_flags(&self) -> impl Iterator<Item = &String> {
        self.allowed_long_flags.iter().chain(&self.denied_long_flags)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FlagResolution {
    Canonical {
        flag: String,
        inline_value: Option<String>,
    },
    Unknown,
    Ambiguous {
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagDecision {
    Denied,
    AnalysisFailure,
    Permitted,
}

pub fn resolve_canonical_long_flag(token: &str, profile: &SafeBinProfile) -> Result<FlagResolution> {
    if !token.starts_with("--") || token == "--" {
        return Err(Error::Usage(format!("{token:?} is not a long option")));
    }
    let (name, inline_value) = match token.split_once('=') {
        Some((name, value)) => (name, Some(value.to_string())),
        None => (token, None),
    };
    if profile.known_long_flags().any(|f| f == name) {
        return Ok(FlagResolution::Canonical {
            flag: name.to_string(),
            inline_value,
        });
    }
    let mut candidates: Vec<String> = profile
        .known_long_flags()
        .filter(|f| f.len() > name.len() && f.starts_with(name))
        .cloned()
        .collect();
    Ok(match candidates.len() {
        0 => FlagResolution::Unknown,
        1 if name.len() - 2 < MIN_ABBREVIATION_LEN => FlagResolution::Unknown,
        1 => FlagResolution::Canonical {
            flag: candidates.remove(0),
            inline_value,
        },
        _ => {
            candidates.sort();
            FlagResolution::Ambiguous { candidates }
        }
    })
}

/// Canonicalize, then check the denied set, then the allowed set. There is
/// no fall-through permit.
pub fn consume_long_option_token(token: &str, profile: &SafeBinProfile) -> FlagDecision {
    match resolve_canonical_long_flag(token, profile) {
        Ok(FlagResolution::Canonical { flag, .. }) => classify(&flag, profile),
        _ => FlagDecision::AnalysisFailure,
    }
}

fn classify(flag: &str, profile: &SafeBinProfile) -> FlagDecision {
    if profile.denied_long_flags.contains(flag) {
        FlagDecision::Denied
    } else if profile.allowed_long_flags.contains(flag) {
        FlagDecision::Permitted
    } else {
        FlagDecision::AnalysisFailure
    }
}

/// Checks a whole argv against the profile. Any denied token denies the
/// command; otherwise any unresolvable token fails analysis.
pub fn evaluate_safe_bin(cmd: &SimpleCommand, profile: &SafeBinProfile) -> Result<FlagDecision> {
    if basename(cmd.program()) != profile.binary {
        return Err(Error::Usage(format!(
            "profile for {} applied to {}",
            profile.binary,
            cmd.program()
        )));
    }
    let mut verdict = FlagDecision::Permitted;
    let mut args = cmd.args().iter();
    let mut options_done = false;
    while let Some(arg) = args.next() {
        let decision = if options_done || arg == "-" || !arg.starts_with('-') {
            check_positional(arg, profile.positional_policy)
        } else if arg == "--" {
            options_done = true;
            FlagDecision::Permitted
        } else if arg.starts_with("--") {
            long_token(arg, profile, &mut args)
        } else {
            short_cluster(&arg[1..], profile, &mut args)
        };
        verdict = verdict.min(decision);
    }
    Ok(verdict)
}

fn long_token<'a>(
    arg: &str,
    profile: &SafeBinProfile,
    rest: &mut impl Iterator<Item = &'a String>,
) -> FlagDecision {
    let Ok(FlagResolution::Canonical { flag, inline_value }) =
        resolve_canonical_long_flag(arg, profile)
    else {
        return FlagDecision::AnalysisFailure;
    };
    let decision = classify(&flag, profile);
    if decision != FlagDecision::Permitted {
        return decision;
    }
    let takes_value = profile.value_long_flags.contains(&flag);
    match (takes_value, inline_value) {
        (true, Some(_)) | (false, None) => FlagDecision::Permitted,
        (true, None) => {
            if rest.next().is_some() {
                FlagDecision::Permitted
            } else {
                FlagDecision::AnalysisFailure
            }
        }
        (false, Some(_)) => FlagDecision::AnalysisFailure,
    }
}

fn short_cluster<'a>(
    cluster: &str,
    profile: &SafeBinProfile,
    rest: &mut impl Iterator<Item = &'a String>,
) -> FlagDecision {
    for (i, c) in cluster.char_indices() {
        if !profile.allowed_short_flags.contains(&c) {
            return FlagDecision::AnalysisFailure;
        }
        if profile.value_short_flags.contains(&c) {
            let attached = &cluster[i + c.len_utf8()..];
            if attached.is_empty() && rest.next().is_none() {
                return FlagDecision::AnalysisFailure;
            }
            return FlagDecision::Permitted;
        }
    }
    FlagDecision::Permitted
}

fn check_positional(arg: &str, policy: PositionalPolicy) -> FlagDecision {
    match policy {
        PositionalPolicy::Any => FlagDecision::Permitted,
        PositionalPolicy::None => FlagDecision::AnalysisFailure,
        PositionalPolicy::FilesOnly => {
            if arg.is_empty() || arg.contains("://") || arg.contains('\0') {
                FlagDecision::AnalysisFailure
            } else {
                FlagDecision::Permitted
            }
        }
    }
}

fn set<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
    items.iter().cloned().collect()
}

fn strings(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Shipped profiles for `sort`, `grep`, `wc`, `head`, `tail` and `cat`.
///
/// Denied sets are best-effort: flags that run another program, write to
/// an arbitrary path, or read an operator-invisible list of inputs.
pub fn default_profiles() -> Vec<SafeBinProfile> {
    vec![
        SafeBinProfile {
            binary: "sort".into(),
            allowed_long_flags: strings(&[
                "--check",
                "--dictionary-order",
                "--field-separator",
                "--general-numeric-sort",
                "--human-numeric-sort",
                "--ignore-case",
                "--ignore-leading-blanks",
                "--key",
                "--month-sort",
                "--numeric-sort",
                "--reverse",
                "--stable",
                "--unique",
                "--version-sort",
                "--zero-terminated",
            ]),
            denied_long_flags: strings(&[
                "--compress-program",
                "--files0-from",
                "--output",
                "--random-source",
                "--temporary-directory",
            ]),
            allowed_short_flags: set(&['b', 'c', 'd', 'f', 'g', 'h', 'k', 'M', 'n', 'r', 's', 't', 'u', 'V', 'z']),
            value_short_flags: set(&['k', 't']),
            value_long_flags: strings(&["--field-separator", "--key"]),
            positional_policy: PositionalPolicy::FilesOnly,
        },
        SafeBinProfile {
            binary: "grep".into(),
            allowed_long_flags: strings(&[
                "--after-context",
                "--basic-regexp",
                "--before-context",
                "--context",
                "--count",
                "--extended-regexp",
                "--files-with-matches",
                "--files-without-match",
                "--fixed-strings",
                "--ignore-case",
                "--invert-match",
                "--line-number",
                "--line-regexp",
                "--max-count",
                "--no-filename",
                "--quiet",
                "--recursive",
                "--regexp",
                "--silent",
                "--with-filename",
                "--word-regexp",
            ]),
            denied_long_flags: strings(&["--exclude-from", "--file"]),
            allowed_short_flags: set(&[
                'A', 'B', 'C', 'E', 'F', 'G', 'H', 'L', 'c', 'e', 'h', 'i', 'l', 'm', 'n', 'q', 'r',
                's', 'v', 'w', 'x',
            ]),
            value_short_flags: set(&['A', 'B', 'C', 'e', 'm']),
            value_long_flags: strings(&[
                "--after-context",
                "--before-context",
                "--context",
                "--max-count",
                "--regexp",
            ]),
            positional_policy: PositionalPolicy::Any,
        },
        SafeBinProfile {
            binary: "wc".into(),
            allowed_long_flags: strings(&[
                "--bytes",
                "--chars",
                "--lines",
                "--max-line-length",
                "--words",
            ]),
            denied_long_flags: strings(&["--files0-from"]),
            allowed_short_flags: set(&['L', 'c', 'l', 'm', 'w']),
            value_short_flags: BTreeSet::new(),
            value_long_flags: BTreeSet::new(),
            positional_policy: PositionalPolicy::FilesOnly,
        },
        head_tail_profile("head", &[]),
        head_tail_profile("tail", &["--follow", "--retry"]),
        SafeBinProfile {
            binary: "cat".into(),
            allowed_long_flags: strings(&[
                "--number",
                "--number-nonblank",
                "--show-all",
                "--show-ends",
                "--show-nonprinting",
                "--show-tabs",
                "--squeeze-blank",
            ]),
            denied_long_flags: BTreeSet::new(),
            allowed_short_flags: set(&['A', 'E', 'T', 'b', 'e', 'n', 's', 't', 'u', 'v']),
            value_short_flags: BTreeSet::new(),
            value_long_flags: BTreeSet::new(),
            positional_policy: PositionalPolicy::FilesOnly,
        },
    ]
}

fn head_tail_profile(binary: &str, extra: &[&str]) -> SafeBinProfile {
    let mut allowed = strings(&["--bytes", "--lines", "--quiet", "--silent", "--verbose", "--zero-terminated"]);
    allowed.extend(strings(extra));
    let mut short = set(&['c', 'n', 'q', 'v', 'z']);
    if binary == "tail" {
        short.extend(['f', 'F']);
    }
    SafeBinProfile {
        binary: binary.into(),
        allowed_long_flags: allowed,
        denied_long_flags: BTreeSet::new(),
        allowed_short_flags: short,
        value_short_flags: set(&['c', 'n']),
        value_long_flags: strings(&["--bytes", "--lines"]),
        positional_policy: PositionalPolicy::FilesOnly,
    }
}
