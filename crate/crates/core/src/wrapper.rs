//! Effective-executable resolution through dispatch wrappers and shell
//! multiplexers.
//!
//! `env FOO=1 nice -n 5 sort f` runs `sort`, and `busybox sh -c '...'` runs
//! a shell, so neither `env` nor `busybox` may ever be the identity an
//! approval is keyed on.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::paths::basename;
use crate::shell::SimpleCommand;

pub const KNOWN_WRAPPERS: &[&str] = &["env", "nice", "nohup"];
pub const MULTIPLEXERS: &[&str] = &["busybox", "toybox"];
pub const DEFAULT_SHELL_APPLETS: &[&str] = &["sh", "ash", "bash", "hush"];

/// Upper bound on nested wrapper and `sh -c` levels before failing closed.
pub const MAX_UNWRAP_DEPTH: usize = 8;

pub const REASON_EMPTY_WRAPPER: &str = "wrapper with no command";
pub const REASON_NO_APPLET: &str = "multiplexer with no applet";
pub const REASON_NON_SHELL_APPLET: &str =
    "non-shell applet: fail closed, no allowlist entry is persisted";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WrapperResolution {
    NotWrapper,
    Blocked {
        reason: String,
    },
    Unwrapped {
        inner: SimpleCommand,
        /// Wrapper basenames, outermost first.
        wrapper_chain: Vec<String>,
    },
}

impl WrapperResolution {
    fn blocked(reason: impl Into<String>) -> Self {
        WrapperResolution::Blocked {
            reason: reason.into(),
        }
    }
}

pub fn is_multiplexer(program: &str) -> bool {
    MULTIPLEXERS.contains(&basename(program))
}

pub fn is_known_wrapper(program: &str) -> bool {
    KNOWN_WRAPPERS.contains(&basename(program))
}

pub fn default_shell_applets() -> BTreeSet<String> {
    DEFAULT_SHELL_APPLETS.iter().map(|s| s.to_string()).collect()
}

/// Strips `env`, `nice` and `nohup` layers, consuming only their minimal
/// documented options. Unrecognized wrapper options block.
pub fn unwrap_known_wrappers(cmd: &SimpleCommand) -> WrapperResolution {
    let mut chain = Vec::new();
    let mut current = cmd.clone();
    while is_known_wrapper(current.program()) {
        let name = basename(current.program()).to_string();
        let rest = &current.argv[1..];
        let consumed = match name.as_str() {
            "env" => consume_env_options(rest, &mut current.env_assignments),
            "nice" => consume_nice_options(rest),
            _ => consume_nohup_options(rest),
        };
        let consumed = match consumed {
            Ok(n) => n,
            Err(reason) => return WrapperResolution::blocked(reason),
        };
        if consumed == rest.len() {
            return WrapperResolution::blocked(REASON_EMPTY_WRAPPER);
        }
        current.argv = current.argv.split_off(1 + consumed);
        chain.push(name);
    }
    if chain.is_empty() {
        WrapperResolution::NotWrapper
    } else {
        WrapperResolution::Unwrapped {
            inner: current,
            wrapper_chain: chain,
        }
    }
}

fn consume_env_options(
    args: &[String],
    assignments: &mut Vec<(String, String)>,
) -> Result<usize, String> {
    let mut i = 0;
    let mut seen_assignment = false;
    while let Some(arg) = args.get(i) {
        if !seen_assignment && arg == "-i" {
            i += 1;
        } else if !seen_assignment && arg == "-u" {
            match args.get(i + 1) {
                Some(name) if !name.is_empty() && !name.contains('=') => i += 2,
                _ => return Err("env -u without a variable name".into()),
            }
        } else if arg.starts_with('-') {
            return Err(format!("unrecognized env option: {arg}"));
        } else if let Some((name, value)) = arg.split_once('=') {
            if name.is_empty() {
                return Err(format!("malformed env assignment: {arg}"));
            }
            assignments.push((name.to_string(), value.to_string()));
            seen_assignment = true;
            i += 1;
        } else {
            break;
        }
    }
    Ok(i)
}

fn consume_nice_options(args: &[String]) -> Result<usize, String> {
    match args.first().map(String::as_str) {
        Some("-n") => match args.get(1) {
            Some(n) if n.parse::<i32>().is_ok() => Ok(2),
            _ => Err("nice -n without a numeric adjustment".into()),
        },
        Some(arg) if arg.starts_with('-') => Err(format!("unrecognized nice option: {arg}")),
        _ => Ok(0),
    }
}

fn consume_nohup_options(args: &[String]) -> Result<usize, String> {
    match args.first() {
        Some(arg) if arg.starts_with('-') => Err(format!("unrecognized nohup option: {arg}")),
        _ => Ok(0),
    }
}

/// `busybox sh ...` unwraps to `sh ...`; any other applet blocks, because
/// the multiplexer path can never be a meaningful identity.
pub fn unwrap_shell_multiplexer(
    cmd: &SimpleCommand,
    shell_applets: &BTreeSet<String>,
) -> WrapperResolution {
    if !is_multiplexer(cmd.program()) {
        return WrapperResolution::NotWrapper;
    }
    let Some(applet) = cmd.argv.get(1) else {
        return WrapperResolution::blocked(REASON_NO_APPLET);
    };
    if !shell_applets.contains(applet.as_str()) {
        return WrapperResolution::blocked(REASON_NON_SHELL_APPLET);
    }
    let mut inner = cmd.clone();
    inner.argv.remove(0);
    WrapperResolution::Unwrapped {
        inner,
        wrapper_chain: vec![basename(cmd.program()).to_string()],
    }
}

/// Outcome of peeling every wrapper and multiplexer layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Invocation {
    Resolved {
        command: SimpleCommand,
        wrapper_chain: Vec<String>,
    },
    Blocked {
        reason: String,
    },
}

/// Alternates [`unwrap_known_wrappers`] and [`unwrap_shell_multiplexer`]
/// until neither applies.
pub fn resolve_invocation(cmd: &SimpleCommand, shell_applets: &BTreeSet<String>) -> Invocation {
    let mut command = cmd.clone();
    let mut wrapper_chain = Vec::new();
    for _ in 0..=MAX_UNWRAP_DEPTH {
        let mut progressed = false;
        for step in [
            unwrap_known_wrappers(&command),
            unwrap_shell_multiplexer(&command, shell_applets),
        ] {
            match step {
                WrapperResolution::NotWrapper => {}
                WrapperResolution::Blocked { reason } => return Invocation::Blocked { reason },
                WrapperResolution::Unwrapped {
                    inner,
                    wrapper_chain: layers,
                } => {
                    command = inner;
                    wrapper_chain.extend(layers);
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed {
            return Invocation::Resolved {
                command,
                wrapper_chain,
            };
        }
    }
    Invocation::Blocked {
        reason: format!("more than {MAX_UNWRAP_DEPTH} wrapper layers"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cmd(argv: &[&str]) -> SimpleCommand {
        SimpleCommand::from_argv(argv.iter().copied()).unwrap()
    }

    #[test]
    fn env_and_nice_unwrap_to_innermost() {
        match unwrap_known_wrappers(&cmd(&["env", "FOO=1", "nice", "-n", "5", "sort", "file"])) {
            WrapperResolution::Unwrapped {
                inner,
                wrapper_chain,
            } => {
                assert_eq!(inner.argv, vec!["sort", "file"]);
                assert_eq!(wrapper_chain, vec!["env", "nice"]);
                assert_eq!(inner.env_assignments, vec![("FOO".into(), "1".into())]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn not_wrappers() {
        assert_eq!(unwrap_known_wrappers(&cmd(&["sort", "file"])), WrapperResolution::NotWrapper);
        assert_eq!(
            unwrap_shell_multiplexer(&cmd(&["grep", "-r", "foo", "."]), &default_shell_applets()),
            WrapperResolution::NotWrapper
        );
    }

    #[test]
    fn empty_wrappers_block() {
        assert_eq!(
            unwrap_known_wrappers(&cmd(&["nohup"])),
            WrapperResolution::blocked(REASON_EMPTY_WRAPPER)
        );
        assert_eq!(
            unwrap_known_wrappers(&cmd(&["env", "A=1", "-i"])),
            WrapperResolution::blocked("unrecognized env option: -i")
        );
        assert_eq!(
            unwrap_known_wrappers(&cmd(&["env", "-i", "A=1"])),
            WrapperResolution::blocked(REASON_EMPTY_WRAPPER)
        );
    }

    #[test]
    fn unknown_wrapper_options_block() {
        for argv in [
            &["env", "-S", "sh -c id"][..],
            &["nice", "--adjustment=5", "ls"],
            &["nice", "-n", "x", "ls"],
            &["nohup", "--", "ls"],
            &["env", "-u"],
        ] {
            assert!(
                matches!(unwrap_known_wrappers(&cmd(argv)), WrapperResolution::Blocked { .. }),
                "{argv:?}"
            );
        }
    }

    #[test]
    fn absolute_wrapper_paths_unwrap_like_basenames() {
        let a = unwrap_known_wrappers(&cmd(&["/usr/bin/env", "ls"]));
        let b = unwrap_known_wrappers(&cmd(&["env", "ls"]));
        assert_eq!(a, b);
    }

    #[test]
    fn busybox_shell_applet_unwraps() {
        match unwrap_shell_multiplexer(&cmd(&["busybox", "sh", "-c", "whoami"]), &default_shell_applets())
        {
            WrapperResolution::Unwrapped {
                inner,
                wrapper_chain,
            } => {
                assert_eq!(inner.argv, vec!["sh", "-c", "whoami"]);
                assert_eq!(wrapper_chain, vec!["busybox"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn busybox_other_applets_block() {
        let applets = default_shell_applets();
        assert_eq!(
            unwrap_shell_multiplexer(&cmd(&["busybox", "ls"]), &applets),
            WrapperResolution::blocked(REASON_NON_SHELL_APPLET)
        );
        assert_eq!(
            unwrap_shell_multiplexer(&cmd(&["/bin/toybox"]), &applets),
            WrapperResolution::blocked(REASON_NO_APPLET)
        );
    }

    #[test]
    fn resolve_alternates_layers() {
        let applets = default_shell_applets();
        match resolve_invocation(&cmd(&["nohup", "busybox", "sh", "-c", "id"]), &applets) {
            Invocation::Resolved {
                command,
                wrapper_chain,
            } => {
                assert_eq!(command.argv, vec!["sh", "-c", "id"]);
                assert_eq!(wrapper_chain, vec!["nohup", "busybox"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            resolve_invocation(&cmd(&["env", "toybox", "cat", "x"]), &applets),
            Invocation::Blocked { .. }
        ));
    }

    #[test]
    fn deep_nesting_blocks() {
        let mut argv: Vec<&str> = std::iter::repeat("nohup").take(20).collect();
        argv.push("ls");
        // Known wrappers collapse in one step regardless of depth.
        assert!(matches!(
            resolve_invocation(&cmd(&argv), &default_shell_applets()),
            Invocation::Resolved { .. }
        ));
    }

    proptest! {
        #[test]
        fn unwrap_is_idempotent_and_terminates(
            argv in proptest::collection::vec(
                prop_oneof![
                    Just("env".to_string()), Just("nice".to_string()), Just("nohup".to_string()),
                    Just("-n".to_string()), Just("5".to_string()), Just("A=1".to_string()),
                    Just("sort".to_string()), Just("busybox".to_string()), Just("sh".to_string()),
                ],
                1..10,
            )
        ) {
            let command = SimpleCommand::from_argv(argv.clone()).unwrap();
            match unwrap_known_wrappers(&command) {
                WrapperResolution::Unwrapped { inner, wrapper_chain } => {
                    prop_assert!(!wrapper_chain.is_empty());
                    prop_assert!(inner.argv.len() < argv.len());
                    prop_assert_eq!(unwrap_known_wrappers(&inner), WrapperResolution::NotWrapper);
                }
                WrapperResolution::NotWrapper => prop_assert!(!is_known_wrapper(&argv[0])),
                WrapperResolution::Blocked { .. } => prop_assert!(is_known_wrapper(&argv[0])),
            }
        }
    }
}
