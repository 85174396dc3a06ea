//! Lexical POSIX path helpers. Nothing here touches the filesystem.

/// Collapses duplicate separators, `.` segments and `..` segments.
///
/// Absolute paths never climb above `/`. Relative paths keep leading `..`
/// segments that cannot be resolved. Trailing separators are dropped.
pub fn normalize(path: &str) -> String {
    let absolute = path.starts_with('/');
    let mut stack: Vec<&str> = Vec::new();
    for segment in path.split('/') {
        match segment {
            "" | "." => {}
            ".." => match stack.last() {
                Some(&top) if top != ".." => {
                    stack.pop();
                }
                _ if absolute => {}
                _ => stack.push(".."),
            },
            other => stack.push(other),
        }
    }
    let joined = stack.join("/");
    match (absolute, joined.is_empty()) {
        (true, _) => format!("/{joined}"),
        (false, true) => ".".to_string(),
        (false, false) => joined,
    }
}

/// Final path segment, ignoring trailing separators.
pub fn basename(path: &str) -> &str {
    let trimmed = path.trim_end_matches('/');
    if trimmed.is_empty() {
        return if path.is_empty() { "" } else { "/" };
    }
    match trimmed.rfind('/') {
        Some(idx) => &trimmed[idx + 1..],
        None => trimmed,
    }
}

/// True when `path` equals `ancestor` or lies beneath it. Both inputs must
/// already be normalized absolute paths.
pub fn is_same_or_under(path: &str, ancestor: &str) -> bool {
    if ancestor == "/" {
        return path.starts_with('/');
    }
    path == ancestor
        || (path.len() > ancestor.len()
            && path.starts_with(ancestor)
            && path.as_bytes()[ancestor.len()] == b'/')
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_traversal() {
        assert_eq!(normalize("/etc/../home/u"), "/home/u");
        assert_eq!(normalize("//var///run/./docker.sock"), "/var/run/docker.sock");
        assert_eq!(normalize("/../../etc"), "/etc");
        assert_eq!(normalize("/"), "/");
        assert_eq!(normalize("/etc/"), "/etc");
        assert_eq!(normalize("a/../../b"), "../b");
        assert_eq!(normalize("./"), ".");
    }

    #[test]
    fn basenames() {
        assert_eq!(basename("/usr/bin/env"), "env");
        assert_eq!(basename("env"), "env");
        assert_eq!(basename("/bin/busybox/"), "busybox");
        assert_eq!(basename("/"), "/");
        assert_eq!(basename(""), "");
    }

    #[test]
    fn prefix_relation_respects_segments() {
        assert!(is_same_or_under("/etc", "/etc"));
        assert!(is_same_or_under("/etc/passwd", "/etc"));
        assert!(!is_same_or_under("/etcetera", "/etc"));
        assert!(is_same_or_under("/etc", "/"));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(p in "[/a-c.]{0,24}") {
            let once = normalize(&p);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
