/// Normalizes an archive entry name to a root-relative `/`-separated path.
///
/// Backslashes count as separators, `.` and empty segments are dropped and
/// `..` pops a segment. Returns `None` when the name is absolute, carries a
/// drive prefix, or climbs above the archive root at any point.
pub fn normalize_entry_path(name: &str) -> Option<String> {
    let unified = name.replace('\\', "/");
    if unified.starts_with('/') {
        return None;
    }
    let mut parts: Vec<&str> = Vec::new();
    for (i, seg) in unified.split('/').enumerate() {
        if i == 0 && seg.len() >= 2 && seg.as_bytes()[1] == b':' && seg.as_bytes()[0].is_ascii_alphabetic() {
            return None;
        }
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop()?;
            }
            s => parts.push(s),
        }
    }
    Some(parts.join("/"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_paths() {
        assert_eq!(normalize_entry_path("extension/out/a.js").unwrap(), "extension/out/a.js");
        assert_eq!(normalize_entry_path("extension\\out\\a.js").unwrap(), "extension/out/a.js");
        assert_eq!(normalize_entry_path("./extension//x/./y").unwrap(), "extension/x/y");
        assert_eq!(normalize_entry_path("a/b/../c").unwrap(), "a/c");
    }

    #[test]
    fn escapes() {
        for bad in ["../x", "/etc/passwd", "a/../../x", "C:/Windows/x", "c:\\x", "..\\..\\x", "\\\\server\\share"] {
            assert_eq!(normalize_entry_path(bad), None, "{bad}");
        }
    }

    fn segment() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z]{1,6}".prop_map(String::from),
            Just(".".to_string()),
            Just("..".to_string()),
        ]
    }

    /// Independent depth walk: the path escapes iff the running depth ever
    /// goes negative.
    fn escapes_root(segs: &[String]) -> bool {
        let mut depth = 0i32;
        for s in segs {
            match s.as_str() {
                "." => {}
                ".." => {
                    depth -= 1;
                    if depth < 0 {
                        return true;
                    }
                }
                _ => depth += 1,
            }
        }
        false
    }

    proptest! {
        #[test]
        fn traversal_detected_exactly(segs in prop::collection::vec(segment(), 1..8), back in any::<bool>()) {
            let sep = if back { "\\" } else { "/" };
            let name = segs.join(sep);
            let out = normalize_entry_path(&name);
            prop_assert_eq!(out.is_none(), escapes_root(&segs));
            if let Some(p) = out {
                prop_assert!(!p.split('/').any(|s| s == ".." || s == "." || s.is_empty()) || p.is_empty());
            }
        }

        #[test]
        fn crafted_escapes_always_rejected(prefix in prop::collection::vec("[a-z]{1,4}", 0..4), extra in 1usize..4) {
            let mut segs: Vec<String> = prefix.clone();
            segs.extend(std::iter::repeat("..".to_string()).take(prefix.len() + extra));
            segs.push("evil.sh".into());
            prop_assert_eq!(normalize_entry_path(&segs.join("/")), None);
        }
    }
}
