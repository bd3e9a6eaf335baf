//! Node counts per normalized class against counts recorded from a reference
//! ECMAScript parser (see `fixtures/js/count_nodes.mjs`).

use std::collections::BTreeMap;
use std::path::Path;

use vsixscan::js::{parse, NodeClass};

#[test]
fn counts_match_reference_parser() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/js");
    let expected: BTreeMap<String, BTreeMap<String, usize>> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected_counts.json")).unwrap()).unwrap();
    assert_eq!(expected.len(), 30);
    let classes = [
        ("call", NodeClass::Call),
        ("member", NodeClass::MemberAccess),
        ("assignment", NodeClass::Assignment),
        ("string", NodeClass::StringLiteral),
        ("object", NodeClass::ObjectLiteral),
        ("import", NodeClass::ImportLike),
    ];
    let mut mismatches = Vec::new();
    for (file, want) in &expected {
        let src = std::fs::read_to_string(dir.join(file)).unwrap();
        let tree = parse(&src).unwrap_or_else(|e| panic!("{file}: {e}"));
        let got = tree.class_counts();
        for (key, class) in classes {
            let g = got.get(&class).copied().unwrap_or(0);
            if g != want[key] {
                mismatches.push(format!("{file} {key}: got {g}, reference {}", want[key]));
            }
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}
