//! ECMAScript front end: tokenizer, parser and the normalized syntax tree.

mod lexer;
mod parser;
mod tree;

pub use lexer::{tokenize, LexError, TemplateTok, Tok, Token};
pub use parser::LineIndex;
pub use parser::{parse, require_target, unwrap_interop, ParseError, MAX_DEPTH};
pub use tree::*;

/// Decoded source text plus whether invalid UTF-8 had to be replaced.
pub struct DecodedSource {
    pub text: String,
    pub lossy: bool,
}

pub fn decode(bytes: &[u8]) -> DecodedSource {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(s) => DecodedSource { text: s.to_string(), lossy: false },
        Err(_) => DecodedSource { text: String::from_utf8_lossy(bytes).into_owned(), lossy: true },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(src: &str) -> std::collections::HashMap<NodeClass, usize> {
        parse(src).unwrap_or_else(|e| panic!("{e}: {src}")).class_counts()
    }

    fn ok(src: &str) {
        if let Err(e) = parse(src) {
            panic!("failed to parse: {e}\n{src}");
        }
    }

    #[test]
    fn statements_parse() {
        for src in [
            "",
            "'use strict';",
            "var a = 1, b; let c; const d = 2",
            "function f(a, b = 1, ...rest) { return a + b }",
            "async function g() { await h(); for await (const x of y) {} }",
            "class A extends B { static x = 1; #p; constructor() { super(); this.#p = 2 } get v() { return 1 } static { init() } }",
            "if (a) b(); else if (c) d(); else { e() }",
            "for (var i = 0; i < 10; i++) {} for (const k in o) ; for (;;) break;",
            "while (x) { continue } do x--; while (x > 0)",
            "try { a() } catch (e) { b(e) } finally { c() } try {} catch {}",
            "switch (x) { case 1: a(); break; default: b() }",
            "label: for (;;) { break label }",
            "import * as vscode from 'vscode'; import a, { b as c, d } from \"m\"; import 'side';",
            "export default function () {} export const x = 1; export { a as b }; export * from 'z';",
            "export { x } from 'y'; export default class {}",
            "const f = async (a, { b }, [c]) => { await a }; const g = x => x * 2; const h = () => ({});",
            "const o = { a, b: 1, [c]: 2, ...d, get e() { return 1 }, set e(v) {}, async *f() {}, 'g-h': 3, 4: 5 };",
            "let { a, b: { c }, ...rest } = obj; [x, , y = 3] = arr;",
            "a?.b?.[c]?.(d); new Foo; new Foo.Bar(1); new new X()(); new.target",
            "x = a ? b : c ? d : e; y = a ?? b || c && d; z = 2 ** 3 ** 2;",
            "tag`hello ${world} and ${`nested ${deep}`}`",
            "/re/g.test(s); a = b / c / d; if (/x/.test(y)) {}",
            "var x = function* () { yield 1; yield* other() }",
            "x = typeof a === 'undefined' || void 0; delete o.p; !function(){}();",
            "import('m').then(m => m.x); const meta = import.meta.url;",
            "a\n++b",
            "var let_ = 1; var of = 2; var async = 3; async = 4; get = set = static = 5",
            "#!/usr/bin/env node\nrequire('x')",
            "x = { if: 1, class: 2 }.class; y = a.default.new;",
            "(function(){ 'use strict'; })(); (() => 1)();",
            "for (const [k, v] of Object.entries(o)) {}",
            "a = b\n(c)",
            "var x = 1 <!-- html comment\n--> also comment\n",
        ] {
            ok(src);
        }
    }

    #[test]
    fn rejects_garbage() {
        for src in ["a b", "function (", "var = 1", "{ a: }", "x = ;", "if (a", "class { x y }", "`${a b}`", "return return"] {
            assert!(parse(src).is_err(), "{src}");
        }
    }

    #[test]
    fn folds_string_concatenation() {
        let t = parse("x = 'a' + 'b' + `c`;").unwrap();
        let strings: Vec<_> = t
            .nodes
            .iter()
            .filter_map(|n| match &n.kind {
                NodeKind::StringLiteral(s) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(strings, vec!["abc"]);
    }

    #[test]
    fn class_counts_simple() {
        let c = counts("const vscode = require('vscode'); vscode.window.showInformationMessage('hi', { modal: true });");
        assert_eq!(c[&NodeClass::Call], 2);
        assert_eq!(c[&NodeClass::MemberAccess], 2);
        assert_eq!(c[&NodeClass::Assignment], 1);
        assert_eq!(c[&NodeClass::StringLiteral], 2);
        assert_eq!(c[&NodeClass::ImportLike], 1);
        assert_eq!(c[&NodeClass::ObjectLiteral], 1);
    }

    #[test]
    fn require_bindings_recorded() {
        let t = parse("const vs = require('vscode'); const { window: w, env } = __importStar(require('vscode'));").unwrap();
        let imports: Vec<_> = t
            .nodes
            .iter()
            .filter_map(|n| match &n.kind {
                NodeKind::ImportLike { module, bindings } => Some((module.clone(), bindings.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(imports.len(), 2);
        assert_eq!(imports[0].1, vec![ImportBinding::Namespace("vs".into())]);
        assert_eq!(
            imports[1].1,
            vec![
                ImportBinding::Named { imported: "window".into(), local: "w".into() },
                ImportBinding::Named { imported: "env".into(), local: "env".into() },
            ]
        );
        assert!(t.bindings.contains_key(&(0, "w".to_string())));
    }

    #[test]
    fn scopes_and_hoisting() {
        let t = parse("function f(a) { b = a; var b; c = 1; } ").unwrap();
        assert_eq!(t.scopes.len(), 2);
        assert!(t.bindings.contains_key(&(1, "b".to_string())));
        assert!(t.bindings.contains_key(&(0, "c".to_string())));
        assert!(t.scopes[1].declared.contains(&"a".to_string()));
    }

    #[test]
    fn positions_are_one_based_characters() {
        let t = parse("x;\n  é = foo.bar").unwrap();
        let m = t.nodes.iter().find(|n| matches!(n.kind, NodeKind::MemberAccess { .. })).unwrap();
        assert_eq!((m.pos.line, m.pos.column), (2, 7));
    }

    #[test]
    fn depth_limit_is_an_error_not_a_crash() {
        let deep = format!("x = {}1{};", "(".repeat(5000), ")".repeat(5000));
        let err = parse(&deep).unwrap_err();
        assert!(err.message.contains("deep"));
        let arr = format!("x = {}{};", "[".repeat(5000), "]".repeat(5000));
        assert!(parse(&arr).is_err());
        let fns = "function a(){".repeat(3000);
        assert!(parse(&fns).is_err());
    }

    #[test]
    fn decode_flags_invalid_utf8() {
        assert!(!decode(b"\xEF\xBB\xBFok").lossy);
        assert_eq!(decode(b"\xEF\xBB\xBFok").text, "ok");
        assert!(decode(b"a\xff").lossy);
    }
}
