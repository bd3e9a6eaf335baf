//! Recursive-descent ECMAScript parser producing a [`SyntaxTree`].
//!
//! The parser accepts the script and module grammars used by compiled
//! extension code (CommonJS output, ES modules, bundler output, minified
//! code). It keeps only the node classes the rule engine needs and records
//! lexical scopes and binding sources for alias resolution. Anything it
//! cannot place is a [`ParseError`]; callers fall back to token scanning.

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;

use super::lexer::{tokenize, Tok, Token};
use super::tree::*;

/// Deepest statement/expression nesting accepted before giving up.
pub const MAX_DEPTH: usize = 160;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

pub fn parse(src: &str) -> PResult<SyntaxTree> {
    let lines = LineIndex::new(src);
    let tokens = tokenize(src).map_err(|e| {
        let p = lines.pos(e.offset);
        ParseError { line: p.line, column: p.column, message: e.message.to_string() }
    })?;
    let mut p = Parser {
        toks: &tokens,
        i: 0,
        tree: SyntaxTree::default(),
        scope: 0,
        depth: 0,
        lines: &lines,
        pending: Vec::new(),
        require_imports: HashMap::new(),
        end_offset: src.len(),
    };
    p.tree.scopes.push(Scope::default());
    while !p.eof() {
        p.statement()?;
    }
    p.finish();
    Ok(p.tree)
}

/// Offset to line/column conversion with a forward cursor, so that
/// monotone queries on long single-line inputs stay linear.
pub struct LineIndex<'a> {
    src: &'a str,
    starts: Vec<usize>,
    cursor: Cell<(usize, u32)>,
}

impl<'a> LineIndex<'a> {
    pub fn new(src: &'a str) -> Self {
        let mut starts = vec![0];
        let b = src.as_bytes();
        let mut i = 0;
        while i < b.len() {
            match b[i] {
                b'\n' => starts.push(i + 1),
                b'\r' if b.get(i + 1) != Some(&b'\n') => starts.push(i + 1),
                0xe2 if b.get(i + 1) == Some(&0x80) && matches!(b.get(i + 2), Some(0xa8 | 0xa9)) => {
                    starts.push(i + 3);
                }
                _ => {}
            }
            i += 1;
        }
        Self { src, starts, cursor: Cell::new((0, 1)) }
    }

    pub fn pos(&self, offset: usize) -> Pos {
        let offset = offset.min(self.src.len());
        let line_idx = self.starts.partition_point(|s| *s <= offset) - 1;
        let line_start = self.starts[line_idx];
        let (c_off, c_col) = self.cursor.get();
        let column = if c_off >= line_start && c_off <= offset {
            c_col + self.src[c_off..offset].chars().count() as u32
        } else {
            1 + self.src[line_start..offset].chars().count() as u32
        };
        self.cursor.set((offset, column));
        Pos { line: line_idx as u32 + 1, column, offset }
    }

    pub fn line_count(&self) -> u32 {
        self.starts.len() as u32
    }

    pub fn line_text(&self, line: u32) -> &'a str {
        let idx = (line.max(1) - 1) as usize;
        let Some(&start) = self.starts.get(idx) else { return "" };
        let end = self.starts.get(idx + 1).copied().unwrap_or(self.src.len());
        self.src[start..end].trim_end_matches(['\n', '\r'])
    }
}

struct Pending {
    scope: ScopeId,
    name: String,
    source: BindingSource,
    declaration: bool,
}

struct Parser<'t> {
    toks: &'t [Token],
    i: usize,
    tree: SyntaxTree,
    scope: ScopeId,
    depth: usize,
    lines: &'t LineIndex<'t>,
    pending: Vec<Pending>,
    require_imports: HashMap<NodeId, NodeId>,
    end_offset: usize,
}

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=", ">>>=", "&=", "|=", "^=", "&&=", "||=", "??=",
];

const STATEMENT_KEYWORDS: &[&str] = &[
    "break", "case", "catch", "continue", "debugger", "default", "do", "else", "finally", "for", "if",
    "return", "switch", "throw", "try", "var", "const", "while", "with", "export",
];

/// Interop helpers emitted by compilers and bundlers around `require`.
const INTEROP_WRAPPERS: &[&str] = &[
    "__importStar",
    "__importDefault",
    "__toESM",
    "__toCommonJS",
    "_interopRequireDefault",
    "_interopRequireWildcard",
    "_interopDefault",
    "__importWildcard",
];

const REQUIRE_NAMES: &[&str] = &["require", "__require", "__non_webpack_require__"];

fn binary_prec(op: &str) -> Option<u8> {
    Some(match op {
        "??" => 1,
        "||" => 2,
        "&&" => 3,
        "|" => 4,
        "^" => 5,
        "&" => 6,
        "==" | "!=" | "===" | "!==" => 7,
        "<" | ">" | "<=" | ">=" | "instanceof" | "in" => 8,
        "<<" | ">>" | ">>>" => 9,
        "+" | "-" => 10,
        "*" | "/" | "%" => 11,
        "**" => 12,
        _ => return None,
    })
}

fn intern_word(w: &str) -> Option<&'static str> {
    match w {
        "in" => Some("in"),
        "instanceof" => Some("instanceof"),
        _ => None,
    }
}

impl<'t> Parser<'t> {
    // ----- token helpers -------------------------------------------------

    fn eof(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.i)
    }

    fn nth(&self, k: usize) -> Option<&'t Token> {
        self.toks.get(self.i + k)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    fn nth_punct(&self, k: usize, p: &str) -> bool {
        matches!(self.nth(k), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Word(x), .. }) if x == w)
    }

    fn nth_word(&self, k: usize, w: &str) -> bool {
        matches!(self.nth(k), Some(Token { tok: Tok::Word(x), .. }) if x == w)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.i);
        self.i += 1;
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn cur_offset(&self) -> usize {
        self.peek().map(|t| t.start).unwrap_or(self.end_offset)
    }

    fn cur_pos(&self) -> Pos {
        self.lines.pos(self.cur_offset())
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let p = self.cur_pos();
        Err(ParseError { line: p.line, column: p.column, message: message.into() })
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.at_word(w) {
            self.i += 1;
            Ok(())
        } else {
            self.error(format!("expected `{w}`, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek().map(|t| &t.tok) {
            None => "end of input".into(),
            Some(Tok::Word(w)) => format!("`{w}`"),
            Some(Tok::Punct(p)) => format!("`{p}`"),
            Some(Tok::Str(_)) => "string".into(),
            Some(Tok::Num(_)) => "number".into(),
            Some(Tok::Template(_)) => "template".into(),
            Some(Tok::Regex) => "regex".into(),
            Some(Tok::Private(p)) => format!("`#{p}`"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("nesting too deep");
        }
        Ok(())
    }

    /// Consumes an optional `;` and checks that the statement really ended.
    fn semi(&mut self) -> PResult<()> {
        if self.eat_punct(";") {
            return Ok(());
        }
        match self.peek() {
            None => Ok(()),
            Some(t) if t.nl_before => Ok(()),
            Some(Token { tok: Tok::Punct("}"), .. }) => Ok(()),
            _ => self.error(format!("unexpected {}", self.describe())),
        }
    }

    fn at_statement_end(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => t.nl_before || matches!(t.tok, Tok::Punct(";") | Tok::Punct("}")),
        }
    }

    // ----- tree helpers --------------------------------------------------

    fn add(&mut self, kind: NodeKind, pos: Pos) -> NodeId {
        self.tree.nodes.push(Node { kind, pos, scope: self.scope, binding: false });
        self.tree.nodes.len() - 1
    }

    fn pos_of(&self, id: NodeId) -> Pos {
        self.tree.nodes[id].pos
    }

    fn push_scope(&mut self) -> ScopeId {
        self.tree.scopes.push(Scope { parent: Some(self.scope), declared: Vec::new() });
        let id = self.tree.scopes.len() - 1;
        self.scope = id;
        id
    }

    fn declare(&mut self, scope: ScopeId, name: &str) {
        let s = &mut self.tree.scopes[scope];
        if !s.declared.iter().any(|d| d == name) {
            s.declared.push(name.to_string());
        }
    }

    /// Walks a binding pattern: marks identifiers as bindings, declares
    /// them when `declare_in` is set and records where their values come from.
    fn bind_pattern(&mut self, target: NodeId, source: Option<NodeId>, path: Vec<String>, declare_in: Option<ScopeId>) {
        match self.tree.nodes[target].kind.clone() {
            NodeKind::Identifier(name) => {
                self.tree.nodes[target].binding = true;
                if let Some(s) = declare_in {
                    self.declare(s, &name);
                }
                if let Some(src) = source {
                    self.note_require_binding(src, &name, &path);
                    let source = if path.is_empty() {
                        BindingSource::Expr(src)
                    } else {
                        BindingSource::Destructured { source: src, path }
                    };
                    self.pending.push(Pending {
                        scope: declare_in.unwrap_or(self.tree.nodes[target].scope),
                        name,
                        source,
                        declaration: declare_in.is_some(),
                    });
                }
            }
            NodeKind::ObjectLiteral { entries } => {
                for (key, value) in entries {
                    match key {
                        PropKey::Name(k) => {
                            let mut p = path.clone();
                            p.push(k);
                            self.bind_pattern(value, source, p, declare_in);
                        }
                        PropKey::Computed(_) | PropKey::Spread => self.bind_pattern(value, None, Vec::new(), declare_in),
                    }
                }
            }
            NodeKind::ArrayLiteral { elements } => {
                for e in elements {
                    self.bind_pattern(e, None, Vec::new(), declare_in);
                }
            }
            NodeKind::Assignment { target: inner, .. } => self.bind_pattern(inner, source, path, declare_in),
            NodeKind::Spread(inner) => self.bind_pattern(inner, None, Vec::new(), declare_in),
            _ => {}
        }
    }

    fn note_require_binding(&mut self, src: NodeId, local: &str, path: &[String]) {
        let call = unwrap_interop(&self.tree, src);
        if let Some(&imp) = self.require_imports.get(&call) {
            let binding = match path {
                [] => ImportBinding::Namespace(local.to_string()),
                [first, ..] => ImportBinding::Named { imported: first.clone(), local: local.to_string() },
            };
            if let NodeKind::ImportLike { bindings, .. } = &mut self.tree.nodes[imp].kind {
                bindings.push(binding);
            }
        }
    }

    fn finish(&mut self) {
        for p in std::mem::take(&mut self.pending) {
            let scope = if p.declaration {
                p.scope
            } else {
                self.tree.declaring_scope(p.scope, &p.name).unwrap_or(0)
            };
            self.tree.bindings.entry((scope, p.name)).or_default().push(p.source);
        }
    }

    // ----- statements ----------------------------------------------------

    fn statement(&mut self) -> PResult<()> {
        self.enter()?;
        let r = self.statement_inner();
        self.depth -= 1;
        r
    }

    fn block_body(&mut self) -> PResult<()> {
        loop {
            if self.eat_punct("}") {
                return Ok(());
            }
            if self.eof() {
                return self.error("unterminated block");
            }
            self.statement()?;
        }
    }

    fn paren_expression(&mut self) -> PResult<NodeId> {
        self.expect_punct("(")?;
        let e = self.expression(false)?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn starts_binding(&self, k: usize) -> bool {
        match self.nth(k).map(|t| &t.tok) {
            Some(Tok::Word(w)) => !matches!(w.as_str(), "in" | "instanceof" | "of"),
            Some(Tok::Punct("[")) | Some(Tok::Punct("{")) => true,
            _ => false,
        }
    }

    fn statement_inner(&mut self) -> PResult<()> {
        let Some(t) = self.peek() else { return Ok(()) };
        match &t.tok {
            Tok::Punct("{") => {
                self.bump();
                self.block_body()
            }
            Tok::Punct(";") => {
                self.bump();
                Ok(())
            }
            Tok::Word(w) => match w.as_str() {
                "var" | "const" => {
                    self.bump();
                    self.declarations(false)?;
                    self.semi()
                }
                "let" if self.starts_binding(1) => {
                    self.bump();
                    self.declarations(false)?;
                    self.semi()
                }
                "function" => {
                    self.function(true)?;
                    Ok(())
                }
                "async" if self.nth_word(1, "function") && !self.nth(1).is_some_and(|t| t.nl_before) => {
                    self.bump();
                    self.function(true)?;
                    Ok(())
                }
                "class" => {
                    self.class(true)?;
                    Ok(())
                }
                "if" => {
                    self.bump();
                    self.paren_expression()?;
                    self.statement()?;
                    if self.at_word("else") {
                        self.bump();
                        self.statement()?;
                    }
                    Ok(())
                }
                "for" => self.for_statement(),
                "while" | "with" => {
                    self.bump();
                    self.paren_expression()?;
                    self.statement()
                }
                "do" => {
                    self.bump();
                    self.statement()?;
                    self.expect_word("while")?;
                    self.paren_expression()?;
                    self.eat_punct(";");
                    Ok(())
                }
                "return" | "throw" => {
                    self.bump();
                    if !self.at_statement_end() {
                        self.expression(false)?;
                    }
                    self.semi()
                }
                "break" | "continue" => {
                    self.bump();
                    if matches!(self.peek(), Some(Token { tok: Tok::Word(_), nl_before: false, .. })) {
                        self.bump();
                    }
                    self.semi()
                }
                "debugger" => {
                    self.bump();
                    self.semi()
                }
                "try" => self.try_statement(),
                "switch" => self.switch_statement(),
                "import" if !self.nth_punct(1, "(") && !self.nth_punct(1, ".") => self.import_declaration(),
                "export" => self.export_declaration(),
                _ if self.nth_punct(1, ":") && !STATEMENT_KEYWORDS.contains(&w.as_str()) => {
                    self.bump();
                    self.bump();
                    self.statement()
                }
                _ => self.expression_statement(),
            },
            _ => self.expression_statement(),
        }
    }

    fn expression_statement(&mut self) -> PResult<()> {
        self.expression(false)?;
        self.semi()
    }

    fn declarations(&mut self, no_in: bool) -> PResult<()> {
        loop {
            let target = self.binding_target()?;
            if self.eat_punct("=") {
                let value = self.assignment(no_in)?;
                let pos = self.pos_of(target);
                self.add(NodeKind::Assignment { target, value, op: "=", declaration: true }, pos);
                self.bind_pattern(target, Some(value), Vec::new(), Some(self.scope));
            } else {
                self.bind_pattern(target, None, Vec::new(), Some(self.scope));
            }
            if !self.eat_punct(",") {
                return Ok(());
            }
        }
    }

    fn binding_target(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.bump();
                Ok(self.add(NodeKind::Identifier(w), pos))
            }
            Some(Tok::Punct("{")) => self.object_literal(),
            Some(Tok::Punct("[")) => self.array_literal(),
            _ => self.error(format!("expected binding, found {}", self.describe())),
        }
    }

    fn for_statement(&mut self) -> PResult<()> {
        self.bump();
        if self.at_word("await") {
            self.bump();
        }
        self.expect_punct("(")?;
        if !self.at_punct(";") {
            if self.at_word("var") || self.at_word("const") || (self.at_word("let") && self.starts_binding(1)) {
                self.bump();
                self.declarations(true)?;
            } else {
                self.expression(true)?;
            }
        }
        if self.at_word("of") || self.at_word("in") {
            self.bump();
            self.expression(false)?;
            self.expect_punct(")")?;
        } else {
            self.expect_punct(";")?;
            if !self.at_punct(";") {
                self.expression(false)?;
            }
            self.expect_punct(";")?;
            if !self.at_punct(")") {
                self.expression(false)?;
            }
            self.expect_punct(")")?;
        }
        self.statement()
    }

    fn try_statement(&mut self) -> PResult<()> {
        self.bump();
        self.expect_punct("{")?;
        self.block_body()?;
        if self.at_word("catch") {
            self.bump();
            let outer = self.scope;
            let scope = self.push_scope();
            if self.eat_punct("(") {
                let param = self.binding_target()?;
                self.bind_pattern(param, None, Vec::new(), Some(scope));
                self.expect_punct(")")?;
            }
            self.expect_punct("{")?;
            let r = self.block_body();
            self.scope = outer;
            r?;
        }
        if self.at_word("finally") {
            self.bump();
            self.expect_punct("{")?;
            self.block_body()?;
        }
        Ok(())
    }

    fn switch_statement(&mut self) -> PResult<()> {
        self.bump();
        self.paren_expression()?;
        self.expect_punct("{")?;
        loop {
            if self.eat_punct("}") {
                return Ok(());
            }
            if self.at_word("case") {
                self.bump();
                self.expression(false)?;
                self.expect_punct(":")?;
            } else if self.at_word("default") && self.nth_punct(1, ":") {
                self.bump();
                self.bump();
            } else if self.eof() {
                return self.error("unterminated switch");
            } else {
                self.statement()?;
            }
        }
    }

    fn module_specifier(&mut self) -> PResult<String> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error("expected module specifier"),
        }
    }

    fn import_attributes(&mut self) -> PResult<()> {
        if (self.at_word("with") || self.at_word("assert")) && self.nth_punct(1, "{") {
            self.bump();
            self.object_literal()?;
        }
        Ok(())
    }

    fn module_export_name(&mut self) -> PResult<String> {
        match self.bump().map(|t| &t.tok) {
            Some(Tok::Word(w)) => Ok(w.clone()),
            Some(Tok::Str(s)) => Ok(s.clone()),
            _ => {
                self.i -= 1;
                self.error("expected import name")
            }
        }
    }

    fn import_declaration(&mut self) -> PResult<()> {
        let pos = self.cur_pos();
        self.bump();
        if let Some(Tok::Str(_)) = self.peek().map(|t| &t.tok) {
            let module = self.module_specifier()?;
            self.import_attributes()?;
            self.add(NodeKind::ImportLike { module, bindings: Vec::new() }, pos);
            return self.semi();
        }
        let mut bindings = Vec::new();
        if let Some(Tok::Word(w)) = self.peek().map(|t| &t.tok) {
            if w != "from" || self.nth_word(1, "from") {
                bindings.push(ImportBinding::Namespace(w.clone()));
                self.bump();
                self.eat_punct(",");
            }
        }
        if self.eat_punct("*") {
            self.expect_word("as")?;
            let local = self.module_export_name()?;
            bindings.push(ImportBinding::Namespace(local));
        } else if self.eat_punct("{") {
            while !self.eat_punct("}") {
                let imported = self.module_export_name()?;
                let local = if self.at_word("as") {
                    self.bump();
                    self.module_export_name()?
                } else {
                    imported.clone()
                };
                bindings.push(ImportBinding::Named { imported, local });
                if !self.eat_punct(",") {
                    self.expect_punct("}")?;
                    break;
                }
            }
        }
        self.expect_word("from")?;
        let module = self.module_specifier()?;
        self.import_attributes()?;
        for b in &bindings {
            let (local, path) = match b {
                ImportBinding::Namespace(l) => (l.clone(), Vec::new()),
                ImportBinding::Named { imported, local } => (local.clone(), vec![imported.clone()]),
            };
            self.declare(self.scope, &local);
            self.pending.push(Pending {
                scope: self.scope,
                name: local,
                source: BindingSource::Import { module: module.clone(), path },
                declaration: true,
            });
        }
        self.add(NodeKind::ImportLike { module, bindings }, pos);
        self.semi()
    }

    fn export_declaration(&mut self) -> PResult<()> {
        let pos = self.cur_pos();
        self.bump();
        if self.at_word("default") {
            self.bump();
            if self.at_word("function") || self.at_word("class") || (self.at_word("async") && self.nth_word(1, "function")) {
                if self.at_word("async") {
                    self.bump();
                }
                if self.at_word("class") {
                    self.class(true)?;
                } else {
                    self.function(true)?;
                }
                return Ok(());
            }
            self.assignment(false)?;
            return self.semi();
        }
        if self.eat_punct("*") {
            if self.at_word("as") {
                self.bump();
                self.module_export_name()?;
            }
            self.expect_word("from")?;
            let module = self.module_specifier()?;
            self.import_attributes()?;
            self.add(NodeKind::ImportLike { module, bindings: Vec::new() }, pos);
            return self.semi();
        }
        if self.eat_punct("{") {
            while !self.eat_punct("}") {
                self.module_export_name()?;
                if self.at_word("as") {
                    self.bump();
                    self.module_export_name()?;
                }
                if !self.eat_punct(",") {
                    self.expect_punct("}")?;
                    break;
                }
            }
            if self.at_word("from") {
                self.bump();
                let module = self.module_specifier()?;
                self.import_attributes()?;
                self.add(NodeKind::ImportLike { module, bindings: Vec::new() }, pos);
            }
            return self.semi();
        }
        self.statement()
    }

    // ----- functions and classes ----------------------------------------

    /// `function [*] [name] (params) { body }`, positioned at `function`.
    fn function(&mut self, declaration: bool) -> PResult<NodeId> {
        let pos = self.cur_pos();
        self.expect_word("function")?;
        self.eat_punct("*");
        let name = match self.peek().map(|t| &t.tok) {
            Some(Tok::Word(w)) if !self.nth_punct(0, "(") => {
                let w = w.clone();
                let npos = self.cur_pos();
                self.bump();
                Some((w, npos))
            }
            _ => None,
        };
        if declaration {
            if let Some((n, npos)) = &name {
                let id = self.add(NodeKind::Identifier(n.clone()), *npos);
                self.tree.nodes[id].binding = true;
                self.declare(self.scope, n);
            }
        }
        let outer = self.scope;
        let scope = self.push_scope();
        if !declaration {
            if let Some((n, npos)) = &name {
                let id = self.add(NodeKind::Identifier(n.clone()), *npos);
                self.tree.nodes[id].binding = true;
                self.declare(scope, n);
            }
        }
        let r = self.function_rest(scope);
        self.scope = outer;
        let params = r?;
        Ok(self.add(NodeKind::Function { params, scope }, pos))
    }

    /// Parameter list and body, inside an already-pushed scope.
    fn function_rest(&mut self, scope: ScopeId) -> PResult<Vec<NodeId>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.eat_punct(")") {
            let p = self.assignment(false)?;
            params.push(p);
            if !self.eat_punct(",") {
                self.expect_punct(")")?;
                break;
            }
        }
        for &p in &params {
            self.bind_pattern(p, None, Vec::new(), Some(scope));
        }
        self.expect_punct("{")?;
        self.block_body()?;
        Ok(params)
    }

    fn class(&mut self, declaration: bool) -> PResult<NodeId> {
        let pos = self.cur_pos();
        self.expect_word("class")?;
        if let Some(Tok::Word(w)) = self.peek().map(|t| &t.tok) {
            if w != "extends" {
                let w = w.clone();
                let npos = self.cur_pos();
                self.bump();
                let id = self.add(NodeKind::Identifier(w.clone()), npos);
                self.tree.nodes[id].binding = true;
                if declaration {
                    self.declare(self.scope, &w);
                }
            }
        }
        if self.at_word("extends") {
            self.bump();
            self.unary()?;
        }
        self.expect_punct("{")?;
        loop {
            if self.eat_punct("}") {
                break;
            }
            if self.eat_punct(";") {
                continue;
            }
            if self.eof() {
                return self.error("unterminated class body");
            }
            self.class_member()?;
        }
        Ok(self.add(NodeKind::Class, pos))
    }

    fn is_modifier_here(&self) -> bool {
        let Some(Tok::Word(w)) = self.peek().map(|t| &t.tok) else { return false };
        if !matches!(w.as_str(), "static" | "async" | "get" | "set" | "accessor") {
            return false;
        }
        match self.nth(1) {
            Some(Token { tok: Tok::Punct(p), .. }) => matches!(*p, "[" | "*" | "{") && !(w != "static" && *p == "{"),
            Some(Token { nl_before: true, .. }) if w == "async" => false,
            Some(_) => true,
            None => false,
        }
    }

    fn class_member(&mut self) -> PResult<()> {
        while self.is_modifier_here() {
            if self.at_word("static") && self.nth_punct(1, "{") {
                self.bump();
                self.bump();
                let outer = self.scope;
                self.push_scope();
                let r = self.block_body();
                self.scope = outer;
                return r;
            }
            self.bump();
        }
        self.eat_punct("*");
        self.property_key()?;
        if self.at_punct("(") {
            let pos = self.cur_pos();
            let outer = self.scope;
            let scope = self.push_scope();
            let r = self.function_rest(scope);
            self.scope = outer;
            let params = r?;
            self.add(NodeKind::Function { params, scope }, pos);
            self.eat_punct(";");
            return Ok(());
        }
        if self.eat_punct("=") {
            let outer = self.scope;
            self.push_scope();
            let r = self.assignment(false);
            self.scope = outer;
            r?;
        }
        self.semi()
    }

    /// Object or class property key; returns the static name when known.
    fn property_key(&mut self) -> PResult<PropKey> {
        let Some(t) = self.bump() else { return self.error("expected property key") };
        Ok(match &t.tok {
            Tok::Word(w) => PropKey::Name(w.clone()),
            Tok::Private(w) => PropKey::Name(format!("#{w}")),
            Tok::Str(s) => PropKey::Name(s.clone()),
            Tok::Num(n) => PropKey::Name(format_number(*n)),
            Tok::Punct("[") => {
                let e = self.assignment(false)?;
                self.expect_punct("]")?;
                match self.tree.string_value(e) {
                    Some(s) => PropKey::Name(s.to_string()),
                    None => PropKey::Computed(e),
                }
            }
            _ => {
                self.i -= 1;
                return self.error(format!("expected property key, found {}", self.describe()));
            }
        })
    }

    // ----- expressions ---------------------------------------------------

    fn expression(&mut self, no_in: bool) -> PResult<NodeId> {
        let first = self.assignment(no_in)?;
        if !self.at_punct(",") {
            return Ok(first);
        }
        let pos = self.pos_of(first);
        let mut items = vec![first];
        while self.eat_punct(",") {
            // Trailing comma in an arrow parameter list.
            if self.at_punct(")") {
                break;
            }
            items.push(self.assignment(no_in)?);
        }
        Ok(self.add(NodeKind::Sequence(items), pos))
    }

    fn can_start_expression(t: Option<&Token>) -> bool {
        match t.map(|t| &t.tok) {
            None => false,
            Some(Tok::Punct(p)) => matches!(*p, "(" | "[" | "{" | "!" | "~" | "+" | "-" | "++" | "--" | "..."),
            Some(Tok::Word(w)) => !matches!(w.as_str(), "in" | "of" | "instanceof"),
            Some(_) => true,
        }
    }

    fn assignment(&mut self, no_in: bool) -> PResult<NodeId> {
        self.enter()?;
        let r = self.assignment_inner(no_in);
        self.depth -= 1;
        r
    }

    fn assignment_inner(&mut self, no_in: bool) -> PResult<NodeId> {
        let pos = self.cur_pos();
        if self.eat_punct("...") {
            let arg = self.assignment(no_in)?;
            return Ok(self.add(NodeKind::Spread(arg), pos));
        }
        if self.at_word("yield") && Self::can_start_expression(self.nth(1)) && !self.nth(1).is_some_and(|t| t.nl_before) {
            self.bump();
            self.eat_punct("*");
            let arg = self.assignment(no_in)?;
            return Ok(self.add(NodeKind::Unary { op: "yield", arg }, pos));
        }
        // `async x => ...`
        if self.at_word("async")
            && matches!(self.nth(1), Some(Token { tok: Tok::Word(_), nl_before: false, .. }))
            && self.nth_punct(2, "=>")
        {
            self.bump();
        }
        let lhs = self.conditional(no_in)?;
        if let Some(Token { tok: Tok::Punct("=>"), nl_before: false, .. }) = self.peek() {
            self.bump();
            return self.arrow(lhs, no_in);
        }
        if let Some(Token { tok: Tok::Punct(op), .. }) = self.peek() {
            if let Some(op) = ASSIGN_OPS.iter().find(|o| **o == *op) {
                self.bump();
                let value = self.assignment(no_in)?;
                if *op == "=" {
                    self.bind_pattern(lhs, Some(value), Vec::new(), None);
                } else if let NodeKind::Identifier(_) = self.tree.nodes[lhs].kind {
                    self.tree.nodes[lhs].binding = true;
                }
                let pos = self.pos_of(lhs);
                return Ok(self.add(NodeKind::Assignment { target: lhs, value, op, declaration: false }, pos));
            }
        }
        Ok(lhs)
    }

    fn arrow(&mut self, params_node: NodeId, no_in: bool) -> PResult<NodeId> {
        let pos = self.pos_of(params_node);
        let params = match &self.tree.nodes[params_node].kind {
            NodeKind::Empty => Vec::new(),
            NodeKind::Sequence(items) => items.clone(),
            NodeKind::Call { callee, args, is_new: false }
                if matches!(&self.tree.nodes[*callee].kind, NodeKind::Identifier(n) if n == "async") =>
            {
                // `async (a, b) =>` was read as a call to `async`.
                let (callee, args) = (*callee, args.clone());
                self.tree.nodes[callee].kind = NodeKind::Empty;
                self.tree.nodes[params_node].kind = NodeKind::Empty;
                args
            }
            _ => vec![params_node],
        };
        let outer = self.scope;
        let scope = self.push_scope();
        for &p in &params {
            self.bind_pattern(p, None, Vec::new(), Some(scope));
        }
        let r = if self.eat_punct("{") {
            self.block_body()
        } else {
            self.assignment(no_in).map(|_| ())
        };
        self.scope = outer;
        r?;
        Ok(self.add(NodeKind::Function { params, scope }, pos))
    }

    fn conditional(&mut self, no_in: bool) -> PResult<NodeId> {
        let test = self.binary(1, no_in)?;
        if !self.eat_punct("?") {
            return Ok(test);
        }
        let then = self.assignment(false)?;
        self.expect_punct(":")?;
        let otherwise = self.assignment(no_in)?;
        let pos = self.pos_of(test);
        Ok(self.add(NodeKind::Conditional { test, then, otherwise }, pos))
    }

    fn current_binary_op(&self, no_in: bool) -> Option<(&'static str, u8)> {
        let op: &'static str = match self.peek().map(|t| &t.tok) {
            Some(Tok::Punct(p)) => p,
            Some(Tok::Word(w)) => intern_word(w)?,
            _ => return None,
        };
        if no_in && op == "in" {
            return None;
        }
        binary_prec(op).map(|p| (op, p))
    }

    fn binary(&mut self, min_prec: u8, no_in: bool) -> PResult<NodeId> {
        let mut left = self.unary()?;
        while let Some((op, prec)) = self.current_binary_op(no_in) {
            if prec < min_prec {
                break;
            }
            self.bump();
            self.enter()?;
            let right = if op == "**" { self.binary(prec, no_in) } else { self.binary(prec + 1, no_in) };
            self.depth -= 1;
            let right = right?;
            left = self.make_binary(op, left, right);
        }
        Ok(left)
    }

    fn make_binary(&mut self, op: &'static str, left: NodeId, right: NodeId) -> NodeId {
        let pos = self.pos_of(left);
        if op == "+" {
            if let (Some(a), Some(b)) = (self.tree.string_value(left), self.tree.string_value(right)) {
                let folded = format!("{a}{b}");
                // Folded operands are the last nodes allocated; reuse the slots.
                if right + 1 == self.tree.nodes.len() && matches!(self.tree.nodes[right].kind, NodeKind::StringLiteral(_)) {
                    self.tree.nodes.pop();
                    if left + 1 == self.tree.nodes.len() && matches!(self.tree.nodes[left].kind, NodeKind::StringLiteral(_)) {
                        self.tree.nodes[left].kind = NodeKind::StringLiteral(folded);
                        return left;
                    }
                }
                return self.add(NodeKind::StringLiteral(folded), pos);
            }
        }
        self.add(NodeKind::Binary { op, left, right }, pos)
    }

    fn unary(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        let op: Option<&'static str> = match self.peek().map(|t| &t.tok) {
            Some(Tok::Punct(p)) if matches!(*p, "!" | "~" | "+" | "-" | "++" | "--") => Some(p),
            Some(Tok::Word(w)) => match w.as_str() {
                "typeof" => Some("typeof"),
                "void" => Some("void"),
                "delete" => Some("delete"),
                "await" if Self::can_start_expression(self.nth(1)) && !self.nth_punct(1, "(") || self.nth_punct(1, "(") && !self.nth(1).is_some_and(|t| t.nl_before) => {
                    Some("await")
                }
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            self.enter()?;
            let arg = self.unary();
            self.depth -= 1;
            let arg = arg?;
            return Ok(self.add(NodeKind::Unary { op, arg }, pos));
        }
        let e = self.call_member()?;
        if let Some(Token { tok: Tok::Punct(p @ ("++" | "--")), nl_before: false, .. }) = self.peek() {
            self.bump();
            let epos = self.pos_of(e);
            return Ok(self.add(NodeKind::Unary { op: p, arg: e }, epos));
        }
        Ok(e)
    }

    fn arguments(&mut self) -> PResult<Vec<NodeId>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.eat_punct(")") {
            args.push(self.assignment(false)?);
            if !self.eat_punct(",") {
                self.expect_punct(")")?;
                break;
            }
        }
        Ok(args)
    }

    fn member_name(&mut self) -> PResult<String> {
        match self.bump().map(|t| &t.tok) {
            Some(Tok::Word(w)) => Ok(w.clone()),
            Some(Tok::Private(w)) => Ok(format!("#{w}")),
            _ => {
                self.i -= 1;
                self.error(format!("expected property name, found {}", self.describe()))
            }
        }
    }

    fn call_member(&mut self) -> PResult<NodeId> {
        let mut e = if self.at_word("new") { self.new_expression()? } else { self.primary()? };
        loop {
            let pos = self.pos_of(e);
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Punct(".")) => {
                    self.bump();
                    let name = self.member_name()?;
                    e = self.add(NodeKind::MemberAccess { object: e, property: Property::Name(name), optional: false }, pos);
                }
                Some(Tok::Punct("?.")) => {
                    self.bump();
                    if self.at_punct("(") {
                        let args = self.arguments()?;
                        e = self.make_call(e, args, false, pos);
                    } else if self.eat_punct("[") {
                        let idx = self.expression(false)?;
                        self.expect_punct("]")?;
                        e = self.add(NodeKind::MemberAccess { object: e, property: Property::Computed(idx), optional: true }, pos);
                    } else {
                        let name = self.member_name()?;
                        e = self.add(NodeKind::MemberAccess { object: e, property: Property::Name(name), optional: true }, pos);
                    }
                }
                Some(Tok::Punct("[")) => {
                    self.bump();
                    let idx = self.expression(false)?;
                    self.expect_punct("]")?;
                    e = self.add(NodeKind::MemberAccess { object: e, property: Property::Computed(idx), optional: false }, pos);
                }
                Some(Tok::Punct("(")) => {
                    let args = self.arguments()?;
                    e = self.make_call(e, args, false, pos);
                }
                Some(Tok::Template(_)) => {
                    let tpl = self.primary()?;
                    e = self.make_call(e, vec![tpl], false, pos);
                }
                _ => return Ok(e),
            }
        }
    }

    fn new_expression(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        self.bump();
        if self.eat_punct(".") {
            self.member_name()?;
            return Ok(self.add(NodeKind::Empty, pos));
        }
        self.enter()?;
        let callee = if self.at_word("new") { self.new_expression() } else { self.primary() };
        self.depth -= 1;
        let mut callee = callee?;
        loop {
            let cpos = self.pos_of(callee);
            if self.eat_punct(".") {
                let name = self.member_name()?;
                callee = self.add(NodeKind::MemberAccess { object: callee, property: Property::Name(name), optional: false }, cpos);
            } else if self.eat_punct("[") {
                let idx = self.expression(false)?;
                self.expect_punct("]")?;
                callee = self.add(NodeKind::MemberAccess { object: callee, property: Property::Computed(idx), optional: false }, cpos);
            } else {
                break;
            }
        }
        let args = if self.at_punct("(") { self.arguments()? } else { Vec::new() };
        Ok(self.make_call(callee, args, true, pos))
    }

    fn make_call(&mut self, callee: NodeId, args: Vec<NodeId>, is_new: bool, pos: Pos) -> NodeId {
        let require_module = match (&self.tree.nodes[callee].kind, args.as_slice()) {
            (NodeKind::Identifier(n), [arg]) if !is_new && REQUIRE_NAMES.contains(&n.as_str()) => {
                self.tree.string_value(*arg).map(str::to_string)
            }
            _ => None,
        };
        let call = self.add(NodeKind::Call { callee, args, is_new }, pos);
        if let Some(module) = require_module {
            let imp = self.add(NodeKind::ImportLike { module, bindings: Vec::new() }, pos);
            self.require_imports.insert(call, imp);
        }
        call
    }

    fn primary(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        let Some(t) = self.peek() else { return self.error("unexpected end of input") };
        match &t.tok {
            Tok::Word(w) => match w.as_str() {
                "function" => self.function(false),
                "async" if self.nth_word(1, "function") && !self.nth(1).is_some_and(|t| t.nl_before) => {
                    self.bump();
                    self.function(false)
                }
                "class" => self.class(false),
                "this" => {
                    self.bump();
                    Ok(self.add(NodeKind::This, pos))
                }
                "null" => {
                    self.bump();
                    Ok(self.add(NodeKind::Null, pos))
                }
                "true" | "false" => {
                    let b = w == "true";
                    self.bump();
                    Ok(self.add(NodeKind::Bool(b), pos))
                }
                "new" => self.new_expression(),
                "import" => {
                    self.bump();
                    if self.eat_punct(".") {
                        self.member_name()?;
                        return Ok(self.add(NodeKind::Empty, pos));
                    }
                    let callee = self.add(NodeKind::Identifier("import".into()), pos);
                    let args = self.arguments()?;
                    let module = args.first().and_then(|a| self.tree.string_value(*a)).map(str::to_string);
                    let call = self.add(NodeKind::Call { callee, args, is_new: false }, pos);
                    if let Some(module) = module {
                        let imp = self.add(NodeKind::ImportLike { module, bindings: Vec::new() }, pos);
                        self.require_imports.insert(call, imp);
                    }
                    Ok(call)
                }
                kw if STATEMENT_KEYWORDS.contains(&kw) && kw != "default" => {
                    self.error(format!("unexpected keyword `{kw}`"))
                }
                _ => {
                    let w = w.clone();
                    self.bump();
                    Ok(self.add(NodeKind::Identifier(w), pos))
                }
            },
            Tok::Private(w) => {
                let w = format!("#{w}");
                self.bump();
                Ok(self.add(NodeKind::Identifier(w), pos))
            }
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(self.add(NodeKind::StringLiteral(s), pos))
            }
            Tok::Num(n) => {
                let n = *n;
                self.bump();
                Ok(self.add(NodeKind::Number(n), pos))
            }
            Tok::Regex => {
                self.bump();
                Ok(self.add(NodeKind::Regex, pos))
            }
            Tok::Template(tpl) => {
                self.bump();
                if tpl.exprs.is_empty() {
                    let s = tpl.quasis.first().cloned().unwrap_or_default();
                    return Ok(self.add(NodeKind::StringLiteral(s), pos));
                }
                let mut exprs = Vec::with_capacity(tpl.exprs.len());
                for sub in &tpl.exprs {
                    exprs.push(self.sub_expression(sub)?);
                }
                Ok(self.add(NodeKind::Template { quasis: tpl.quasis.clone(), exprs }, pos))
            }
            Tok::Punct("(") => {
                if self.nth_punct(1, ")") {
                    self.bump();
                    self.bump();
                    return Ok(self.add(NodeKind::Empty, pos));
                }
                self.bump();
                let e = self.expression(false)?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => self.array_literal(),
            Tok::Punct("{") => self.object_literal(),
            _ => self.error(format!("unexpected {}", self.describe())),
        }
    }

    /// Parses a template substitution from its own token stream.
    fn sub_expression(&mut self, toks: &'t [Token]) -> PResult<NodeId> {
        let saved = (self.toks, self.i);
        self.toks = toks;
        self.i = 0;
        let r = self.expression(false);
        let leftover = !self.eof();
        let err = if leftover { Some(self.error::<()>("unexpected token in template substitution")) } else { None };
        (self.toks, self.i) = saved;
        if let Some(Err(e)) = err {
            return Err(e);
        }
        r
    }

    fn array_literal(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        self.expect_punct("[")?;
        let mut elements = Vec::new();
        loop {
            if self.eat_punct("]") {
                break;
            }
            if self.eat_punct(",") {
                continue;
            }
            elements.push(self.assignment(false)?);
            if !self.eat_punct(",") {
                self.expect_punct("]")?;
                break;
            }
        }
        Ok(self.add(NodeKind::ArrayLiteral { elements }, pos))
    }

    fn object_literal(&mut self) -> PResult<NodeId> {
        let pos = self.cur_pos();
        self.expect_punct("{")?;
        let mut entries = Vec::new();
        loop {
            if self.eat_punct("}") {
                break;
            }
            if self.eof() {
                return self.error("unterminated object literal");
            }
            let epos = self.cur_pos();
            if self.eat_punct("...") {
                let arg = self.assignment(false)?;
                let s = self.add(NodeKind::Spread(arg), epos);
                entries.push((PropKey::Spread, s));
            } else {
                let mut method = false;
                while self.is_object_modifier() {
                    self.bump();
                    method = true;
                }
                if self.eat_punct("*") {
                    method = true;
                }
                let key = self.property_key()?;
                let value = if self.at_punct("(") {
                    let fpos = self.cur_pos();
                    let outer = self.scope;
                    let scope = self.push_scope();
                    let r = self.function_rest(scope);
                    self.scope = outer;
                    let params = r?;
                    self.add(NodeKind::Function { params, scope }, fpos)
                } else if method {
                    return self.error("expected method parameters");
                } else if self.eat_punct(":") {
                    self.assignment(false)?
                } else if let PropKey::Name(name) = &key {
                    let id = self.add(NodeKind::Identifier(name.clone()), epos);
                    if self.eat_punct("=") {
                        let default = self.assignment(false)?;
                        self.add(NodeKind::Assignment { target: id, value: default, op: "=", declaration: false }, epos)
                    } else {
                        id
                    }
                } else {
                    return self.error("expected `:` after computed key");
                };
                entries.push((key, value));
            }
            if !self.eat_punct(",") {
                self.expect_punct("}")?;
                break;
            }
        }
        Ok(self.add(NodeKind::ObjectLiteral { entries }, pos))
    }

    fn is_object_modifier(&self) -> bool {
        let Some(Tok::Word(w)) = self.peek().map(|t| &t.tok) else { return false };
        if !matches!(w.as_str(), "get" | "set" | "async") {
            return false;
        }
        match self.nth(1).map(|t| &t.tok) {
            Some(Tok::Punct(p)) => matches!(*p, "[" | "*"),
            Some(Tok::Word(_)) | Some(Tok::Str(_)) | Some(Tok::Num(_)) | Some(Tok::Private(_)) => true,
            _ => false,
        }
    }
}

/// Strips compiler interop wrappers such as `__importStar(x)` down to `x`.
pub fn unwrap_interop(tree: &SyntaxTree, mut id: NodeId) -> NodeId {
    for _ in 0..4 {
        let NodeKind::Call { callee, args, is_new: false } = &tree.nodes[id].kind else { break };
        let name = match &tree.nodes[*callee].kind {
            NodeKind::Identifier(n) => Some(n.as_str()),
            NodeKind::MemberAccess { property: Property::Name(n), .. } => Some(n.as_str()),
            _ => None,
        };
        match (name, args.first()) {
            (Some(n), Some(&arg)) if INTEROP_WRAPPERS.contains(&n) => id = arg,
            _ => break,
        }
    }
    id
}

/// Module name when `id` is a `require("m")`-style call.
pub fn require_target(tree: &SyntaxTree, id: NodeId) -> Option<&str> {
    let NodeKind::Call { callee, args, is_new: false } = &tree.nodes[id].kind else { return None };
    match (&tree.nodes[*callee].kind, args.as_slice()) {
        (NodeKind::Identifier(n), [arg]) if REQUIRE_NAMES.contains(&n.as_str()) || n == "import" => tree.string_value(*arg),
        _ => None,
    }
}

fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}
