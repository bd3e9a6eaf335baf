use std::collections::HashMap;

pub type NodeId = usize;
pub type ScopeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    /// 1-based.
    pub line: u32,
    /// 1-based, in characters.
    pub column: u32,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    Name(String),
    Computed(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropKey {
    Name(String),
    Computed(NodeId),
    Spread,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportBinding {
    /// `import * as x`, `import x` (default), `const x = require(..)`.
    Namespace(String),
    /// `import { imported as local }`, `const { imported: local } = require(..)`.
    Named { imported: String, local: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Identifier(String),
    /// String literal after constant folding.
    StringLiteral(String),
    /// Template literal with substitutions; `quasis.len() == exprs.len() + 1`.
    Template { quasis: Vec<String>, exprs: Vec<NodeId> },
    Number(f64),
    Bool(bool),
    Null,
    Regex,
    This,
    MemberAccess { object: NodeId, property: Property, optional: bool },
    Call { callee: NodeId, args: Vec<NodeId>, is_new: bool },
    /// Assignment expression or initialized declarator.
    Assignment { target: NodeId, value: NodeId, op: &'static str, declaration: bool },
    ImportLike { module: String, bindings: Vec<ImportBinding> },
    ObjectLiteral { entries: Vec<(PropKey, NodeId)> },
    ArrayLiteral { elements: Vec<NodeId> },
    Binary { op: &'static str, left: NodeId, right: NodeId },
    Unary { op: &'static str, arg: NodeId },
    Spread(NodeId),
    Sequence(Vec<NodeId>),
    Conditional { test: NodeId, then: NodeId, otherwise: NodeId },
    Function { params: Vec<NodeId>, scope: ScopeId },
    Class,
    /// `()` arrow parameter list and other leaf placeholders.
    Empty,
}

/// Normalized classes used when comparing node counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeClass {
    MemberAccess,
    Call,
    Assignment,
    StringLiteral,
    Identifier,
    ImportLike,
    ObjectLiteral,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub pos: Pos,
    pub scope: ScopeId,
    /// Identifier in a binding position (declaration or assignment target).
    pub binding: bool,
}

impl Node {
    pub fn class(&self) -> NodeClass {
        match self.kind {
            NodeKind::MemberAccess { .. } => NodeClass::MemberAccess,
            NodeKind::Call { .. } => NodeClass::Call,
            NodeKind::Assignment { .. } => NodeClass::Assignment,
            NodeKind::StringLiteral(_) => NodeClass::StringLiteral,
            NodeKind::Identifier(_) => NodeClass::Identifier,
            NodeKind::ImportLike { .. } => NodeClass::ImportLike,
            NodeKind::ObjectLiteral { .. } => NodeClass::ObjectLiteral,
            _ => NodeClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scope {
    pub parent: Option<ScopeId>,
    pub declared: Vec<String>,
}

/// Where a name's value comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BindingSource {
    /// `name = expr` or `const name = expr`.
    Expr(NodeId),
    /// `const { a: { b: name } } = expr` binds `name` to `expr.a.b`.
    Destructured { source: NodeId, path: Vec<String> },
    /// Import declaration binding, `path` empty for namespace/default.
    Import { module: String, path: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntaxTree {
    pub nodes: Vec<Node>,
    pub scopes: Vec<Scope>,
    pub bindings: HashMap<(ScopeId, String), Vec<BindingSource>>,
}

impl SyntaxTree {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scope that declares `name` as seen from `scope`, if any.
    pub fn declaring_scope(&self, scope: ScopeId, name: &str) -> Option<ScopeId> {
        let mut cur = Some(scope);
        while let Some(s) = cur {
            if self.scopes[s].declared.iter().any(|d| d == name) {
                return Some(s);
            }
            cur = self.scopes[s].parent;
        }
        None
    }

    pub fn class_counts(&self) -> HashMap<NodeClass, usize> {
        let mut counts = HashMap::new();
        for n in &self.nodes {
            *counts.entry(n.class()).or_insert(0) += 1;
        }
        counts
    }

    /// Static property chain of a member expression, innermost first, with
    /// the root node. `a.b["c"]` gives `(a, ["b", "c"])`.
    pub fn member_chain(&self, id: NodeId) -> Option<(NodeId, Vec<String>)> {
        let mut props = Vec::new();
        let mut cur = id;
        loop {
            match &self.nodes[cur].kind {
                NodeKind::MemberAccess { object, property, .. } => {
                    props.push(self.property_name(property)?);
                    cur = *object;
                }
                _ => break,
            }
        }
        props.reverse();
        Some((cur, props))
    }

    pub fn property_name(&self, p: &Property) -> Option<String> {
        match p {
            Property::Name(n) => Some(n.clone()),
            Property::Computed(id) => match &self.nodes[*id].kind {
                NodeKind::StringLiteral(s) => Some(s.clone()),
                _ => None,
            },
        }
    }

    /// Literal string value of a node, folding interpolation-free templates.
    pub fn string_value(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].kind {
            NodeKind::StringLiteral(s) => Some(s),
            NodeKind::Template { quasis, exprs } if exprs.is_empty() => quasis.first().map(String::as_str),
            _ => None,
        }
    }

    /// Loose JavaScript truthiness for literal-shaped nodes; `None` when the
    /// value is not statically known.
    pub fn truthiness(&self, id: NodeId) -> Option<bool> {
        match &self.nodes[id].kind {
            NodeKind::Bool(b) => Some(*b),
            NodeKind::Number(n) => Some(*n != 0.0 && !n.is_nan()),
            NodeKind::StringLiteral(s) => Some(!s.is_empty()),
            NodeKind::Null => Some(false),
            NodeKind::Identifier(n) if n == "undefined" => Some(false),
            NodeKind::ObjectLiteral { .. } | NodeKind::ArrayLiteral { .. } | NodeKind::Function { .. } => Some(true),
            NodeKind::Unary { op: "!", arg } => self.truthiness(*arg).map(|b| !b),
            _ => None,
        }
    }
}
