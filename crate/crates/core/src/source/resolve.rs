use serde::{Deserialize, Serialize};

use crate::js::{require_target, unwrap_interop, BindingSource, NodeId, NodeKind, Pos, ScopeId, SyntaxTree};

/// Alias hops followed before a name is treated as unresolved.
pub const MAX_ALIAS_HOPS: u8 = 2;
const MAX_RESOLVE_DEPTH: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Root {
    /// Value obtained from `require("m")` or `import ... from "m"`.
    Module(String),
    /// Free identifier with no binding in the file, e.g. `process`.
    Global(String),
}

/// A value traced back to a module or global plus a static property path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub root: Root,
    pub path: Vec<String>,
    pub hops: u8,
}

impl Resolved {
    pub fn module(&self) -> Option<&str> {
        match &self.root {
            Root::Module(m) => Some(m),
            Root::Global(_) => None,
        }
    }

    pub fn is_module_path(&self, module: &str, path: &[&str]) -> bool {
        self.module() == Some(module) && self.path.iter().map(String::as_str).eq(path.iter().copied())
    }

    pub fn path_str(&self) -> String {
        self.path.join(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum ArgSummary {
    Literal(String),
    Unknown,
}

/// A reference into the editor API module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiReference {
    pub namespace_path: Vec<String>,
    pub call_site: Pos,
    pub via_alias: bool,
    pub argument_summary: Vec<ArgSummary>,
}

/// Per-node structural context that the tree itself does not store.
pub(crate) struct Parents {
    pub object_of_member: Vec<bool>,
    pub call_of_callee: Vec<Option<NodeId>>,
}

impl Parents {
    pub fn new(tree: &SyntaxTree) -> Self {
        let n = tree.nodes.len();
        let mut object_of_member = vec![false; n];
        let mut call_of_callee = vec![None; n];
        for (id, node) in tree.nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::MemberAccess { object, .. } => object_of_member[*object] = true,
                NodeKind::Call { callee, .. } => call_of_callee[*callee] = Some(id),
                _ => {}
            }
        }
        Self { object_of_member, call_of_callee }
    }
}

pub struct Resolver<'a> {
    tree: &'a SyntaxTree,
}

impl<'a> Resolver<'a> {
    pub fn new(tree: &'a SyntaxTree) -> Self {
        Self { tree }
    }

    pub fn resolve(&self, id: NodeId) -> Option<Resolved> {
        self.resolve_at(id, 0)
    }

    fn resolve_at(&self, id: NodeId, depth: u8) -> Option<Resolved> {
        if depth > MAX_RESOLVE_DEPTH {
            return None;
        }
        let id = unwrap_interop(self.tree, id);
        if let Some(m) = require_target(self.tree, id) {
            return Some(Resolved { root: Root::Module(m.to_string()), path: Vec::new(), hops: 0 });
        }
        let node = self.tree.node(id);
        match &node.kind {
            NodeKind::Identifier(name) => self.resolve_name(node.scope, name, depth),
            NodeKind::MemberAccess { .. } => {
                let (root, props) = self.tree.member_chain(id)?;
                let mut r = self.resolve_at(root, depth + 1)?;
                r.path.extend(props);
                Some(drop_default(r))
            }
            NodeKind::Sequence(items) => self.resolve_at(*items.last()?, depth + 1),
            NodeKind::Assignment { value, op: "=", .. } => self.resolve_at(*value, depth + 1),
            _ => None,
        }
    }

    fn resolve_name(&self, scope: ScopeId, name: &str, depth: u8) -> Option<Resolved> {
        let declared = self.tree.declaring_scope(scope, name);
        let key = (declared.unwrap_or(0), name.to_string());
        match self.tree.bindings.get(&key) {
            Some(sources) => sources.iter().find_map(|s| self.from_binding(s, depth)),
            None if declared.is_none() => Some(Resolved { root: Root::Global(name.to_string()), path: Vec::new(), hops: 0 }),
            None => None,
        }
    }

    fn from_binding(&self, source: &BindingSource, depth: u8) -> Option<Resolved> {
        let r = match source {
            BindingSource::Import { module, path } => Resolved {
                root: Root::Module(module.clone()),
                path: path.clone(),
                hops: u8::from(!path.is_empty()),
            },
            BindingSource::Expr(src) => {
                let mut r = self.resolve_at(*src, depth + 1)?;
                if !r.path.is_empty() {
                    r.hops += 1;
                }
                r
            }
            BindingSource::Destructured { source, path } => {
                let mut r = self.resolve_at(*source, depth + 1)?;
                r.path.extend(path.iter().cloned());
                r.hops += 1;
                r
            }
        };
        (r.hops <= MAX_ALIAS_HOPS).then(|| drop_default(r))
    }

    /// Follows identifier bindings to a constant string.
    pub fn const_string(&self, id: NodeId) -> Option<String> {
        self.const_string_at(id, 0)
    }

    fn const_string_at(&self, id: NodeId, depth: u8) -> Option<String> {
        if let Some(s) = self.tree.string_value(id) {
            return Some(s.to_string());
        }
        if depth >= MAX_ALIAS_HOPS {
            return None;
        }
        self.single_expr_binding(id).and_then(|src| self.const_string_at(src, depth + 1))
    }

    /// The initializer of an identifier bound exactly once to an expression.
    pub fn single_expr_binding(&self, id: NodeId) -> Option<NodeId> {
        let node = self.tree.node(id);
        let NodeKind::Identifier(name) = &node.kind else { return None };
        let scope = self.tree.declaring_scope(node.scope, name).unwrap_or(0);
        match self.tree.bindings.get(&(scope, name.clone()))?.as_slice() {
            [BindingSource::Expr(src)] => Some(*src),
            _ => None,
        }
    }

    /// Follows up to two identifier hops to the expression a name stands for.
    pub fn follow(&self, mut id: NodeId) -> NodeId {
        for _ in 0..MAX_ALIAS_HOPS {
            match self.single_expr_binding(id) {
                Some(src) => id = src,
                None => break,
            }
        }
        id
    }

    /// String fragments reachable from `id`: literals, template pieces, call
    /// arguments and constant identifier bindings, in source order.
    pub fn literal_fragments(&self, id: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_fragments(id, 0, &mut out);
        out
    }

    fn collect_fragments(&self, id: NodeId, depth: u8, out: &mut Vec<String>) {
        if depth > MAX_RESOLVE_DEPTH || out.len() > 64 {
            return;
        }
        match &self.tree.node(id).kind {
            NodeKind::StringLiteral(s) => out.push(s.clone()),
            NodeKind::Template { quasis, exprs } => {
                for (i, q) in quasis.iter().enumerate() {
                    if !q.is_empty() {
                        out.push(q.clone());
                    }
                    if let Some(e) = exprs.get(i) {
                        self.collect_fragments(*e, depth + 1, out);
                    }
                }
            }
            NodeKind::Binary { left, right, .. } => {
                self.collect_fragments(*left, depth + 1, out);
                self.collect_fragments(*right, depth + 1, out);
            }
            NodeKind::Call { args, .. } => {
                for a in args {
                    self.collect_fragments(*a, depth + 1, out);
                }
            }
            NodeKind::Conditional { then, otherwise, .. } => {
                self.collect_fragments(*then, depth + 1, out);
                self.collect_fragments(*otherwise, depth + 1, out);
            }
            NodeKind::ArrayLiteral { elements } | NodeKind::Sequence(elements) => {
                for e in elements {
                    self.collect_fragments(*e, depth + 1, out);
                }
            }
            NodeKind::Spread(inner) => self.collect_fragments(*inner, depth + 1, out),
            NodeKind::Identifier(_) if depth < 4 => {
                if let Some(src) = self.single_expr_binding(id) {
                    self.collect_fragments(src, depth + 2, out);
                }
            }
            _ => {}
        }
    }
}

fn drop_default(mut r: Resolved) -> Resolved {
    if matches!(r.root, Root::Module(_)) && r.path.first().is_some_and(|p| p == "default") {
        r.path.remove(0);
    }
    r
}

pub(crate) fn summarize_args(tree: &SyntaxTree, args: &[NodeId]) -> Vec<ArgSummary> {
    args.iter()
        .map(|a| match &tree.node(*a).kind {
            NodeKind::StringLiteral(s) => ArgSummary::Literal(s.clone()),
            NodeKind::Number(n) => ArgSummary::Literal(n.to_string()),
            NodeKind::Bool(b) => ArgSummary::Literal(b.to_string()),
            NodeKind::Null => ArgSummary::Literal("null".into()),
            _ => ArgSummary::Unknown,
        })
        .collect()
}

/// Recovers every reference into one of `api_modules` from `tree`.
///
/// Maximal member chains and bare aliased identifiers are resolved back to
/// a module binding; names without such a binding produce nothing.
pub fn resolve_api_references(tree: &SyntaxTree, api_modules: &[String]) -> Vec<ApiReference> {
    let parents = Parents::new(tree);
    let resolver = Resolver::new(tree);
    let is_api = |r: &Resolved| r.module().is_some_and(|m| api_modules.iter().any(|a| a == m)) && !r.path.is_empty();
    let mut refs = Vec::new();
    for (id, node) in tree.nodes.iter().enumerate() {
        if parents.object_of_member[id] {
            continue;
        }
        let resolved = match &node.kind {
            NodeKind::MemberAccess { .. } => {
                // Try the full chain first, then shorter prefixes when a
                // computed segment blocks static resolution.
                let mut cur = id;
                loop {
                    if let Some(r) = resolver.resolve(cur) {
                        break Some((cur, r));
                    }
                    match &tree.node(cur).kind {
                        NodeKind::MemberAccess { object, .. } => cur = *object,
                        _ => break None,
                    }
                }
            }
            NodeKind::Identifier(_) if !node.binding => {
                resolver.resolve(id).filter(|r| r.hops > 0).map(|r| (id, r))
            }
            _ => None,
        };
        let Some((at, r)) = resolved else { continue };
        if !is_api(&r) {
            continue;
        }
        let argument_summary = match parents.call_of_callee[at].map(|c| &tree.node(c).kind) {
            Some(NodeKind::Call { args, .. }) => summarize_args(tree, args),
            _ => Vec::new(),
        };
        refs.push(ApiReference {
            namespace_path: r.path,
            call_site: tree.node(at).pos,
            via_alias: r.hops > 0,
            argument_summary,
        });
    }
    refs
}
