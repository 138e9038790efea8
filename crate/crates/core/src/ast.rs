//! Syntax tree of the object language.
//!
//! Every node carries a [`NodeId`] that is unique within one interpreter
//! (or one standalone parse). Children are always numbered before their
//! parent and siblings are numbered left to right, so the ids of a subtree
//! form the contiguous range `lo..=id`. The metalink registry and the weaver
//! rely on that to find the method owning a node and to decide which parts
//! of a tree need rebuilding.

use std::fmt::{self, Write as _};
use std::rc::Rc;

use crate::metalink::HookSite;
use crate::symbol::Sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub file: Sym,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize, file: Sym) -> SourceSpan {
        debug_assert!(start <= end);
        SourceSpan { start, end, file }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shifted(self, by: usize) -> SourceSpan {
        SourceSpan { start: self.start + by, end: self.end + by, file: self.file }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.file, self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Int(i64),
    Str(Rc<str>),
    Symbol(Sym),
    True,
    False,
    Nil,
}

/// The node kinds, without payload. `MetaHook` only occurs in woven trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    ClassDef,
    MethodDef,
    Sequence,
    TempDecl,
    MessageSend,
    VarRead,
    Assignment,
    Return,
    Literal,
    LiteralArray,
    Block,
    SelfRef,
    MetaHook,
}

impl Kind {
    pub const ALL: [Kind; 12] = [
        Kind::ClassDef,
        Kind::MethodDef,
        Kind::Sequence,
        Kind::TempDecl,
        Kind::MessageSend,
        Kind::VarRead,
        Kind::Assignment,
        Kind::Return,
        Kind::Literal,
        Kind::LiteralArray,
        Kind::Block,
        Kind::SelfRef,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::ClassDef => "ClassDef",
            Kind::MethodDef => "MethodDef",
            Kind::Sequence => "Sequence",
            Kind::TempDecl => "TempDecl",
            Kind::MessageSend => "MessageSend",
            Kind::VarRead => "VarRead",
            Kind::Assignment => "Assignment",
            Kind::Return => "Return",
            Kind::Literal => "Literal",
            Kind::LiteralArray => "LiteralArray",
            Kind::Block => "Block",
            Kind::SelfRef => "SelfRef",
            Kind::MetaHook => "MetaHook",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub enum NodeKind {
    ClassDef { name: Sym, superclass: Option<Sym>, slots: Vec<Sym>, methods: Vec<Rc<Node>> },
    MethodDef { selector: Sym, params: Vec<Sym>, temps: Vec<Rc<Node>>, body: Rc<Node> },
    Sequence { statements: Vec<Rc<Node>> },
    TempDecl { name: Sym },
    MessageSend { receiver: Rc<Node>, selector: Sym, args: Vec<Rc<Node>> },
    VarRead { name: Sym },
    Assignment { name: Sym, value: Rc<Node> },
    Return { value: Rc<Node> },
    Literal(Literal),
    LiteralArray(Vec<Literal>),
    Block { params: Vec<Sym>, temps: Vec<Rc<Node>>, body: Rc<Node> },
    SelfRef { is_super: bool },
    /// Instrumentation point inserted by the weaver around an annotated node.
    MetaHook { wrapped: Rc<Node>, site: Rc<HookSite> },
}

#[derive(Debug)]
pub struct Node {
    pub id: NodeId,
    /// Smallest id in this subtree.
    pub lo: NodeId,
    pub span: SourceSpan,
    pub kind: NodeKind,
}

impl Node {
    pub fn kind(&self) -> Kind {
        match &self.kind {
            NodeKind::ClassDef { .. } => Kind::ClassDef,
            NodeKind::MethodDef { .. } => Kind::MethodDef,
            NodeKind::Sequence { .. } => Kind::Sequence,
            NodeKind::TempDecl { .. } => Kind::TempDecl,
            NodeKind::MessageSend { .. } => Kind::MessageSend,
            NodeKind::VarRead { .. } => Kind::VarRead,
            NodeKind::Assignment { .. } => Kind::Assignment,
            NodeKind::Return { .. } => Kind::Return,
            NodeKind::Literal(_) => Kind::Literal,
            NodeKind::LiteralArray(_) => Kind::LiteralArray,
            NodeKind::Block { .. } => Kind::Block,
            NodeKind::SelfRef { .. } => Kind::SelfRef,
            NodeKind::MetaHook { .. } => Kind::MetaHook,
        }
    }

    /// Whether `id` lies in this subtree.
    pub fn covers(&self, id: NodeId) -> bool {
        self.lo <= id && id <= self.id
    }

    pub fn children(&self) -> Vec<&Rc<Node>> {
        match &self.kind {
            NodeKind::ClassDef { methods, .. } => methods.iter().collect(),
            NodeKind::MethodDef { temps, body, .. } | NodeKind::Block { temps, body, .. } => {
                temps.iter().chain(std::iter::once(body)).collect()
            }
            NodeKind::Sequence { statements } => statements.iter().collect(),
            NodeKind::MessageSend { receiver, args, .. } => {
                std::iter::once(receiver).chain(args.iter()).collect()
            }
            NodeKind::Assignment { value, .. } | NodeKind::Return { value } => vec![value],
            NodeKind::MetaHook { wrapped, .. } => vec![wrapped],
            NodeKind::TempDecl { .. }
            | NodeKind::VarRead { .. }
            | NodeKind::Literal(_)
            | NodeKind::LiteralArray(_)
            | NodeKind::SelfRef { .. } => Vec::new(),
        }
    }

    pub fn selector(&self) -> Option<Sym> {
        match &self.kind {
            NodeKind::MethodDef { selector, .. } | NodeKind::MessageSend { selector, .. } => {
                Some(*selector)
            }
            NodeKind::MetaHook { wrapped, .. } => wrapped.selector(),
            _ => None,
        }
    }

    pub fn var_name(&self) -> Option<Sym> {
        match &self.kind {
            NodeKind::VarRead { name } | NodeKind::Assignment { name, .. } => Some(*name),
            NodeKind::TempDecl { name } => Some(*name),
            NodeKind::MetaHook { wrapped, .. } => wrapped.var_name(),
            _ => None,
        }
    }

    /// Pre-order traversal, children in source order.
    pub fn walk<'a>(self: &'a Rc<Node>, visit: &mut dyn FnMut(&'a Rc<Node>)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    /// Finds the node with `id` in this subtree by descending along id ranges.
    pub fn find(self: &Rc<Node>, id: NodeId) -> Option<&Rc<Node>> {
        if !self.covers(id) {
            return None;
        }
        if self.id == id {
            return Some(self);
        }
        self.children().into_iter().find_map(|c| c.find(id))
    }

    /// The chain of nodes from this node down to `id`, both ends included.
    pub fn path_to(self: &Rc<Node>, id: NodeId) -> Option<Vec<Rc<Node>>> {
        let mut path = vec![self.clone()];
        let mut current = self.clone();
        if !current.covers(id) {
            return None;
        }
        while current.id != id {
            let next = current.children().into_iter().find(|c| c.covers(id))?.clone();
            path.push(next.clone());
            current = next;
        }
        Some(path)
    }

    pub fn count_kind(self: &Rc<Node>, kind: Kind) -> usize {
        let mut n = 0;
        self.walk(&mut |node| {
            if node.kind() == kind {
                n += 1;
            }
        });
        n
    }
}

/// A parsed compilation unit.
#[derive(Debug)]
pub struct Program {
    pub classes: Vec<Rc<Node>>,
    /// Temporaries declared before the top-level statements.
    pub temps: Vec<Sym>,
    pub body: Rc<Node>,
    pub source: Rc<str>,
    pub file: Sym,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MethodSignature {
    pub class_name: Sym,
    pub selector: Sym,
    pub arity: usize,
}

impl MethodSignature {
    pub fn new(class_name: Sym, selector: Sym) -> MethodSignature {
        MethodSignature { class_name, selector, arity: selector.arity() }
    }
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>>{}", self.class_name, self.selector)
    }
}

/// Navigation queries over a method tree.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeQuery {
    AllSends,
    SendsOf(Sym),
    ReadsOf(Sym),
    WritesOf(Sym),
    /// 1-based index into the top-level statements of the method body.
    StatementAt(usize),
    AllNodes,
}

/// Returns matching nodes in source order. An empty result is not an error.
pub fn find_nodes(root: &Rc<Node>, query: &NodeQuery) -> Vec<Rc<Node>> {
    if let NodeQuery::StatementAt(index) = query {
        return statement_at(root, *index).into_iter().collect();
    }
    let mut found = Vec::new();
    root.walk(&mut |node| {
        let hit = match (query, &node.kind) {
            (NodeQuery::AllNodes, _) => true,
            (NodeQuery::AllSends, NodeKind::MessageSend { .. }) => true,
            (NodeQuery::SendsOf(sel), NodeKind::MessageSend { selector, .. }) => selector == sel,
            (NodeQuery::ReadsOf(var), NodeKind::VarRead { name }) => name == var,
            (NodeQuery::WritesOf(var), NodeKind::Assignment { name, .. }) => name == var,
            _ => false,
        };
        if hit {
            found.push(node.clone());
        }
    });
    // Pre-order visits a send before its receiver; source order is by start
    // offset, with enclosing nodes first on ties.
    found.sort_by_key(|n| (n.span.start, std::cmp::Reverse(n.span.end)));
    found
}

fn statement_at(root: &Rc<Node>, index: usize) -> Option<Rc<Node>> {
    let body = match &root.kind {
        NodeKind::MethodDef { body, .. } | NodeKind::Block { body, .. } => body,
        NodeKind::Sequence { .. } => root,
        NodeKind::MetaHook { wrapped, .. } => return statement_at(wrapped, index),
        _ => return None,
    };
    let body = match &body.kind {
        NodeKind::MetaHook { wrapped, .. } => wrapped,
        _ => body,
    };
    match &body.kind {
        NodeKind::Sequence { statements } if index >= 1 => statements.get(index - 1).cloned(),
        _ => None,
    }
}

/// Renders a tree back to source text in the grammar accepted by the parser.
pub fn unparse(node: &Node) -> String {
    let mut out = String::new();
    write_node(&mut out, node);
    out
}

pub fn unparse_program(program: &Program) -> String {
    let mut out = String::new();
    for class in &program.classes {
        write_node(&mut out, class);
        out.push('\n');
    }
    if !program.temps.is_empty() {
        out.push('|');
        for t in &program.temps {
            let _ = write!(out, " {t}");
        }
        out.push_str(" | ");
    }
    write_node(&mut out, &program.body);
    out
}

fn write_literal(out: &mut String, lit: &Literal, in_array: bool) {
    match lit {
        Literal::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Literal::Str(s) => {
            out.push('\'');
            out.push_str(&s.replace('\'', "''"));
            out.push('\'');
        }
        Literal::Symbol(s) => {
            if !in_array {
                out.push('#');
            }
            out.push_str(s.as_str());
        }
        Literal::True => out.push_str("true"),
        Literal::False => out.push_str("false"),
        Literal::Nil => out.push_str("nil"),
    }
}

fn write_temps(out: &mut String, temps: &[Rc<Node>]) {
    if temps.is_empty() {
        return;
    }
    out.push('|');
    for t in temps {
        out.push(' ');
        out.push_str(t.var_name().map(|s| s.as_str()).unwrap_or("?"));
    }
    out.push_str(" | ");
}

fn write_pattern(out: &mut String, selector: Sym, params: &[Sym]) {
    let name = selector.as_str();
    if params.is_empty() {
        out.push_str(name);
    } else if selector_is_binary(name) {
        let _ = write!(out, "{} {}", name, params[0]);
    } else {
        for (part, param) in name.split_inclusive(':').zip(params) {
            let _ = write!(out, "{part} {param} ");
        }
        out.pop();
    }
}

fn selector_is_binary(name: &str) -> bool {
    name.chars().next().is_some_and(|c| !(c.is_alphabetic() || c == '_'))
}

fn write_node(out: &mut String, node: &Node) {
    match &node.kind {
        NodeKind::ClassDef { name, superclass, slots, methods } => {
            let _ = write!(out, "class {name}");
            if let Some(sup) = superclass {
                let _ = write!(out, " extends {sup}");
            }
            out.push_str(" [");
            if !slots.is_empty() {
                out.push_str(" |");
                for s in slots {
                    let _ = write!(out, " {s}");
                }
                out.push_str(" |");
            }
            for m in methods {
                out.push_str("\n  ");
                write_node(out, m);
            }
            out.push_str("\n]");
        }
        NodeKind::MethodDef { selector, params, temps, body } => {
            write_pattern(out, *selector, params);
            out.push_str(" [ ");
            write_temps(out, temps);
            write_node(out, body);
            out.push_str(" ]");
        }
        NodeKind::Sequence { statements } => {
            for (i, s) in statements.iter().enumerate() {
                if i > 0 {
                    out.push_str(". ");
                }
                write_node(out, s);
            }
        }
        NodeKind::TempDecl { name } => out.push_str(name.as_str()),
        NodeKind::MessageSend { receiver, selector, args } => {
            out.push('(');
            write_node(out, receiver);
            let name = selector.as_str();
            if args.is_empty() {
                let _ = write!(out, " {name}");
            } else if selector_is_binary(name) {
                let _ = write!(out, " {name} ");
                write_node(out, &args[0]);
            } else {
                for (part, arg) in name.split_inclusive(':').zip(args) {
                    let _ = write!(out, " {part} ");
                    write_node(out, arg);
                }
            }
            out.push(')');
        }
        NodeKind::VarRead { name } => out.push_str(name.as_str()),
        NodeKind::Assignment { name, value } => {
            let _ = write!(out, "{name} := ");
            write_node(out, value);
        }
        NodeKind::Return { value } => {
            out.push('^');
            write_node(out, value);
        }
        NodeKind::Literal(lit) => write_literal(out, lit, false),
        NodeKind::LiteralArray(items) => {
            out.push_str("#(");
            for (i, lit) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_literal(out, lit, true);
            }
            out.push(')');
        }
        NodeKind::Block { params, temps, body } => {
            out.push('[');
            for p in params {
                let _ = write!(out, ":{p} ");
            }
            if !params.is_empty() {
                out.push_str("| ");
            }
            write_temps(out, temps);
            write_node(out, body);
            out.push(']');
        }
        NodeKind::SelfRef { is_super } => out.push_str(if *is_super { "super" } else { "self" }),
        NodeKind::MetaHook { wrapped, .. } => write_node(out, wrapped),
    }
}

/// Indented dump with ids and spans, one node per line.
pub fn dump_tree(node: &Node) -> String {
    let mut out = String::new();
    dump_into(&mut out, node, 0);
    out
}

fn dump_into(out: &mut String, node: &Node, depth: usize) {
    let _ = write!(out, "{:indent$}{} {} [{}-{}]", "", node.id, node.kind(), node.span.start, node.span.end, indent = depth * 2);
    match &node.kind {
        NodeKind::ClassDef { name, .. } => {
            let _ = write!(out, " {name}");
        }
        NodeKind::MethodDef { selector, .. } | NodeKind::MessageSend { selector, .. } => {
            let _ = write!(out, " #{selector}");
        }
        NodeKind::VarRead { name } | NodeKind::Assignment { name, .. } | NodeKind::TempDecl { name } => {
            let _ = write!(out, " {name}");
        }
        NodeKind::Literal(lit) => {
            out.push(' ');
            write_literal(out, lit, false);
        }
        NodeKind::LiteralArray(_) => {
            out.push(' ');
            write_node(out, node);
        }
        NodeKind::SelfRef { is_super: true } => out.push_str(" super"),
        NodeKind::MetaHook { site, .. } => {
            let _ = write!(out, " links={}", site.link_count());
        }
        _ => {}
    }
    out.push('\n');
    for child in node.children() {
        dump_into(out, child, depth + 1);
    }
}
