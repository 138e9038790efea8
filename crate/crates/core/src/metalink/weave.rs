use std::collections::BTreeMap;
use std::rc::Rc;

use super::{HookSite, NodeLinks, ReflectiveMethod};
use crate::ast::{Node, NodeId, NodeKind};
use crate::runtime::CompiledMethod;

/// Builds the twin of `method` with a hook around every node in `entries`.
///
/// Only the nodes on a path from the root to a hooked node are copied;
/// every other subtree is shared with the original tree, which is never
/// modified.
pub fn weave(method: &Rc<CompiledMethod>, entries: &[(NodeId, NodeLinks)]) -> ReflectiveMethod {
    let original = method.ast();
    let mut sites = BTreeMap::new();
    for (id, links) in entries {
        let node = original.find(*id).expect("registered node belongs to the method").clone();
        let site = HookSite { node, method: Rc::downgrade(method), links: links.clone() };
        sites.insert(*id, Rc::new(site));
    }
    let woven_ast = rebuild(&original, &sites);
    ReflectiveMethod { signature: method.signature.clone(), woven_ast, hook_table: sites }
}

fn rebuild(node: &Rc<Node>, sites: &BTreeMap<NodeId, Rc<HookSite>>) -> Rc<Node> {
    if sites.range(node.lo..=node.id).next().is_none() {
        return node.clone();
    }
    let rebuilt = if sites.range(node.lo..node.id).next().is_some() {
        Rc::new(Node { id: node.id, lo: node.lo, span: node.span, kind: rebuild_children(&node.kind, sites) })
    } else {
        node.clone()
    };
    match sites.get(&node.id) {
        Some(site) => Rc::new(Node {
            id: node.id,
            lo: node.lo,
            span: node.span,
            kind: NodeKind::MetaHook { wrapped: rebuilt, site: site.clone() },
        }),
        None => rebuilt,
    }
}

fn rebuild_children(kind: &NodeKind, sites: &BTreeMap<NodeId, Rc<HookSite>>) -> NodeKind {
    let r = |n: &Rc<Node>| rebuild(n, sites);
    let all = |ns: &[Rc<Node>]| ns.iter().map(|n| rebuild(n, sites)).collect::<Vec<_>>();
    match kind {
        NodeKind::ClassDef { name, superclass, slots, methods } => {
            NodeKind::ClassDef { name: *name, superclass: *superclass, slots: slots.clone(), methods: all(methods) }
        }
        NodeKind::MethodDef { selector, params, temps, body } => {
            NodeKind::MethodDef { selector: *selector, params: params.clone(), temps: temps.clone(), body: r(body) }
        }
        NodeKind::Sequence { statements } => NodeKind::Sequence { statements: all(statements) },
        NodeKind::MessageSend { receiver, selector, args } => {
            NodeKind::MessageSend { receiver: r(receiver), selector: *selector, args: all(args) }
        }
        NodeKind::Assignment { name, value } => NodeKind::Assignment { name: *name, value: r(value) },
        NodeKind::Return { value } => NodeKind::Return { value: r(value) },
        NodeKind::Block { params, temps, body } => {
            NodeKind::Block { params: params.clone(), temps: temps.clone(), body: r(body) }
        }
        NodeKind::MetaHook { wrapped, site } => NodeKind::MetaHook { wrapped: r(wrapped), site: site.clone() },
        NodeKind::TempDecl { name } => NodeKind::TempDecl { name: *name },
        NodeKind::VarRead { name } => NodeKind::VarRead { name: *name },
        NodeKind::Literal(lit) => NodeKind::Literal(lit.clone()),
        NodeKind::LiteralArray(items) => NodeKind::LiteralArray(items.clone()),
        NodeKind::SelfRef { is_super } => NodeKind::SelfRef { is_super: *is_super },
    }
}
