//! Metalinks: configuration, installation and the registry.
//!
//! A link is installed on a node of a compiled method, either for every
//! receiver (class-wide) or for one object. Installing or removing a link
//! re-weaves the owning method into a [`ReflectiveMethod`] twin whose tree
//! contains a `MetaHook` around each linked node; the twin disappears with
//! the last link of the method. Triggering is done by the evaluator.

mod weave;

use std::collections::BTreeMap;
use std::fmt;
use std::rc::{Rc, Weak};

use thiserror::Error;

use crate::ast::{Kind, MethodSignature, Node, NodeId};
use crate::reify::ReificationKind;
use crate::runtime::{CompiledMethod, Interpreter};
use crate::symbol::Sym;
use crate::value::{LinkId, Value};

pub use weave::weave;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Control {
    Before,
    After,
    Instead,
}

impl Control {
    pub fn from_name(name: &str) -> Option<Control> {
        match name {
            "before" => Some(Control::Before),
            "after" => Some(Control::After),
            "instead" => Some(Control::Instead),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Control::Before => "before",
            Control::After => "after",
            Control::Instead => "instead",
        }
    }
}

/// Where a link applies on a node.
#[derive(Clone, Debug)]
pub enum Scope {
    ClassWide,
    /// Only activations whose receiver is identical to the target.
    ObjectCentric(Value),
}

impl Scope {
    pub fn same(&self, other: &Scope) -> bool {
        match (self, other) {
            (Scope::ClassWide, Scope::ClassWide) => true,
            (Scope::ObjectCentric(a), Scope::ObjectCentric(b)) => a.identical(b),
            _ => false,
        }
    }

    /// Whether some activation could be in both scopes.
    pub fn overlaps(&self, other: &Scope) -> bool {
        match (self, other) {
            (Scope::ClassWide, _) | (_, Scope::ClassWide) => true,
            _ => self.same(other),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Condition {
    Constant(bool),
    /// A block called with the listed reifications.
    Block { block: Value, arguments: Vec<Sym> },
}

/// The user-editable part of a link. Setters change it freely; it is only
/// checked when the link is installed or invalidated.
#[derive(Clone, Debug)]
pub struct LinkConfig {
    pub meta_object: Value,
    pub selector: Option<Sym>,
    pub control: Control,
    /// Reification names, in the order of the selector's arguments.
    pub arguments: Vec<Sym>,
    pub condition: Option<Condition>,
    pub level: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            meta_object: Value::Nil,
            selector: None,
            control: Control::Before,
            arguments: Vec::new(),
            condition: None,
            level: 0,
        }
    }
}

/// A configuration that passed validation; this is what triggers use.
#[derive(Clone, Debug)]
pub struct ActiveConfig {
    pub meta_object: Value,
    pub selector: Sym,
    pub control: Control,
    pub arguments: Vec<ReificationKind>,
    pub condition: Option<ActiveCondition>,
    pub level: u32,
}

#[derive(Clone, Debug)]
pub enum ActiveCondition {
    Constant(bool),
    Block { block: Value, arguments: Vec<ReificationKind> },
}

#[derive(Clone, Debug)]
pub struct Installation {
    pub node: NodeId,
    pub kind: Kind,
    pub scope: Scope,
}

/// The installations of one link, grouped by node.
#[derive(Clone, Debug, Default)]
pub struct Installations {
    by_node: BTreeMap<NodeId, Vec<Installation>>,
    len: usize,
}

impl Installations {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Installation> {
        self.by_node.values().flatten()
    }

    pub fn on(&self, node: NodeId) -> &[Installation] {
        self.by_node.get(&node).map_or(&[], Vec::as_slice)
    }

    fn push(&mut self, installation: Installation) {
        self.by_node.entry(installation.node).or_default().push(installation);
        self.len += 1;
    }

    /// Takes out the installations accepted by `pred`, looking only at
    /// `node` when one is given.
    fn take(&mut self, node: Option<NodeId>, pred: impl Fn(&Installation) -> bool) -> Vec<Installation> {
        let nodes: Vec<NodeId> = match node {
            Some(n) => vec![n],
            None => self.by_node.keys().copied().collect(),
        };
        let mut gone = Vec::new();
        for n in nodes {
            let Some(list) = self.by_node.get_mut(&n) else { continue };
            let (out, kept): (Vec<_>, Vec<_>) = std::mem::take(list).into_iter().partition(|i| pred(i));
            gone.extend(out);
            if kept.is_empty() {
                self.by_node.remove(&n);
            } else {
                *list = kept;
            }
        }
        self.len -= gone.len();
        gone
    }
}

#[derive(Debug)]
pub struct MetaLink {
    pub id: LinkId,
    pub config: LinkConfig,
    pub enabled: bool,
    /// Set when the configuration changed while installed.
    pub dirty: bool,
    pub installed_on: Installations,
    pub(crate) active: Option<Rc<ActiveConfig>>,
}

impl MetaLink {
    pub fn is_installed(&self) -> bool {
        !self.installed_on.is_empty()
    }

    pub fn active(&self) -> Option<&ActiveConfig> {
        self.active.as_deref()
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("link has no selector")]
    IncompleteLink,
    #[error("#{selector} takes {expected} arguments but {requested} reifications are requested")]
    ArityMismatch { selector: Sym, expected: usize, requested: usize },
    #[error("condition block takes {expected} arguments but {requested} reifications are requested")]
    ConditionArityMismatch { expected: usize, requested: usize },
    #[error("reification #{kind} is not available on {node} nodes")]
    InapplicableReification { kind: String, node: Kind },
    #[error("meta-object {meta_object} does not understand #{selector}")]
    MetaObjectDoesNotUnderstand { meta_object: String, selector: Sym },
    #[error("node {node} already has an instead link in an overlapping scope")]
    InsteadConflict { node: NodeId },
    #[error("cannot install a link on node {node}: {reason}")]
    NodeNotInstallable { node: NodeId, reason: &'static str },
    #[error("object-centric links need a target with stable identity")]
    UnstableTarget,
    #[error("unknown control #{0}; expected #before, #after or #instead")]
    UnknownControl(Sym),
    #[error("no link with id {0}")]
    UnknownLink(u32),
}

/// Links registered on one node.
#[derive(Clone, Debug, Default)]
pub struct NodeLinks {
    pub class_wide: Vec<LinkId>,
    pub object_centric: Vec<(Value, Vec<LinkId>)>,
}

impl NodeLinks {
    pub fn is_empty(&self) -> bool {
        self.class_wide.is_empty() && self.object_centric.is_empty()
    }

    pub fn len(&self) -> usize {
        self.class_wide.len() + self.object_centric.iter().map(|(_, l)| l.len()).sum::<usize>()
    }

    pub fn contains(&self, link: LinkId, scope: &Scope) -> bool {
        match scope {
            Scope::ClassWide => self.class_wide.contains(&link),
            Scope::ObjectCentric(t) => {
                self.object_centric.iter().any(|(o, l)| o.identical(t) && l.contains(&link))
            }
        }
    }

    /// Every (link, scope) pair, class-wide first.
    pub fn entries(&self) -> Vec<(LinkId, Scope)> {
        let mut out: Vec<_> = self.class_wide.iter().map(|&l| (l, Scope::ClassWide)).collect();
        for (target, links) in &self.object_centric {
            out.extend(links.iter().map(|&l| (l, Scope::ObjectCentric(target.clone()))));
        }
        out
    }

    fn add(&mut self, link: LinkId, scope: &Scope) {
        match scope {
            Scope::ClassWide => self.class_wide.push(link),
            Scope::ObjectCentric(t) => match self.object_centric.iter_mut().find(|(o, _)| o.identical(t)) {
                Some((_, links)) => links.push(link),
                None => self.object_centric.push((t.clone(), vec![link])),
            },
        }
    }

    fn remove(&mut self, link: LinkId, scope: &Scope) {
        match scope {
            Scope::ClassWide => self.class_wide.retain(|&l| l != link),
            Scope::ObjectCentric(t) => {
                for (o, links) in &mut self.object_centric {
                    if o.identical(t) {
                        links.retain(|&l| l != link);
                    }
                }
                self.object_centric.retain(|(_, links)| !links.is_empty());
            }
        }
    }
}

/// Node id to links. Entries only exist for nodes of current methods.
#[derive(Debug, Default)]
pub struct LinkRegistry {
    entries: BTreeMap<NodeId, NodeLinks>,
}

impl LinkRegistry {
    pub fn get(&self, node: NodeId) -> Option<&NodeLinks> {
        self.entries.get(&node)
    }

    pub fn in_range(&self, lo: NodeId, hi: NodeId) -> impl Iterator<Item = (&NodeId, &NodeLinks)> {
        self.entries.range(lo..=hi)
    }

    pub fn has_entries_in(&self, lo: NodeId, hi: NodeId) -> bool {
        self.entries.range(lo..=hi).next().is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(NodeLinks::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn add(&mut self, node: NodeId, link: LinkId, scope: &Scope) {
        self.entries.entry(node).or_default().add(link, scope);
    }

    fn remove(&mut self, node: NodeId, link: LinkId, scope: &Scope) {
        if let Some(links) = self.entries.get_mut(&node) {
            links.remove(link, scope);
            if links.is_empty() {
                self.entries.remove(&node);
            }
        }
    }
}

/// One hook in a woven tree. Lists the links registered on the node when
/// the method was woven; their configuration is read at trigger time.
pub struct HookSite {
    /// The original node the hook wraps.
    pub node: Rc<Node>,
    pub method: Weak<CompiledMethod>,
    pub links: NodeLinks,
}

impl HookSite {
    pub fn link_count(&self) -> usize {
        self.links.len()
    }
}

impl fmt::Debug for HookSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HookSite({}, {} links)", self.node.id, self.link_count())
    }
}

/// The woven twin of a compiled method; what `send` runs while links exist.
#[derive(Debug)]
pub struct ReflectiveMethod {
    pub signature: MethodSignature,
    pub woven_ast: Rc<Node>,
    pub hook_table: BTreeMap<NodeId, Rc<HookSite>>,
}

impl ReflectiveMethod {
    pub fn hook_count(&self) -> usize {
        self.hook_table.len()
    }
}

impl Interpreter {
    pub fn new_link(&mut self) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(MetaLink {
            id,
            config: LinkConfig::default(),
            enabled: true,
            dirty: false,
            installed_on: Installations::default(),
            active: None,
        });
        id
    }

    pub fn link(&self, id: LinkId) -> &MetaLink {
        &self.links[id.0 as usize]
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn registry(&self) -> &LinkRegistry {
        &self.registry
    }

    fn edit(&mut self, id: LinkId, change: impl FnOnce(&mut LinkConfig)) {
        let link = &mut self.links[id.0 as usize];
        change(&mut link.config);
        if link.is_installed() {
            link.dirty = true;
        }
    }

    pub fn set_meta_object(&mut self, id: LinkId, meta_object: Value) {
        self.edit(id, |c| c.meta_object = meta_object);
    }

    pub fn set_selector(&mut self, id: LinkId, selector: &str) {
        let selector = Sym::new(selector);
        self.edit(id, |c| c.selector = Some(selector));
    }

    pub fn set_control(&mut self, id: LinkId, control: Control) {
        self.edit(id, |c| c.control = control);
    }

    pub fn set_arguments(&mut self, id: LinkId, arguments: &[&str]) {
        let arguments = arguments.iter().map(|a| Sym::new(a)).collect();
        self.edit(id, |c| c.arguments = arguments);
    }

    pub(crate) fn set_argument_syms(&mut self, id: LinkId, arguments: Vec<Sym>) {
        self.edit(id, |c| c.arguments = arguments);
    }

    pub fn set_condition(&mut self, id: LinkId, condition: Option<Condition>) {
        self.edit(id, |c| c.condition = condition);
    }

    pub fn set_level(&mut self, id: LinkId, level: u32) {
        self.edit(id, |c| c.level = level);
    }

    /// Disabled links stay woven but are skipped when triggered.
    pub fn set_enabled(&mut self, id: LinkId, enabled: bool) {
        self.links[id.0 as usize].enabled = enabled;
    }

    /// Checks a configuration against the kinds of all nodes it would be
    /// installed on.
    fn validate(&self, config: &LinkConfig, kinds: &[Kind]) -> Result<ActiveConfig, LinkError> {
        let selector = config.selector.ok_or(LinkError::IncompleteLink)?;
        let reify = |names: &[Sym]| -> Result<Vec<ReificationKind>, LinkError> {
            names
                .iter()
                .map(|name| {
                    let kind = ReificationKind::from_name(name.as_str()).ok_or_else(|| {
                        LinkError::InapplicableReification { kind: name.to_string(), node: kinds.first().copied().unwrap_or(Kind::MethodDef) }
                    })?;
                    match kinds.iter().find(|&&k| !kind.applicable(k)) {
                        Some(&node) => Err(LinkError::InapplicableReification { kind: kind.name().to_string(), node }),
                        None => Ok(kind),
                    }
                })
                .collect()
        };
        let arguments = reify(&config.arguments)?;
        if selector.arity() != arguments.len() {
            return Err(LinkError::ArityMismatch { selector, expected: selector.arity(), requested: arguments.len() });
        }
        if !self.responds_to(&config.meta_object, selector) {
            return Err(LinkError::MetaObjectDoesNotUnderstand {
                meta_object: self.print_string(&config.meta_object),
                selector,
            });
        }
        let condition = match &config.condition {
            None => None,
            Some(Condition::Constant(b)) => Some(ActiveCondition::Constant(*b)),
            Some(Condition::Block { block, arguments }) => {
                let resolved = reify(arguments)?;
                if let Value::Block(closure) = block {
                    let expected = crate::runtime::block_arity(&closure.node);
                    if expected != resolved.len() {
                        return Err(LinkError::ConditionArityMismatch { expected, requested: resolved.len() });
                    }
                }
                Some(ActiveCondition::Block { block: block.clone(), arguments: resolved })
            }
        };
        Ok(ActiveConfig {
            meta_object: config.meta_object.clone(),
            selector,
            control: config.control,
            arguments,
            condition,
            level: config.level,
        })
    }

    fn check_instead(&self, id: LinkId, control: Control, node: NodeId, scope: &Scope) -> Result<(), LinkError> {
        if control != Control::Instead {
            return Ok(());
        }
        let Some(entry) = self.registry.get(node) else { return Ok(()) };
        for (other, other_scope) in entry.entries() {
            if other == id {
                continue;
            }
            let other_link = self.link(other);
            let other_control = other_link.active.as_ref().map_or(other_link.config.control, |a| a.control);
            if other_control == Control::Instead && other_scope.overlaps(scope) {
                return Err(LinkError::InsteadConflict { node });
            }
        }
        Ok(())
    }

    /// Finds the current method containing `node` and the node's kind.
    fn installable(&self, node: NodeId) -> Result<(Rc<CompiledMethod>, Kind), LinkError> {
        let method = self
            .owning_method(node)
            .ok_or(LinkError::NodeNotInstallable { node, reason: "not part of a current method" })?;
        let ast = method.ast();
        let kind = ast.find(node).map(|n| n.kind()).ok_or(LinkError::NodeNotInstallable { node, reason: "unknown node" })?;
        match kind {
            Kind::ClassDef | Kind::TempDecl | Kind::MetaHook => {
                Err(LinkError::NodeNotInstallable { node, reason: "declarations carry no behavior" })
            }
            _ => Ok((method, kind)),
        }
    }

    /// Installs `link` on `node` for every receiver.
    pub fn install(&mut self, link: LinkId, node: NodeId) -> Result<(), LinkError> {
        self.install_scoped(link, node, Scope::ClassWide)
    }

    /// Installs `link` on `node` for activations whose receiver is `target`.
    pub fn install_for_object(&mut self, link: LinkId, node: NodeId, target: Value) -> Result<(), LinkError> {
        if !target.has_stable_identity() {
            return Err(LinkError::UnstableTarget);
        }
        self.install_scoped(link, node, Scope::ObjectCentric(target))
    }

    fn install_scoped(&mut self, id: LinkId, node: NodeId, scope: Scope) -> Result<(), LinkError> {
        if id.0 as usize >= self.links.len() {
            return Err(LinkError::UnknownLink(id.0));
        }
        let (method, kind) = self.installable(node)?;
        let link = self.link(id);
        // A clean link was already validated against the nodes it sits on.
        let kinds: Vec<Kind> = if link.active.is_some() && !link.dirty {
            vec![kind]
        } else {
            let mut kinds: Vec<Kind> = link.installed_on.iter().map(|i| i.kind).collect();
            kinds.push(kind);
            kinds.sort_unstable();
            kinds.dedup();
            kinds
        };
        let active = self.validate(&link.config, &kinds)?;
        self.check_instead(id, active.control, node, &scope)?;
        let already = self.registry.get(node).is_some_and(|e| e.contains(id, &scope));
        let link = &mut self.links[id.0 as usize];
        link.active = Some(Rc::new(active));
        link.dirty = false;
        if already {
            return Ok(());
        }
        link.installed_on.push(Installation { node, kind, scope: scope.clone() });
        self.registry.add(node, id, &scope);
        self.reweave(&method);
        Ok(())
    }

    /// Removes the class-wide and all object-centric installations of `link`
    /// on `node`. Removing an absent link does nothing.
    pub fn remove_link(&mut self, node: NodeId, link: LinkId) {
        self.remove_matching(link, Some(node), |_| true);
    }

    pub fn remove_link_for_object(&mut self, node: NodeId, link: LinkId, target: &Value) {
        self.remove_matching(link, Some(node), |i| matches!(&i.scope, Scope::ObjectCentric(t) if t.identical(target)));
    }

    /// Removes `link` from every node it is installed on.
    pub fn uninstall(&mut self, link: LinkId) {
        self.remove_matching(link, None, |_| true);
    }

    fn remove_matching(&mut self, id: LinkId, node: Option<NodeId>, pred: impl Fn(&Installation) -> bool) {
        let Some(link) = self.links.get_mut(id.0 as usize) else { return };
        let gone = link.installed_on.take(node, pred);
        let mut touched: BTreeMap<NodeId, Rc<CompiledMethod>> = BTreeMap::new();
        for inst in gone {
            self.registry.remove(inst.node, id, &inst.scope);
            if let Some(m) = self.owning_method(inst.node) {
                touched.entry(m.lo).or_insert(m);
            }
        }
        for m in touched.values() {
            self.reweave(m);
        }
    }

    /// Re-validates the link and re-weaves the methods it is installed in.
    /// On failure the previous definition stays in effect.
    pub fn invalidate(&mut self, id: LinkId) -> Result<(), LinkError> {
        let link = self.links.get(id.0 as usize).ok_or(LinkError::UnknownLink(id.0))?;
        if !link.is_installed() {
            self.links[id.0 as usize].dirty = false;
            return Ok(());
        }
        let kinds: Vec<Kind> = link.installed_on.iter().map(|i| i.kind).collect();
        let installs: Vec<Installation> = link.installed_on.iter().cloned().collect();
        let result = self.validate(&link.config, &kinds).and_then(|active| {
            for inst in &installs {
                self.check_instead(id, active.control, inst.node, &inst.scope)?;
            }
            Ok(active)
        });
        let link = &mut self.links[id.0 as usize];
        link.dirty = false;
        let active = result?;
        link.active = Some(Rc::new(active));
        let mut touched: BTreeMap<NodeId, Rc<CompiledMethod>> = BTreeMap::new();
        for inst in &installs {
            if let Some(m) = self.owning_method(inst.node) {
                touched.entry(m.lo).or_insert(m);
            }
        }
        for m in touched.values() {
            self.reweave(m);
        }
        Ok(())
    }

    /// Rebuilds or drops the twin of `method` from the registry.
    pub(crate) fn reweave(&mut self, method: &Rc<CompiledMethod>) {
        if self.registry.has_entries_in(method.lo, method.hi) {
            let entries: Vec<(NodeId, NodeLinks)> =
                self.registry.in_range(method.lo, method.hi).map(|(n, l)| (*n, l.clone())).collect();
            let twin = weave(method, &entries);
            *method.twin.borrow_mut() = Some(Rc::new(twin));
        } else {
            *method.twin.borrow_mut() = None;
        }
    }

    /// Forgets every link installation inside a method that is being replaced.
    pub(crate) fn drop_links_of_method(&mut self, old: &Rc<CompiledMethod>) {
        let nodes: Vec<NodeId> = self.registry.in_range(old.lo, old.hi).map(|(n, _)| *n).collect();
        for node in nodes {
            if let Some(entry) = self.registry.entries.remove(&node) {
                for (link, _) in entry.entries() {
                    self.links[link.0 as usize].installed_on.take(Some(node), |_| true);
                }
            }
        }
        *old.twin.borrow_mut() = None;
    }

    /// Links registered on `node`, class-wide first.
    pub fn links_on(&self, node: NodeId) -> Vec<(LinkId, Scope)> {
        self.registry.get(node).map(NodeLinks::entries).unwrap_or_default()
    }

    /// Whether every current method has a twin exactly when the registry
    /// holds a link for one of its nodes, and the links agree with the
    /// registry.
    pub fn twin_invariant_holds(&self) -> bool {
        let methods_ok = self.methods().all(|m| m.has_twin() == self.registry.has_entries_in(m.lo, m.hi));
        let links_ok = self.links.iter().all(|l| {
            l.installed_on.iter().all(|i| self.registry.get(i.node).is_some_and(|e| e.contains(l.id, &i.scope)))
        });
        let count: usize = self.links.iter().map(|l| l.installed_on.len()).sum();
        methods_ok && links_ok && count == self.registry.len()
    }

    pub(crate) fn describe_link(&self, id: LinkId) -> String {
        let link = self.link(id);
        let selector = link.config.selector.map(|s| format!("#{s}")).unwrap_or_else(|| "nil".into());
        format!(
            "a MetaLink({} {} -> {}, {} nodes)",
            link.config.control.name(),
            selector,
            self.print_string(&link.config.meta_object),
            link.installed_on.len()
        )
    }
}
