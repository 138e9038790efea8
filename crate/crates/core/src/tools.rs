//! Breakpoints, variable watches and trace counters built on metalinks.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::ast::{find_nodes, MethodSignature, NodeId, NodeQuery};
use crate::metalink::{Control, LinkError};
use crate::mirror::Mirror;
use crate::runtime::{CompiledMethod, Interpreter, LookupError};
use crate::symbol::Sym;
use crate::value::{ClassId, LinkId, Native, Value};

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("{class} declares no variable named {name}")]
    UnknownVariable { class: Sym, name: String },
    #[error("no {site} in {method}")]
    NoSuchSite { method: MethodSignature, site: String },
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BreakpointSite {
    MethodEntry,
    /// 1-based top-level statement of the method body.
    StatementAt(usize),
    /// Every send of this selector in the method.
    SendOf(Sym),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BreakpointId(pub usize);
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WatchId(pub usize);
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CounterId(pub usize);

pub struct Breakpoint {
    pub link: LinkId,
    pub sites: Vec<NodeId>,
    pub target: Option<Value>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct WatchOptions {
    /// Re-apply the watch to methods recompiled after installation.
    pub persistent: bool,
    /// Also record reads, with the value read.
    pub reads: bool,
}

#[derive(Clone)]
pub struct WatchRecord {
    pub object: Value,
    pub value: Value,
    pub method: Option<MethodSignature>,
}

pub struct VariableWatch {
    pub class: ClassId,
    pub var_name: Sym,
    pub link: LinkId,
    pub read_link: Option<LinkId>,
    pub history: Vec<WatchRecord>,
    pub options: WatchOptions,
    pub removed: bool,
}

pub struct TraceCounter {
    pub link: LinkId,
    pub counts: BTreeMap<NodeId, u64>,
}

impl TraceCounter {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Called with every freshly compiled method of the class (or a subclass).
pub type RecompileRule = Rc<dyn Fn(&mut Interpreter, &Rc<CompiledMethod>)>;

#[derive(Default)]
pub(crate) struct ToolState {
    breakpoints: Vec<Breakpoint>,
    watches: Vec<VariableWatch>,
    counters: Vec<TraceCounter>,
    rules: Vec<(ClassId, RecompileRule)>,
}

impl fmt::Debug for ToolState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolState")
            .field("breakpoints", &self.breakpoints.len())
            .field("watches", &self.watches.len())
            .field("counters", &self.counters.len())
            .field("rules", &self.rules.len())
            .finish()
    }
}

impl Interpreter {
    fn compiled(&self, class: ClassId, selector: &str) -> Result<Rc<CompiledMethod>, ToolError> {
        Ok(self.method(self.class_name(class).as_str(), selector)?)
    }

    /// Halts execution when control reaches `site`, before it runs.
    pub fn set_breakpoint(&mut self, class: ClassId, selector: &str, site: BreakpointSite) -> Result<BreakpointId, ToolError> {
        self.add_breakpoint(class, selector, site, None)
    }

    /// Like `set_breakpoint`, for one receiver only.
    pub fn set_breakpoint_for_object(
        &mut self,
        class: ClassId,
        selector: &str,
        site: BreakpointSite,
        target: Value,
    ) -> Result<BreakpointId, ToolError> {
        self.add_breakpoint(class, selector, site, Some(target))
    }

    fn add_breakpoint(&mut self, class: ClassId, selector: &str, site: BreakpointSite, target: Option<Value>) -> Result<BreakpointId, ToolError> {
        let method = self.compiled(class, selector)?;
        let root = method.ast();
        let sites: Vec<NodeId> = match &site {
            BreakpointSite::MethodEntry => vec![root.id],
            BreakpointSite::StatementAt(k) => find_nodes(&root, &NodeQuery::StatementAt(*k)).iter().map(|n| n.id).collect(),
            BreakpointSite::SendOf(s) => find_nodes(&root, &NodeQuery::SendsOf(*s)).iter().map(|n| n.id).collect(),
        };
        if sites.is_empty() {
            return Err(ToolError::NoSuchSite { method: method.signature.clone(), site: format!("{site:?}") });
        }
        let link = self.new_link();
        self.set_meta_object(link, Value::Class(self.builtins.halt));
        self.set_selector(link, "now");
        self.set_control(link, Control::Before);
        let installed = sites.iter().try_for_each(|&node| match &target {
            None => self.install(link, node),
            Some(t) => self.install_for_object(link, node, t.clone()),
        });
        if let Err(e) = installed {
            self.uninstall(link);
            return Err(e.into());
        }
        self.tools.breakpoints.push(Breakpoint { link, sites, target });
        Ok(BreakpointId(self.tools.breakpoints.len() - 1))
    }

    pub fn breakpoint(&self, id: BreakpointId) -> &Breakpoint {
        &self.tools.breakpoints[id.0]
    }

    pub fn remove_breakpoint(&mut self, id: BreakpointId) {
        let link = self.tools.breakpoints[id.0].link;
        self.uninstall(link);
    }

    pub fn watch_variable(&mut self, class: ClassId, var_name: &str, persistent: bool) -> Result<WatchId, ToolError> {
        self.watch_variable_with(class, var_name, WatchOptions { persistent, reads: false })
    }

    /// Records every write of a slot across the class's methods, including
    /// those inherited by subclasses.
    pub fn watch_variable_with(&mut self, class: ClassId, var_name: &str, options: WatchOptions) -> Result<WatchId, ToolError> {
        let var = Sym::new(var_name);
        if !self.class(class).all_slots.contains(&var) {
            return Err(ToolError::UnknownVariable { class: self.class_name(class), name: var_name.to_string() });
        }
        let index = self.tools.watches.len();
        let meta = Value::Native(Rc::new(Native::Watch(index)));
        let link = self.new_link();
        self.set_meta_object(link, meta.clone());
        self.set_selector(link, "record:value:method:");
        self.set_control(link, Control::After);
        self.set_arguments(link, &["object", "newValue", "method"]);
        let read_link = options.reads.then(|| {
            let l = self.new_link();
            self.set_meta_object(l, meta);
            self.set_selector(l, "record:value:method:");
            self.set_control(l, Control::After);
            self.set_arguments(l, &["object", "value", "method"]);
            l
        });
        self.tools.watches.push(VariableWatch { class, var_name: var, link, read_link, history: Vec::new(), options, removed: false });

        let methods: Vec<Rc<CompiledMethod>> = self.methods().filter(|m| self.is_subclass(m.class, class)).cloned().collect();
        for m in &methods {
            if let Err(e) = self.attach_watch(index, m) {
                self.remove_watch(WatchId(index));
                return Err(e.into());
            }
        }
        if options.persistent {
            let rule: RecompileRule = Rc::new(move |interp: &mut Interpreter, m: &Rc<CompiledMethod>| {
                if !interp.tools.watches[index].removed {
                    // The method already passed the checker, so the install cannot fail.
                    let _ = interp.attach_watch(index, m);
                }
            });
            self.add_recompile_rule(class, rule);
        }
        Ok(WatchId(index))
    }

    fn attach_watch(&mut self, index: usize, method: &Rc<CompiledMethod>) -> Result<(), LinkError> {
        let w = &self.tools.watches[index];
        let (var, link, read_link) = (w.var_name, w.link, w.read_link);
        let root = method.ast();
        for node in find_nodes(&root, &NodeQuery::WritesOf(var)) {
            self.install(link, node.id)?;
        }
        if let Some(read_link) = read_link {
            for node in find_nodes(&root, &NodeQuery::ReadsOf(var)) {
                self.install(read_link, node.id)?;
            }
        }
        Ok(())
    }

    pub fn watch(&self, id: WatchId) -> &VariableWatch {
        &self.tools.watches[id.0]
    }

    pub fn watch_history(&self, id: WatchId) -> &[WatchRecord] {
        &self.tools.watches[id.0].history
    }

    /// Uninstalls the watch; its history stays readable.
    pub fn remove_watch(&mut self, id: WatchId) {
        let w = &mut self.tools.watches[id.0];
        w.removed = true;
        let (link, read_link) = (w.link, w.read_link);
        self.uninstall(link);
        if let Some(l) = read_link {
            self.uninstall(l);
        }
    }

    pub(crate) fn record_watch(&mut self, index: usize, object: Value, value: Value, method: &Value) {
        let method = match method {
            Value::Mirror(m) => match &**m {
                Mirror::Method { method, .. } => Some(method.signature.clone()),
                _ => None,
            },
            _ => None,
        };
        if let Some(w) = self.tools.watches.get_mut(index) {
            w.history.push(WatchRecord { object, value, method });
        }
    }

    /// Counts how often each node runs, through one link shared by all of them.
    pub fn trace_count(&mut self, nodes: &[NodeId]) -> Result<CounterId, ToolError> {
        let index = self.tools.counters.len();
        let link = self.new_link();
        self.set_meta_object(link, Value::Native(Rc::new(Native::Counter(index))));
        self.set_selector(link, "hit:");
        self.set_control(link, Control::Before);
        self.set_arguments(link, &["node"]);
        if let Err(e) = nodes.iter().try_for_each(|&n| self.install(link, n)) {
            self.uninstall(link);
            return Err(e.into());
        }
        self.tools.counters.push(TraceCounter { link, counts: BTreeMap::new() });
        Ok(CounterId(index))
    }

    pub fn counter(&self, id: CounterId) -> &TraceCounter {
        &self.tools.counters[id.0]
    }

    pub fn counter_total(&self, id: CounterId) -> u64 {
        self.tools.counters[id.0].total()
    }

    pub fn counter_counts(&self, id: CounterId) -> &BTreeMap<NodeId, u64> {
        &self.tools.counters[id.0].counts
    }

    pub fn counter_link(&self, id: CounterId) -> LinkId {
        self.tools.counters[id.0].link
    }

    pub(crate) fn record_hit(&mut self, index: usize, node: NodeId) {
        if let Some(c) = self.tools.counters.get_mut(index) {
            *c.counts.entry(node).or_insert(0) += 1;
        }
    }

    /// Registers a callback run on every method compiled into `class` or
    /// one of its subclasses.
    pub fn add_recompile_rule(&mut self, class: ClassId, rule: RecompileRule) {
        self.tools.rules.push((class, rule));
    }

    pub(crate) fn apply_recompile_rules(&mut self, method: &Rc<CompiledMethod>) {
        let rules: Vec<RecompileRule> =
            self.tools.rules.iter().filter(|(c, _)| self.is_subclass(method.class, *c)).map(|(_, r)| r.clone()).collect();
        for rule in rules {
            rule(self, method);
        }
    }

    pub(crate) fn describe_native(&self, native: &Native) -> String {
        match native {
            Native::Transcript => "a TranscriptStream".into(),
            Native::Random(_) => "a Random".into(),
            Native::Operation(w) => format!("an Operation({})", if w.invoked() { "invoked" } else { "pending" }),
            Native::Watch(k) => {
                let w = &self.tools.watches[*k];
                let rows: Vec<String> = w
                    .history
                    .iter()
                    .map(|r| {
                        let method = r.method.as_ref().map_or("?".to_string(), |m| m.to_string());
                        format!("{} <- {} in {}", self.print_string(&r.object), self.print_string(&r.value), method)
                    })
                    .collect();
                format!("a Watch({}.{}: {})", self.class_name(w.class), w.var_name, rows.join(", "))
            }
            Native::Breakpoint(k) => {
                let b = &self.tools.breakpoints[*k];
                format!("a Breakpoint({} sites)", b.sites.len())
            }
            Native::Counter(k) => format!("a TraceCounter({})", self.tools.counters[*k].total()),
            Native::LevelProbe(levels, _) => format!("a LevelProbe({:?})", levels.borrow()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POINT: &str = "class Point [ | x y | setX [ x := 1. x := 2 ] x [ ^x ] ]";

    fn point() -> (Interpreter, ClassId) {
        let mut interp = Interpreter::new();
        interp.run_program(POINT).unwrap();
        let class = interp.class_named("Point").unwrap();
        (interp, class)
    }

    #[test]
    fn watch_records_each_write() {
        let (mut interp, class) = point();
        let w = interp.watch_variable(class, "x", false).unwrap();
        interp.run_program("Point new setX").unwrap();
        let values: Vec<i64> = interp.watch_history(w).iter().map(|r| r.value.as_int().unwrap()).collect();
        assert_eq!(values, vec![1, 2]);
        assert_eq!(interp.watch_history(w)[0].method.as_ref().unwrap().to_string(), "Point>>setX");
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let (mut interp, class) = point();
        assert!(matches!(interp.watch_variable(class, "z", false), Err(ToolError::UnknownVariable { .. })));
    }

    #[test]
    fn persistence_survives_recompile() {
        let (mut interp, class) = point();
        let plain = interp.watch_variable(class, "x", false).unwrap();
        let kept = interp.watch_variable(class, "x", true).unwrap();
        interp.recompile(class, Sym::new("setX"), "setX [ x := 1. x := 2 ]").unwrap();
        interp.run_program("Point new setX").unwrap();
        assert_eq!(interp.watch_history(plain).len(), 0);
        assert_eq!(interp.watch_history(kept).len(), 2);
    }

    #[test]
    fn watch_with_reads() {
        let (mut interp, class) = point();
        let w = interp.watch_variable_with(class, "x", WatchOptions { persistent: false, reads: true }).unwrap();
        interp.run_program("| p | p := Point new. p setX. p x").unwrap();
        assert_eq!(interp.watch_history(w).len(), 3);
    }

    #[test]
    fn breakpoint_halts_then_removal_restores() {
        let mut interp = Interpreter::new();
        let object = interp.class_named("Object").unwrap();
        let b = interp.set_breakpoint(object, "logCr", BreakpointSite::MethodEntry).unwrap();
        let run = interp.run_program("Object new logCr").unwrap();
        assert!(run.halted());
        assert_eq!(run.output, "");
        interp.remove_breakpoint(b);
        let run = interp.run_program("Object new logCr").unwrap();
        assert_eq!(run.output, "an Object\n");
    }

    #[test]
    fn breakpoint_on_missing_send_fails() {
        let (mut interp, class) = point();
        let err = interp.set_breakpoint(class, "setX", BreakpointSite::SendOf(Sym::new("foo"))).unwrap_err();
        assert!(matches!(err, ToolError::NoSuchSite { .. }));
    }

    #[test]
    fn counter_counts_sends_in_a_loop() {
        let mut interp = Interpreter::new();
        interp.run_program("class C [ run [ 1 to: 10 do: [:i | self ping ] ] ping [ ^self ] ]").unwrap();
        let root = interp.method_ast("C", "run").unwrap();
        let ping: Vec<NodeId> = find_nodes(&root, &NodeQuery::SendsOf(Sym::new("ping"))).iter().map(|n| n.id).collect();
        let c = interp.trace_count(&ping).unwrap();
        interp.run_program("C new run").unwrap();
        assert_eq!(interp.counter_total(c), 10);
    }
}
