//! Object model, method tables and program loading.
//!
//! Evaluation lives in [`eval`], primitives in [`primitives`].

mod error;
mod eval;
mod primitives;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::check_method;
use crate::ast::{MethodSignature, Node, NodeId, NodeKind, Program};
use crate::metalink::{LinkRegistry, MetaLink, ReflectiveMethod};
use crate::parser::{parse_method, parse_program, IdGen, SyntaxError};
use crate::symbol::Sym;
use crate::tools::ToolState;
use crate::value::{ClassId, Env, Value};

pub use error::{
    format_trace, ErrorKind, HaltSignal, LookupError, ProgramError, RecompileError, RuntimeError, TraceLine, Unwind,
};
pub use eval::{block_arity, Cx, VarLocation};

pub type PrimFn = fn(&mut Interpreter, &Value, &[Value]) -> Result<Value, Unwind>;

#[derive(Clone)]
pub enum MethodImpl {
    Compiled(Rc<CompiledMethod>),
    Primitive(PrimFn),
}

/// How `new` builds instances of a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Slots,
    Indexable,
    Random,
    MetaLink,
    /// Instances only come from literals or the host.
    None,
}

pub struct ClassRecord {
    pub id: ClassId,
    pub name: Sym,
    pub superclass: Option<ClassId>,
    pub slot_names: Vec<Sym>,
    /// Inherited slots first.
    pub all_slots: Vec<Sym>,
    pub methods: HashMap<Sym, MethodImpl>,
    pub(crate) class_side: HashMap<Sym, PrimFn>,
    pub layout: Layout,
}

/// A method compiled from source. Immutable: recompiling produces a new
/// record, and link operations only ever swap the `twin`.
pub struct CompiledMethod {
    pub signature: MethodSignature,
    pub class: ClassId,
    pub source: Rc<str>,
    /// Offset of `source` within `file`.
    pub source_offset: usize,
    pub file: Sym,
    pub lo: NodeId,
    pub hi: NodeId,
    exec_root: Rc<Node>,
    ast_cache: RefCell<Option<Rc<Node>>>,
    pub(crate) twin: RefCell<Option<Rc<ReflectiveMethod>>>,
}

impl CompiledMethod {
    /// The original, unwoven tree. Re-created from source when the cache
    /// was flushed; reparsing from `lo` reproduces the same node ids.
    pub fn ast(&self) -> Rc<Node> {
        if let Some(ast) = self.ast_cache.borrow().as_ref() {
            return ast.clone();
        }
        let mut ids = IdGen::starting_at(self.lo);
        let ast = parse_method(&self.source, self.source_offset, self.file, &mut ids)
            .expect("compiled method source reparses");
        debug_assert_eq!(ast.id, self.hi);
        *self.ast_cache.borrow_mut() = Some(ast.clone());
        ast
    }

    pub fn ast_cached(&self) -> bool {
        self.ast_cache.borrow().is_some()
    }

    pub(crate) fn flush_ast(&self) {
        if self.twin.borrow().is_none() {
            *self.ast_cache.borrow_mut() = None;
        }
    }

    pub fn twin(&self) -> Option<Rc<ReflectiveMethod>> {
        self.twin.borrow().clone()
    }

    pub fn has_twin(&self) -> bool {
        self.twin.borrow().is_some()
    }

    /// The tree `send` runs: the woven twin when one exists.
    pub(crate) fn executable(&self) -> Rc<Node> {
        match self.twin.borrow().as_ref() {
            Some(twin) => twin.woven_ast.clone(),
            None => self.exec_root.clone(),
        }
    }

    pub fn covers(&self, id: NodeId) -> bool {
        self.lo <= id && id <= self.hi
    }
}

impl std::fmt::Debug for CompiledMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CompiledMethod({})", self.signature)
    }
}

/// Result of [`Interpreter::lookup_method`].
#[derive(Clone)]
pub enum MethodRef {
    Compiled(Rc<CompiledMethod>),
    Primitive { class: ClassId, selector: Sym },
}

impl MethodRef {
    pub fn compiled(&self) -> Option<&Rc<CompiledMethod>> {
        match self {
            MethodRef::Compiled(m) => Some(m),
            MethodRef::Primitive { .. } => None,
        }
    }
}

/// An activation record on the interpreter stack.
#[derive(Clone)]
pub struct Frame {
    pub serial: u64,
    pub receiver: Value,
    pub class: Option<ClassId>,
    pub selector: Sym,
    pub is_block: bool,
    pub args: Vec<Value>,
    pub env: Rc<Env>,
    pub span: Option<crate::ast::SourceSpan>,
    pub method: Option<Rc<CompiledMethod>>,
}

/// Counters used by tests and the benchmark harness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    /// Evaluations of woven hook nodes.
    pub hook_visits: u64,
    /// Reads of the link registry from the execution path.
    pub registry_reads: u64,
    /// Links whose selector was dispatched to their meta-object.
    pub link_fires: u64,
    pub sends: u64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Value(Value),
    Halt(HaltSignal),
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Output produced by this run only.
    pub output: String,
    pub outcome: Outcome,
}

impl RunResult {
    pub fn halted(&self) -> bool {
        matches!(self.outcome, Outcome::Halt(_))
    }
}

pub(crate) struct Builtins {
    pub object: ClassId,
    pub undefined: ClassId,
    pub boolean: ClassId,
    pub integer: ClassId,
    pub string: ClassId,
    pub symbol: ClassId,
    pub array: ClassId,
    pub ordered_collection: ClassId,
    pub block: ClassId,
    pub class: ClassId,
    pub metalink: ClassId,
    pub halt: ClassId,
    pub random: ClassId,
    pub transcript: ClassId,
    pub operation: ClassId,
    pub method_mirror: ClassId,
    pub node_mirror: ClassId,
    pub context_mirror: ClassId,
    pub variable_mirror: ClassId,
    pub watch: ClassId,
    pub breakpoint: ClassId,
    pub counter: ClassId,
    pub reflect: ClassId,
    pub probe: ClassId,
}

const PRELUDE: &str = include_str!("prelude.mk");

/// Default limit on nested activations.
pub const DEFAULT_MAX_DEPTH: usize = 1_000;

pub struct Interpreter {
    pub(crate) classes: Vec<ClassRecord>,
    pub(crate) class_names: HashMap<Sym, ClassId>,
    pub(crate) globals: HashMap<Sym, Value>,
    pub(crate) output: String,
    pub(crate) meta_level: u32,
    pub(crate) links: Vec<MetaLink>,
    pub(crate) registry: LinkRegistry,
    /// Current methods keyed by the first node id of their tree.
    pub(crate) methods_by_lo: BTreeMap<NodeId, Rc<CompiledMethod>>,
    pub(crate) frames: Vec<Frame>,
    pub(crate) ids: IdGen,
    next_serial: u64,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) stats: Stats,
    pub(crate) tools: ToolState,
    pub(crate) builtins: Builtins,
    pub max_depth: usize,
    file_counter: u32,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::new()
    }
}

impl Interpreter {
    pub fn new() -> Interpreter {
        Interpreter::with_seed(0)
    }

    /// `seed` drives every `Random new` created by programs.
    pub fn with_seed(seed: u64) -> Interpreter {
        let placeholder = ClassId(0);
        let mut interp = Interpreter {
            classes: Vec::new(),
            class_names: HashMap::new(),
            globals: HashMap::new(),
            output: String::new(),
            meta_level: 0,
            links: Vec::new(),
            registry: LinkRegistry::default(),
            methods_by_lo: BTreeMap::new(),
            frames: Vec::new(),
            ids: IdGen::default(),
            next_serial: 1,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: Stats::default(),
            tools: ToolState::default(),
            builtins: Builtins {
                object: placeholder,
                undefined: placeholder,
                boolean: placeholder,
                integer: placeholder,
                string: placeholder,
                symbol: placeholder,
                array: placeholder,
                ordered_collection: placeholder,
                block: placeholder,
                class: placeholder,
                metalink: placeholder,
                halt: placeholder,
                random: placeholder,
                transcript: placeholder,
                operation: placeholder,
                method_mirror: placeholder,
                node_mirror: placeholder,
                context_mirror: placeholder,
                variable_mirror: placeholder,
                watch: placeholder,
                breakpoint: placeholder,
                counter: placeholder,
                reflect: placeholder,
                probe: placeholder,
            },
            max_depth: DEFAULT_MAX_DEPTH,
            file_counter: 0,
        };
        interp.boot();
        interp
    }

    fn boot(&mut self) {
        let object = self.define_class("Object", None, Layout::Slots);
        let sub = |me: &mut Self, name: &str, layout| me.define_class(name, Some(object), layout);
        let b = Builtins {
            object,
            undefined: sub(self, "UndefinedObject", Layout::None),
            boolean: sub(self, "Boolean", Layout::None),
            integer: sub(self, "Integer", Layout::None),
            string: sub(self, "String", Layout::None),
            symbol: sub(self, "Symbol", Layout::None),
            array: sub(self, "Array", Layout::Indexable),
            ordered_collection: sub(self, "OrderedCollection", Layout::Indexable),
            block: sub(self, "BlockClosure", Layout::None),
            class: sub(self, "Class", Layout::None),
            metalink: sub(self, "MetaLink", Layout::MetaLink),
            halt: sub(self, "Halt", Layout::Slots),
            random: sub(self, "Random", Layout::Random),
            transcript: sub(self, "TranscriptStream", Layout::None),
            operation: sub(self, "Operation", Layout::None),
            method_mirror: sub(self, "MethodMirror", Layout::None),
            node_mirror: sub(self, "NodeMirror", Layout::None),
            context_mirror: sub(self, "ContextMirror", Layout::None),
            variable_mirror: sub(self, "VariableMirror", Layout::None),
            watch: sub(self, "Watch", Layout::None),
            breakpoint: sub(self, "Breakpoint", Layout::None),
            counter: sub(self, "TraceCounter", Layout::None),
            reflect: sub(self, "Reflect", Layout::None),
            probe: sub(self, "LevelProbe", Layout::None),
        };
        self.builtins = b;
        self.globals.insert(Sym::new("Transcript"), Value::Native(Rc::new(crate::value::Native::Transcript)));
        primitives::install(self);
        let file = Sym::new("<prelude>");
        let program = parse_program(PRELUDE, file, &mut self.ids).expect("prelude parses");
        self.install_classes(&program).expect("prelude loads");
    }

    fn define_class(&mut self, name: &str, superclass: Option<ClassId>, layout: Layout) -> ClassId {
        let id = ClassId(self.classes.len() as u32);
        let name = Sym::new(name);
        let inherited = superclass.map(|s| self.classes[s.0 as usize].all_slots.clone()).unwrap_or_default();
        self.classes.push(ClassRecord {
            id,
            name,
            superclass,
            slot_names: Vec::new(),
            all_slots: inherited,
            methods: HashMap::new(),
            class_side: HashMap::new(),
            layout,
        });
        self.class_names.insert(name, id);
        self.globals.insert(name, Value::Class(id));
        id
    }

    pub fn class(&self, id: ClassId) -> &ClassRecord {
        &self.classes[id.0 as usize]
    }

    pub fn class_named(&self, name: &str) -> Option<ClassId> {
        self.class_names.get(&Sym::new(name)).copied()
    }

    pub fn class_name(&self, id: ClassId) -> Sym {
        self.class(id).name
    }

    pub fn global(&self, name: &str) -> Option<Value> {
        self.globals.get(&Sym::new(name)).cloned()
    }

    pub fn set_global(&mut self, name: &str, value: Value) {
        self.globals.insert(Sym::new(name), value);
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn take_output(&mut self) -> String {
        std::mem::take(&mut self.output)
    }

    pub fn meta_level(&self) -> u32 {
        self.meta_level
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = Stats::default();
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub(crate) fn next_serial(&mut self) -> u64 {
        self.next_serial += 1;
        self.next_serial
    }

    pub fn is_subclass(&self, class: ClassId, ancestor: ClassId) -> bool {
        let mut c = Some(class);
        while let Some(id) = c {
            if id == ancestor {
                return true;
            }
            c = self.class(id).superclass;
        }
        false
    }

    pub fn class_of(&self, value: &Value) -> ClassId {
        let b = &self.builtins;
        match value {
            Value::Nil => b.undefined,
            Value::Bool(_) => b.boolean,
            Value::Int(_) => b.integer,
            Value::Str(_) => b.string,
            Value::Symbol(_) => b.symbol,
            Value::Array(a) => a.class,
            Value::Object(o) => o.class,
            Value::Class(_) => b.class,
            Value::Block(_) => b.block,
            Value::Link(_) => b.metalink,
            Value::Mirror(m) => match &**m {
                crate::mirror::Mirror::Method { .. } => b.method_mirror,
                crate::mirror::Mirror::Node { .. } => b.node_mirror,
                crate::mirror::Mirror::Context(_) => b.context_mirror,
                crate::mirror::Mirror::Variable(_) => b.variable_mirror,
            },
            Value::Native(n) => match &**n {
                crate::value::Native::Transcript => b.transcript,
                crate::value::Native::Random(_) => b.random,
                crate::value::Native::Operation(_) => b.operation,
                crate::value::Native::Watch(_) => b.watch,
                crate::value::Native::Breakpoint(_) => b.breakpoint,
                crate::value::Native::Counter(_) => b.counter,
                crate::value::Native::LevelProbe(..) => b.probe,
            },
        }
    }

    /// Walks the superclass chain; absence is `None`, not an error.
    pub fn lookup_method(&self, class: ClassId, selector: Sym) -> Option<MethodRef> {
        self.lookup_impl(class, selector).map(|(m, owner)| match m {
            MethodImpl::Compiled(m) => MethodRef::Compiled(m),
            MethodImpl::Primitive(_) => MethodRef::Primitive { class: owner, selector },
        })
    }

    pub(crate) fn lookup_impl(&self, class: ClassId, selector: Sym) -> Option<(MethodImpl, ClassId)> {
        let mut c = Some(class);
        while let Some(id) = c {
            let record = &self.classes[id.0 as usize];
            if let Some(m) = record.methods.get(&selector) {
                return Some((m.clone(), id));
            }
            c = record.superclass;
        }
        None
    }

    pub fn method(&self, class: &str, selector: &str) -> Result<Rc<CompiledMethod>, LookupError> {
        let id = self.class_named(class).ok_or_else(|| LookupError::UnknownClass(class.to_string()))?;
        match self.lookup_method(id, Sym::new(selector)) {
            Some(MethodRef::Compiled(m)) => Ok(m),
            Some(MethodRef::Primitive { .. }) => {
                Err(LookupError::Primitive { class: class.to_string(), selector: selector.to_string() })
            }
            None => Err(LookupError::UnknownSelector { class: class.to_string(), selector: selector.to_string() }),
        }
    }

    /// The original (unwoven) tree of a method, whatever links are installed.
    pub fn method_ast(&self, class: &str, selector: &str) -> Result<Rc<Node>, LookupError> {
        Ok(self.method(class, selector)?.ast())
    }

    /// The method whose tree contains `node`.
    pub fn owning_method(&self, node: NodeId) -> Option<Rc<CompiledMethod>> {
        let (_, method) = self.methods_by_lo.range(..=node).next_back()?;
        method.covers(node).then(|| method.clone())
    }

    pub fn methods(&self) -> impl Iterator<Item = &Rc<CompiledMethod>> {
        self.methods_by_lo.values()
    }

    /// Drops cached trees of methods without links; the next access
    /// reparses from source.
    pub fn flush_ast_cache(&mut self) {
        for m in self.methods_by_lo.values() {
            m.flush_ast();
        }
    }

    fn fresh_file(&mut self) -> Sym {
        self.file_counter += 1;
        Sym::new(&format!("<program{}>", self.file_counter))
    }

    /// Parses, installs classes, then evaluates the top-level statements.
    pub fn run_program(&mut self, source: &str) -> Result<RunResult, ProgramError> {
        let file = self.fresh_file();
        self.run_program_named(source, file)
    }

    pub fn run_file(&mut self, source: &str, name: &str) -> Result<RunResult, ProgramError> {
        self.run_program_named(source, Sym::new(name))
    }

    fn run_program_named(&mut self, source: &str, file: Sym) -> Result<RunResult, ProgramError> {
        let program = parse_program(source, file, &mut self.ids)?;
        check_method(&program.body, &[])?;
        let start = self.output.len();
        let result = self.install_classes(&program).and_then(|()| self.run_body(&program.body, &program.temps));
        self.meta_level = 0;
        self.frames.clear();
        let output = self.output[start..].to_string();
        match result {
            Ok(value) => Ok(RunResult { output, outcome: Outcome::Value(value) }),
            Err(Unwind::Halt(signal)) => Ok(RunResult { output, outcome: Outcome::Halt(signal) }),
            Err(Unwind::Error(error)) => Err(ProgramError::Runtime { error: Box::new(error), output }),
            Err(Unwind::Return { .. }) => unreachable!("top-level returns are caught in run_body"),
        }
    }

    fn run_body(&mut self, body: &Rc<Node>, temps: &[Sym]) -> Result<Value, Unwind> {
        let serial = self.next_serial();
        let env = Env::new(temps.iter().map(|t| (*t, Value::Nil)).collect(), None);
        self.frames.push(Frame {
            serial,
            receiver: Value::Nil,
            class: Some(self.builtins.undefined),
            selector: Sym::new("DoIt"),
            is_block: false,
            args: Vec::new(),
            env: env.clone(),
            span: None,
            method: None,
        });
        let cx = Cx { receiver: Value::Nil, env, home: serial, class: None, method: None };
        let result = self.eval(body, &cx);
        self.frames.pop();
        match result {
            Err(Unwind::Return { home, value }) if home == serial => Ok(value),
            Err(Unwind::Return { .. }) => Err(Unwind::Error(self.error(ErrorKind::BlockCannotReturn))),
            other => other,
        }
    }

    fn install_classes(&mut self, program: &Program) -> Result<(), Unwind> {
        for class_node in &program.classes {
            let NodeKind::ClassDef { name, superclass, slots, methods } = &class_node.kind else {
                unreachable!("parser only produces class definitions here")
            };
            let class = match self.class_names.get(name).copied() {
                Some(existing) => {
                    // Reopening a class adds or replaces methods.
                    let same_super = superclass.is_none_or(|s| Some(s) == self.class(existing).superclass.map(|c| self.class_name(c)));
                    if !slots.is_empty() || !same_super {
                        return Err(self.fail(ErrorKind::Other(format!("class {name} is already defined"))));
                    }
                    existing
                }
                None => {
                    let sup_name = superclass.unwrap_or_else(|| Sym::new("Object"));
                    let sup = self.class_names.get(&sup_name).copied().ok_or_else(|| {
                        self.fail(ErrorKind::Other(format!("unknown superclass {sup_name} of {name}")))
                    })?;
                    let layout = match self.class(sup).layout {
                        Layout::Indexable => Layout::Indexable,
                        _ => Layout::Slots,
                    };
                    let inherited = &self.class(sup).all_slots;
                    if let Some(dup) = slots.iter().find(|s| inherited.contains(s)) {
                        return Err(self.fail(ErrorKind::Other(format!("slot {dup} of {name} is already defined in a superclass"))));
                    }
                    let id = self.define_class(name.as_str(), Some(sup), layout);
                    let record = &mut self.classes[id.0 as usize];
                    record.slot_names = slots.clone();
                    record.all_slots.extend(slots.iter().copied());
                    id
                }
            };
            for method in methods {
                let source = &program.source[method.span.start..method.span.end];
                self.install_method(class, method.clone(), source, method.span.start, program.file)
                    .map_err(|e| self.fail(ErrorKind::Syntax(e)))?;
            }
        }
        Ok(())
    }

    fn install_method(&mut self, class: ClassId, root: Rc<Node>, source: &str, offset: usize, file: Sym) -> Result<Rc<CompiledMethod>, SyntaxError> {
        check_method(&root, &self.class(class).all_slots)?;
        let selector = root.selector().expect("method root");
        let method = Rc::new(CompiledMethod {
            signature: MethodSignature::new(self.class_name(class), selector),
            class,
            source: Rc::from(source),
            source_offset: offset,
            file,
            lo: root.lo,
            hi: root.id,
            exec_root: root.clone(),
            ast_cache: RefCell::new(Some(root)),
            twin: RefCell::new(None),
        });
        let previous = self.classes[class.0 as usize].methods.insert(selector, MethodImpl::Compiled(method.clone()));
        if let Some(MethodImpl::Compiled(old)) = previous {
            self.retire_method(&old);
        }
        self.methods_by_lo.insert(method.lo, method.clone());
        Ok(method)
    }

    /// Detaches every link from a replaced method. Activations still running
    /// it keep their own reference to the old tree.
    fn retire_method(&mut self, old: &Rc<CompiledMethod>) {
        self.methods_by_lo.remove(&old.lo);
        self.drop_links_of_method(old);
    }

    /// Replaces a method with freshly compiled source. Links on the old
    /// tree are lost; persistent watches re-apply themselves.
    pub fn recompile(&mut self, class: ClassId, selector: Sym, new_source: &str) -> Result<Rc<CompiledMethod>, RecompileError> {
        let class_name = self.class_name(class);
        match self.class(class).methods.get(&selector) {
            Some(MethodImpl::Compiled(_)) => {}
            Some(MethodImpl::Primitive(_)) => {
                return Err(LookupError::Primitive { class: class_name.to_string(), selector: selector.to_string() }.into())
            }
            None => {
                return Err(LookupError::UnknownSelector { class: class_name.to_string(), selector: selector.to_string() }.into())
            }
        }
        let found = crate::parser::parse_method(new_source, 0, Sym::new("<scratch>"), &mut self.ids.clone())?;
        if found.selector() != Some(selector) {
            return Err(RecompileError::SelectorMismatch { expected: selector, found: found.selector().unwrap() });
        }
        self.compile_method(class, new_source)
    }

    /// Adds or replaces a method from source.
    pub fn compile_method(&mut self, class: ClassId, source: &str) -> Result<Rc<CompiledMethod>, RecompileError> {
        let file = self.fresh_file();
        let root = parse_method(source, 0, file, &mut self.ids)?;
        let method = self.install_method(class, root, source, 0, file)?;
        self.apply_recompile_rules(&method);
        Ok(method)
    }

    pub(crate) fn error(&self, kind: ErrorKind) -> RuntimeError {
        RuntimeError { span: self.frames.last().and_then(|f| f.span), trace: self.trace(), kind }
    }

    pub(crate) fn fail(&self, kind: ErrorKind) -> Unwind {
        Unwind::Error(self.error(kind))
    }

    pub(crate) fn trace(&self) -> Vec<TraceLine> {
        self.frames.iter().rev().map(|f| TraceLine { label: self.frame_label(f), span: f.span }).collect()
    }

    pub(crate) fn frame_label(&self, frame: &Frame) -> String {
        let class = frame.class.map(|c| self.class_name(c).to_string()).unwrap_or_else(|| "nil".into());
        let base = format!("{}>>{}", class, frame.selector);
        if frame.is_block {
            format!("[] in {base}")
        } else {
            base
        }
    }

    /// `printString` without running user code.
    pub fn print_string(&self, value: &Value) -> String {
        match value {
            Value::Nil => "nil".into(),
            Value::Bool(b) => b.to_string(),
            Value::Int(v) => v.to_string(),
            Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
            Value::Symbol(s) => format!("#{s}"),
            Value::Array(a) => {
                let items: Vec<String> = a.items.borrow().iter().map(|v| self.print_string(v)).collect();
                format!("{}({})", article_name(self.class_name(a.class).as_str()), items.join(" "))
            }
            Value::Object(o) => article_name(self.class_name(o.class).as_str()),
            Value::Class(c) => self.class_name(*c).to_string(),
            Value::Block(_) => "a BlockClosure".into(),
            Value::Link(l) => self.describe_link(*l),
            Value::Mirror(m) => m.describe(self),
            Value::Native(n) => self.describe_native(n),
        }
    }

    /// What `Transcript log:` writes: strings and symbols raw.
    pub fn display_string(&self, value: &Value) -> String {
        match value {
            Value::Str(s) => s.to_string(),
            Value::Symbol(s) => s.to_string(),
            other => self.print_string(other),
        }
    }
}

pub(crate) fn article_name(name: &str) -> String {
    let vowel = name.chars().next().is_some_and(|c| "AEIOUaeiou".contains(c));
    format!("{} {}", if vowel { "an" } else { "a" }, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> RunResult {
        Interpreter::new().run_program(src).unwrap()
    }

    #[test]
    fn transcript_arithmetic() {
        assert_eq!(run("Transcript log: 3 + 4").output, "7\n");
    }

    #[test]
    fn does_not_understand_names_selector() {
        let err = Interpreter::new().run_program("Object new fooBar").unwrap_err();
        let ProgramError::Runtime { error, .. } = err else { panic!() };
        assert!(matches!(error.kind, ErrorKind::DoesNotUnderstand { selector, .. } if selector.as_str() == "fooBar"));
        assert_eq!(error.trace[0].label, "UndefinedObject>>DoIt");
    }

    #[test]
    fn logcr_returns_receiver() {
        let r = run("| o | o := Object new. ^(o logCr) == o");
        assert!(matches!(r.outcome, Outcome::Value(Value::Bool(true))));
        assert_eq!(r.output, "an Object\n");
    }

    #[test]
    fn inherited_lookup_and_super() {
        let r = run(
            "class A [ f [ ^1 ] g [ ^self f ] ]
             class B extends A [ f [ ^super f + 10 ] ]
             Transcript log: B new g. Transcript log: A new g",
        );
        assert_eq!(r.output, "11\n1\n");
    }

    #[test]
    fn lookup_walks_chain_and_reports_absence() {
        let mut interp = Interpreter::new();
        interp.run_program("class A [ f [ ^1 ] ] class B extends A [ ]").unwrap();
        let b = interp.class_named("B").unwrap();
        let found = interp.lookup_method(b, Sym::new("f")).unwrap();
        assert_eq!(found.compiled().unwrap().signature.class_name.as_str(), "A");
        assert!(interp.lookup_method(b, Sym::new("nope")).is_none());
        let object = interp.class_named("Object").unwrap();
        assert!(interp.lookup_method(object, Sym::new("logCr")).unwrap().compiled().is_some());
    }

    #[test]
    fn method_ast_errors() {
        let mut interp = Interpreter::new();
        interp.run_program("class Point [ |x| x [ ^x ] ]").unwrap();
        assert!(matches!(interp.method_ast("Point", "missing"), Err(LookupError::UnknownSelector { .. })));
        assert!(matches!(interp.method_ast("Nope", "x"), Err(LookupError::UnknownClass(_))));
        assert_eq!(interp.method_ast("Object", "logCr").unwrap().selector(), Some(Sym::new("logCr")));
    }

    #[test]
    fn flushed_ast_reparses_with_same_ids() {
        let mut interp = Interpreter::new();
        interp.run_program("class P [ |x| m: a [ x := a + 1. ^x * 2 ] ]").unwrap();
        let method = interp.method("P", "m:").unwrap();
        let mut before = Vec::new();
        method.ast().walk(&mut |n| before.push((n.id, n.kind(), n.span)));
        interp.flush_ast_cache();
        assert!(!method.ast_cached());
        let mut after = Vec::new();
        method.ast().walk(&mut |n| after.push((n.id, n.kind(), n.span)));
        assert_eq!(before, after);
    }

    #[test]
    fn recompile_replaces_method() {
        let mut interp = Interpreter::new();
        interp.run_program("class P [ m [ ^1 ] ]").unwrap();
        let p = interp.class_named("P").unwrap();
        let err = interp.recompile(p, Sym::new("m"), "n [ ^2 ]").unwrap_err();
        assert!(matches!(err, RecompileError::SelectorMismatch { .. }));
        interp.recompile(p, Sym::new("m"), "m [ ^2 ]").unwrap();
        assert_eq!(interp.run_program("Transcript log: P new m").unwrap().output, "2\n");
    }

    #[test]
    fn runs_are_deterministic() {
        let src = "| r c | c := OrderedCollection new. r := Random new. 1 to: 5 do: [:i | c add: r next]. Transcript log: c";
        assert_eq!(run(src).output, run(src).output);
    }

    #[test]
    fn overflow_is_an_error() {
        let err = Interpreter::new().run_program("9223372036854775807 + 1").unwrap_err();
        assert!(matches!(err, ProgramError::Runtime { error, .. } if error.kind == ErrorKind::IntegerOverflow));
    }

    #[test]
    fn non_local_return_from_block() {
        let r = run("class A [ find [ #(1 2 3) do: [:e | e > 1 ifTrue: [^e]]. ^0 ] ] Transcript log: A new find");
        assert_eq!(r.output, "2\n");
    }

    #[test]
    fn slots_are_disjoint_from_superclass() {
        let err = Interpreter::new().run_program("class A [ |x| ] class B extends A [ |x| ]").unwrap_err();
        assert!(matches!(err, ProgramError::Runtime { .. }));
    }
}
