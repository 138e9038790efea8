//! Reifications: values a link can request from the running execution.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::ast::{Kind, Node};
use crate::mirror::{ContextSnapshot, Mirror, VariableMirror};
use crate::runtime::{CompiledMethod, Cx, Interpreter, Unwind, VarLocation};
use crate::symbol::Sym;
use crate::value::{ClassId, LinkId, Native, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReificationKind {
    Arguments,
    Class,
    Receiver,
    Entity,
    Link,
    Method,
    OriginalMethod,
    Name,
    NewValue,
    Node,
    Object,
    Operation,
    Selector,
    Sender,
    Context,
    Value,
    Variable,
}

impl ReificationKind {
    pub const ALL: [ReificationKind; 17] = [
        ReificationKind::Arguments,
        ReificationKind::Class,
        ReificationKind::Receiver,
        ReificationKind::Entity,
        ReificationKind::Link,
        ReificationKind::Method,
        ReificationKind::OriginalMethod,
        ReificationKind::Name,
        ReificationKind::NewValue,
        ReificationKind::Node,
        ReificationKind::Object,
        ReificationKind::Operation,
        ReificationKind::Selector,
        ReificationKind::Sender,
        ReificationKind::Context,
        ReificationKind::Value,
        ReificationKind::Variable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReificationKind::Arguments => "arguments",
            ReificationKind::Class => "class",
            ReificationKind::Receiver => "receiver",
            ReificationKind::Entity => "entity",
            ReificationKind::Link => "link",
            ReificationKind::Method => "method",
            ReificationKind::OriginalMethod => "originalMethod",
            ReificationKind::Name => "name",
            ReificationKind::NewValue => "newValue",
            ReificationKind::Node => "node",
            ReificationKind::Object => "object",
            ReificationKind::Operation => "operation",
            ReificationKind::Selector => "selector",
            ReificationKind::Sender => "sender",
            ReificationKind::Context => "context",
            ReificationKind::Value => "value",
            ReificationKind::Variable => "variable",
        }
    }

    /// `None` for unknown names. `index` is deliberately unknown: there are
    /// no indexed slots.
    pub fn from_name(name: &str) -> Option<ReificationKind> {
        ReificationKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The node kinds this reification can be requested on. `None` means any.
    pub fn targets(self) -> Option<&'static [Kind]> {
        use ReificationKind::*;
        match self {
            Arguments => Some(&[Kind::MessageSend, Kind::MethodDef, Kind::Block]),
            Receiver | Selector | Sender => Some(&[Kind::MessageSend, Kind::MethodDef]),
            Name | NewValue => Some(&[Kind::VarRead, Kind::Assignment]),
            Value => Some(&[Kind::VarRead, Kind::Assignment, Kind::MessageSend, Kind::Return]),
            Class | Entity | Link | Method | OriginalMethod | Node | Object | Operation | Context | Variable => None,
        }
    }

    pub fn applicable(self, node: Kind) -> bool {
        match self.targets() {
            Some(kinds) => kinds.contains(&node),
            None => true,
        }
    }
}

impl fmt::Display for ReificationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.name())
    }
}

/// Where a trigger happens relative to the node's operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Before,
    Instead,
    After,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Before => "before",
            Phase::Instead => "instead",
            Phase::After => "after",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ReifyError {
    #[error("{kind} is not available {phase} a {node} node")]
    PhaseUnavailable { kind: ReificationKind, phase: Phase, node: Kind },
    #[error("{kind} cannot be requested on {node} nodes")]
    InapplicableReification { kind: ReificationKind, node: Kind },
    #[error("operation was already invoked")]
    AlreadyInvoked,
}

/// The base operation a hook guards, captured with its operands.
#[derive(Clone)]
pub enum PendingOp {
    Send { receiver: Value, selector: Sym, args: Vec<Value>, lookup_from: Option<Option<ClassId>> },
    Read(VarLocation),
    Write(VarLocation, Value),
    /// A return: yields the value being returned.
    Yield(Value),
    /// Evaluate a subtree in the activation that reached the hook.
    Eval(Rc<Node>, Cx),
    /// Run a method body; `^` inside it ends the operation.
    MethodBody(Rc<Node>, Cx),
}

/// `#operation`: performs the captured operation at most once.
pub struct OperationWrapper {
    pub(crate) op: PendingOp,
    /// Meta level of the base code the operation belongs to.
    pub(crate) level: u32,
    invoked: Cell<bool>,
    result: RefCell<Option<Value>>,
}

impl OperationWrapper {
    pub fn new(op: PendingOp, level: u32) -> OperationWrapper {
        OperationWrapper { op, level, invoked: Cell::new(false), result: RefCell::new(None) }
    }

    pub fn invoked(&self) -> bool {
        self.invoked.get()
    }

    /// The value produced by a completed invocation.
    pub fn result(&self) -> Option<Value> {
        self.result.borrow().clone()
    }
}

/// Everything a firing link may reify. The evaluator builds one per hook
/// evaluation and shares it between the before, instead and after phases.
pub struct TriggerContext {
    /// The original node the hook wraps.
    pub node: Rc<Node>,
    pub phase: Phase,
    pub link: Option<LinkId>,
    /// `self` of the activation reaching the hook.
    pub receiver: Value,
    pub method: Option<Rc<CompiledMethod>>,
    /// Arguments of the method or block activation.
    pub activation_args: Vec<Value>,
    /// Serial of the method activation (the home of a block).
    pub home: u64,
    pub pending_receiver: Option<Value>,
    pub pending_args: Option<Vec<Value>>,
    pub pending_value: Option<Value>,
    pub variable: Option<VarLocation>,
    pub operation: Option<PendingOp>,
    /// Meta level at which the hook was reached.
    pub base_level: u32,
    wrapper: RefCell<Option<Rc<Native>>>,
}

impl TriggerContext {
    pub fn new(node: Rc<Node>, receiver: Value) -> TriggerContext {
        TriggerContext {
            node,
            phase: Phase::Before,
            link: None,
            receiver,
            method: None,
            activation_args: Vec::new(),
            home: 0,
            pending_receiver: None,
            pending_args: None,
            pending_value: None,
            variable: None,
            operation: None,
            base_level: 0,
            wrapper: RefCell::new(None),
        }
    }

    pub(crate) fn for_activation(node: Rc<Node>, cx: &Cx, base_level: u32) -> TriggerContext {
        let mut ctx = TriggerContext::new(node, cx.receiver.clone());
        ctx.method = cx.method.clone();
        ctx.home = cx.home;
        ctx.base_level = base_level;
        ctx
    }

    fn operation_value(&self) -> Value {
        let Some(op) = &self.operation else { return Value::Nil };
        let mut slot = self.wrapper.borrow_mut();
        let native = slot
            .get_or_insert_with(|| Rc::new(Native::Operation(OperationWrapper::new(op.clone(), self.base_level))));
        Value::Native(native.clone())
    }

    /// Result of the operation if a link already invoked it.
    pub(crate) fn performed(&self) -> Option<Value> {
        match self.wrapper.borrow().as_deref() {
            Some(Native::Operation(w)) if w.invoked() => Some(w.result().unwrap_or(Value::Nil)),
            _ => None,
        }
    }
}

impl Interpreter {
    /// Resolves one reification. Never changes observable program state;
    /// `#operation` only wraps the operation.
    pub fn resolve(&self, kind: ReificationKind, ctx: &TriggerContext) -> Result<Value, ReifyError> {
        let node_kind = ctx.node.kind();
        if !kind.applicable(node_kind) {
            return Err(ReifyError::InapplicableReification { kind, node: node_kind });
        }
        let unavailable = || ReifyError::PhaseUnavailable { kind, phase: ctx.phase, node: node_kind };
        use ReificationKind as R;
        Ok(match kind {
            R::Arguments => {
                let args = match node_kind {
                    Kind::MessageSend => ctx.pending_args.clone().ok_or_else(unavailable)?,
                    _ => ctx.activation_args.clone(),
                };
                self.new_array(self.builtins.array, args)
            }
            R::Class => Value::Class(self.class_of(&ctx.receiver)),
            R::Receiver => match node_kind {
                Kind::MessageSend => ctx.pending_receiver.clone().ok_or_else(unavailable)?,
                _ => ctx.receiver.clone(),
            },
            R::Entity | R::OriginalMethod => match &ctx.method {
                Some(m) => Value::Mirror(Rc::new(Mirror::method(m.clone(), m.ast()))),
                None => Value::Nil,
            },
            R::Method => match &ctx.method {
                Some(m) => Value::Mirror(Rc::new(Mirror::method(m.clone(), m.executable()))),
                None => Value::Nil,
            },
            R::Link => ctx.link.map(Value::Link).unwrap_or(Value::Nil),
            R::Name => ctx.node.var_name().map(Value::Symbol).unwrap_or(Value::Nil),
            R::NewValue => match node_kind {
                Kind::Assignment => ctx.pending_value.clone().ok_or_else(unavailable)?,
                _ => return Err(unavailable()),
            },
            R::Value => {
                let ready = match node_kind {
                    Kind::MessageSend | Kind::VarRead => ctx.phase == Phase::After,
                    _ => true,
                };
                if !ready {
                    return Err(unavailable());
                }
                ctx.pending_value.clone().ok_or_else(unavailable)?
            }
            R::Node => Value::Mirror(Rc::new(Mirror::Node { node: ctx.node.clone(), method: ctx.method.clone() })),
            R::Object => ctx.receiver.clone(),
            R::Operation => ctx.operation_value(),
            R::Selector => ctx.node.selector().map(Value::Symbol).unwrap_or(Value::Nil),
            R::Sender => self.sender_mirror(ctx.home),
            R::Context => match self.frames.len() {
                0 => Value::Nil,
                n => Value::Mirror(Rc::new(Mirror::Context(self.context_snapshot(n - 1)))),
            },
            R::Variable => match (&ctx.variable, ctx.node.var_name()) {
                (Some(location), Some(name)) => {
                    Value::Mirror(Rc::new(Mirror::Variable(VariableMirror { name, location: location.clone() })))
                }
                _ => Value::Nil,
            },
        })
    }

    /// Context mirror of the activation that called the method with `home`.
    fn sender_mirror(&self, home: u64) -> Value {
        match self.frames.iter().rposition(|f| f.serial == home && !f.is_block) {
            Some(index) if index > 0 => Value::Mirror(Rc::new(Mirror::Context(self.context_snapshot(index - 1)))),
            _ => Value::Nil,
        }
    }

    pub(crate) fn context_snapshot(&self, index: usize) -> ContextSnapshot {
        let frame = &self.frames[index];
        let mut temps = Vec::new();
        let mut env = Some(frame.env.clone());
        while let Some(e) = env {
            temps.extend(e.snapshot());
            env = e.parent.clone();
        }
        ContextSnapshot {
            label: self.frame_label(frame),
            receiver: frame.receiver.clone(),
            selector: frame.selector,
            class: frame.class,
            is_block: frame.is_block,
            arguments: frame.args.clone(),
            temps,
            span: frame.span,
            sender: (index > 0).then(|| Rc::new(self.context_snapshot(index - 1))),
        }
    }

    /// Performs a wrapped operation at the meta level of its base code.
    pub fn invoke_operation(&mut self, wrapper: &OperationWrapper) -> Result<Value, Unwind> {
        if wrapper.invoked.replace(true) {
            return Err(self.fail(ReifyError::AlreadyInvoked.into()));
        }
        let saved = self.meta_level;
        self.meta_level = wrapper.level;
        let result = self.perform_op(&wrapper.op);
        self.meta_level = saved;
        if let Ok(v) = &result {
            *wrapper.result.borrow_mut() = Some(v.clone());
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        assert!(ReificationKind::Receiver.applicable(Kind::MessageSend));
        assert!(!ReificationKind::Name.applicable(Kind::MessageSend));
        for kind in Kind::ALL {
            assert!(ReificationKind::Link.applicable(kind));
        }
        assert!(ReificationKind::Arguments.applicable(Kind::Block));
        assert!(!ReificationKind::Sender.applicable(Kind::Block));
        assert!(ReificationKind::Value.applicable(Kind::Return));
    }

    #[test]
    fn names_round_trip_and_index_is_unknown() {
        for kind in ReificationKind::ALL {
            assert_eq!(ReificationKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(ReificationKind::from_name("index"), None);
    }
}
