//! Mirrors: read-only views of methods, nodes, activations and variables
//! handed to programs.

use std::rc::Rc;

use crate::ast::{unparse, Kind, Node, SourceSpan};
use crate::runtime::{CompiledMethod, Interpreter, VarLocation};
use crate::symbol::Sym;
use crate::value::{ClassId, Value};

pub enum Mirror {
    /// A method seen through one of its trees: the original one, or the
    /// woven twin for `#method`.
    Method { method: Rc<CompiledMethod>, root: Rc<Node> },
    Node { node: Rc<Node>, method: Option<Rc<CompiledMethod>> },
    Context(ContextSnapshot),
    Variable(VariableMirror),
}

impl Mirror {
    pub fn method(method: Rc<CompiledMethod>, root: Rc<Node>) -> Mirror {
        Mirror::Method { method, root }
    }

    /// Whether the viewed tree contains hooks.
    pub fn is_woven(&self) -> bool {
        match self {
            Mirror::Method { root, .. } | Mirror::Node { node: root, .. } => root.count_kind(Kind::MetaHook) > 0,
            _ => false,
        }
    }

    pub fn node(&self) -> Option<&Rc<Node>> {
        match self {
            Mirror::Method { root, .. } => Some(root),
            Mirror::Node { node, .. } => Some(node),
            _ => None,
        }
    }

    pub fn describe(&self, interp: &Interpreter) -> String {
        match self {
            Mirror::Method { method, .. } => format!("a MethodMirror({})", method.signature),
            Mirror::Node { node, .. } => format!("a NodeMirror({} {})", node.kind(), unparse(node)),
            Mirror::Context(c) => format!("a ContextMirror({})", c.label),
            Mirror::Variable(v) => {
                format!("a VariableMirror({} {} = {})", v.kind_name(), v.name, interp.print_string(&v.read(interp)))
            }
        }
    }
}

/// A frozen view of one activation.
#[derive(Clone)]
pub struct ContextSnapshot {
    pub label: String,
    pub receiver: Value,
    pub selector: Sym,
    pub class: Option<ClassId>,
    pub is_block: bool,
    pub arguments: Vec<Value>,
    /// Arguments and temporaries, innermost scope first.
    pub temps: Vec<(Sym, Value)>,
    pub span: Option<SourceSpan>,
    pub sender: Option<Rc<ContextSnapshot>>,
}

impl ContextSnapshot {
    pub fn temp(&self, name: &str) -> Option<&Value> {
        let name = Sym::new(name);
        self.temps.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Labels of this activation and its senders.
    pub fn chain(&self) -> Vec<String> {
        let mut out = vec![self.label.clone()];
        let mut next = self.sender.clone();
        while let Some(c) = next {
            out.push(c.label.clone());
            next = c.sender.clone();
        }
        out
    }
}

#[derive(Clone)]
pub struct VariableMirror {
    pub name: Sym,
    pub location: VarLocation,
}

impl VariableMirror {
    pub fn kind_name(&self) -> &'static str {
        match self.location {
            VarLocation::Temp { .. } => "temp",
            VarLocation::Slot { .. } => "slot",
            VarLocation::Global(_) => "global",
        }
    }

    pub fn read(&self, interp: &Interpreter) -> Value {
        interp.read_location(&self.location)
    }

    /// The object owning a slot; nil for temps and globals.
    pub fn holder(&self) -> Value {
        match &self.location {
            VarLocation::Slot { object, .. } => Value::Object(object.clone()),
            _ => Value::Nil,
        }
    }
}
