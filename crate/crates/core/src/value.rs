//! Runtime values.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::ast::Node;
use crate::mirror::Mirror;
use crate::reify::OperationWrapper;
use crate::runtime::CompiledMethod;
use crate::symbol::Sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

#[derive(Clone)]
pub enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Str(Rc<str>),
    Symbol(Sym),
    Array(Rc<ArrayObj>),
    Object(Rc<Instance>),
    Class(ClassId),
    Block(Rc<Closure>),
    Link(LinkId),
    Mirror(Rc<Mirror>),
    Native(Rc<Native>),
}

/// Backs both `Array` and `OrderedCollection` (and their subclasses).
pub struct ArrayObj {
    pub class: ClassId,
    pub items: RefCell<Vec<Value>>,
}

pub struct Instance {
    pub class: ClassId,
    pub slots: RefCell<Vec<Value>>,
}

pub struct Closure {
    /// A `Block` node, or a `MetaHook` wrapping one when the block is linked.
    pub node: Rc<Node>,
    pub env: Rc<Env>,
    pub receiver: Value,
    /// Serial of the activation a `^` inside the block returns from.
    pub home: u64,
    pub class: Option<ClassId>,
    pub method: Option<Rc<CompiledMethod>>,
}

/// One lexical scope: method or block parameters and temporaries.
pub struct Env {
    pub vars: RefCell<Vec<(Sym, Value)>>,
    pub parent: Option<Rc<Env>>,
}

impl Env {
    pub fn new(vars: Vec<(Sym, Value)>, parent: Option<Rc<Env>>) -> Rc<Env> {
        Rc::new(Env { vars: RefCell::new(vars), parent })
    }

    pub fn snapshot(&self) -> Vec<(Sym, Value)> {
        self.vars.borrow().clone()
    }
}

/// Host-implemented objects.
pub enum Native {
    Transcript,
    Random(Box<RefCell<ChaCha8Rng>>),
    Operation(OperationWrapper),
    Watch(usize),
    Breakpoint(usize),
    Counter(usize),
    /// Records the meta level at each activation; used by level tests.
    LevelProbe(RefCell<Vec<u32>>, Cell<u64>),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn sym(s: &str) -> Value {
        Value::Symbol(Sym::new(s))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Value::Nil)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Address of a heap-allocated value, for identity-keyed tables.
    pub fn identity(&self) -> Option<usize> {
        match self {
            Value::Str(s) => Some(Rc::as_ptr(s) as *const u8 as usize),
            Value::Array(a) => Some(Rc::as_ptr(a) as usize),
            Value::Object(o) => Some(Rc::as_ptr(o) as usize),
            Value::Block(b) => Some(Rc::as_ptr(b) as usize),
            Value::Mirror(m) => Some(Rc::as_ptr(m) as usize),
            Value::Native(n) => Some(Rc::as_ptr(n) as usize),
            _ => None,
        }
    }

    /// `==` in the language.
    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Symbol(a), Value::Symbol(b)) => a == b,
            (Value::Class(a), Value::Class(b)) => a == b,
            (Value::Link(a), Value::Link(b)) => a == b,
            _ => match (self.identity(), other.identity()) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        }
    }

    /// `=` in the language: structural for strings, integers and symbols.
    pub fn equals(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Str(a), Value::Symbol(b)) | (Value::Symbol(b), Value::Str(a)) => &**a == b.as_str(),
            (Value::Array(a), Value::Array(b)) => {
                let (x, y) = (a.items.borrow(), b.items.borrow());
                a.class == b.class && x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| p.equals(q))
            }
            _ => self.identical(other),
        }
    }

    /// Whether this value can scope an object-centric link.
    pub fn has_stable_identity(&self) -> bool {
        matches!(self, Value::Object(_) | Value::Array(_) | Value::Class(_) | Value::Block(_) | Value::Native(_))
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Symbol(s) => write!(f, "{s:?}"),
            Value::Array(a) => write!(f, "Array{:?}", a.items.borrow()),
            Value::Object(o) => write!(f, "Object(class {}, {:p})", o.class.0, Rc::as_ptr(o)),
            Value::Class(c) => write!(f, "Class({})", c.0),
            Value::Block(_) => f.write_str("Block"),
            Value::Link(l) => write!(f, "Link({})", l.0),
            Value::Mirror(_) => f.write_str("Mirror"),
            Value::Native(_) => f.write_str("Native"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_versus_equality() {
        let a = Value::str("abc");
        let b = Value::str("abc");
        assert!(!a.identical(&b));
        assert!(a.equals(&b));
        assert!(a.identical(&a.clone()));
        assert!(Value::Int(3).identical(&Value::Int(3)));
        assert!(Value::sym("x").identical(&Value::sym("x")));
    }
}
