//! Host-implemented methods of the builtin classes.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{block_arity, ErrorKind, HaltSignal, Interpreter, Layout, MethodImpl, MethodRef, PrimFn, Unwind};
use crate::ast::{find_nodes, unparse, Kind, Node, NodeKind, NodeQuery};
use crate::metalink::{Condition, Control, LinkError};
use crate::mirror::Mirror;
use crate::symbol::Sym;
use crate::tools::BreakpointSite;
use crate::value::{ArrayObj, ClassId, Instance, LinkId, Native, Value};

type R = Result<Value, Unwind>;

fn def(interp: &mut Interpreter, class: ClassId, selector: &str, f: PrimFn) {
    interp.classes[class.0 as usize].methods.insert(Sym::new(selector), MethodImpl::Primitive(f));
}

fn def_class_side(interp: &mut Interpreter, class: ClassId, selector: &str, f: PrimFn) {
    interp.classes[class.0 as usize].class_side.insert(Sym::new(selector), f);
}

fn wrong_type(interp: &Interpreter, selector: &str, expected: &'static str) -> Unwind {
    interp.fail(ErrorKind::WrongArgumentType { selector: Sym::new(selector), expected })
}

fn int_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<i64, Unwind> {
    v.as_int().ok_or_else(|| wrong_type(interp, selector, "an Integer"))
}

fn bool_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<bool, Unwind> {
    match v {
        Value::Bool(b) => Ok(*b),
        _ => Err(wrong_type(interp, selector, "a Boolean")),
    }
}

fn text_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<String, Unwind> {
    match v {
        Value::Str(s) => Ok(s.to_string()),
        Value::Symbol(s) => Ok(s.as_str().to_string()),
        _ => Err(wrong_type(interp, selector, "a String")),
    }
}

fn sym_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<Sym, Unwind> {
    match v {
        Value::Str(s) => Ok(Sym::new(s)),
        Value::Symbol(s) => Ok(*s),
        _ => Err(wrong_type(interp, selector, "a Symbol")),
    }
}

fn array_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<Rc<ArrayObj>, Unwind> {
    match v {
        Value::Array(a) => Ok(a.clone()),
        _ => Err(wrong_type(interp, selector, "a collection")),
    }
}

fn class_arg(interp: &Interpreter, v: &Value, selector: &str) -> Result<ClassId, Unwind> {
    match v {
        Value::Class(c) => Ok(*c),
        Value::Symbol(_) | Value::Str(_) => {
            let name = text_of(interp, v, selector)?;
            interp.class_named(&name).ok_or_else(|| interp.fail(ErrorKind::Other(format!("unknown class {name}"))))
        }
        _ => Err(wrong_type(interp, selector, "a class or class name")),
    }
}

fn link_err(interp: &Interpreter, e: LinkError) -> Unwind {
    interp.fail(ErrorKind::Link(e))
}

fn items(v: &Value) -> Vec<Value> {
    match v {
        Value::Array(a) => a.items.borrow().clone(),
        _ => Vec::new(),
    }
}

fn checked(interp: &Interpreter, v: Option<i64>) -> R {
    v.map(Value::Int).ok_or_else(|| interp.fail(ErrorKind::IntegerOverflow))
}

fn nonzero(interp: &Interpreter, v: i64) -> Result<i64, Unwind> {
    if v == 0 {
        Err(interp.fail(ErrorKind::ZeroDivide))
    } else {
        Ok(v)
    }
}

pub(super) fn install(interp: &mut Interpreter) {
    object(interp);
    class(interp);
    boolean(interp);
    integer(interp);
    strings(interp);
    collections(interp);
    blocks(interp);
    transcript(interp);
    random(interp);
    halt(interp);
    metalink(interp);
    mirrors(interp);
    tools(interp);
}

fn object(interp: &mut Interpreter) {
    let c = interp.builtins.object;
    def(interp, c, "==", |_, r, a| Ok(Value::Bool(r.identical(&a[0]))));
    def(interp, c, "~~", |_, r, a| Ok(Value::Bool(!r.identical(&a[0]))));
    def(interp, c, "=", |_, r, a| Ok(Value::Bool(r.equals(&a[0]))));
    def(interp, c, "~=", |_, r, a| Ok(Value::Bool(!r.equals(&a[0]))));
    def(interp, c, "printString", |i, r, _| Ok(Value::str(&i.print_string(r))));
    def(interp, c, "displayString", |i, r, _| Ok(Value::str(&i.display_string(r))));
    def(interp, c, "class", |i, r, _| Ok(Value::Class(i.class_of(r))));
    def(interp, c, "isNil", |_, r, _| Ok(Value::Bool(r.is_nil())));
    def(interp, c, "notNil", |_, r, _| Ok(Value::Bool(!r.is_nil())));
    def(interp, c, "ifNil:", |i, r, a| if r.is_nil() { i.call_value(&a[0], vec![]) } else { Ok(r.clone()) });
    def(interp, c, "ifNotNil:", |i, r, a| if r.is_nil() { Ok(Value::Nil) } else { call_with_optional(i, &a[0], r) });
    def(interp, c, "ifNil:ifNotNil:", |i, r, a| {
        if r.is_nil() {
            i.call_value(&a[0], vec![])
        } else {
            call_with_optional(i, &a[1], r)
        }
    });
    def(interp, c, "yourself", |_, r, _| Ok(r.clone()));
    def(interp, c, "value", |_, r, _| Ok(r.clone()));
    def(interp, c, "halt", |i, _, _| {
        let halt = Value::Class(i.builtins.halt);
        i.send(halt, Sym::new("now"), vec![])
    });
    def(interp, c, "respondsTo:", |i, r, a| {
        let selector = sym_of(i, &a[0], "respondsTo:")?;
        Ok(Value::Bool(i.responds_to(r, selector)))
    });
    def(interp, c, "isKindOf:", |i, r, a| {
        let class = class_arg(i, &a[0], "isKindOf:")?;
        Ok(Value::Bool(i.is_subclass(i.class_of(r), class)))
    });
    def(interp, c, "isMemberOf:", |i, r, a| {
        let class = class_arg(i, &a[0], "isMemberOf:")?;
        Ok(Value::Bool(i.class_of(r) == class))
    });
    def(interp, c, "perform:", |i, r, a| {
        let selector = sym_of(i, &a[0], "perform:")?;
        i.send(r.clone(), selector, vec![])
    });
    def(interp, c, "perform:with:", |i, r, a| {
        let selector = sym_of(i, &a[0], "perform:with:")?;
        i.send(r.clone(), selector, vec![a[1].clone()])
    });
    def(interp, c, "perform:with:with:", |i, r, a| {
        let selector = sym_of(i, &a[0], "perform:with:with:")?;
        i.send(r.clone(), selector, vec![a[1].clone(), a[2].clone()])
    });
    def(interp, c, "perform:withArguments:", |i, r, a| {
        let selector = sym_of(i, &a[0], "perform:withArguments:")?;
        i.send(r.clone(), selector, items(&a[1]))
    });
    def(interp, c, "instVarNamed:", |i, r, a| {
        let name = sym_of(i, &a[0], "instVarNamed:")?;
        match r {
            Value::Object(o) => match i.class(o.class).all_slots.iter().position(|s| *s == name) {
                Some(index) => Ok(o.slots.borrow()[index].clone()),
                None => Err(i.fail(ErrorKind::UndefinedVariable(name))),
            },
            _ => Err(i.fail(ErrorKind::UndefinedVariable(name))),
        }
    });
    def(interp, c, "instVarNamed:put:", |i, r, a| {
        let name = sym_of(i, &a[0], "instVarNamed:put:")?;
        match r {
            Value::Object(o) => match i.class(o.class).all_slots.iter().position(|s| *s == name) {
                Some(index) => {
                    o.slots.borrow_mut()[index] = a[1].clone();
                    Ok(a[1].clone())
                }
                None => Err(i.fail(ErrorKind::UndefinedVariable(name))),
            },
            _ => Err(i.fail(ErrorKind::UndefinedVariable(name))),
        }
    });
    def(interp, c, "error:", |i, _, a| Err(i.fail(ErrorKind::Other(i.display_string(&a[0])))));
    def(interp, c, "assert:", |i, r, a| {
        let ok = match &a[0] {
            Value::Bool(b) => *b,
            other => matches!(i.call_value(other, vec![])?, Value::Bool(true)),
        };
        if ok {
            Ok(r.clone())
        } else {
            Err(i.fail(ErrorKind::Other("assertion failed".into())))
        }
    });
    def(interp, c, "inspect", |i, r, _| {
        let line = format!("inspect: {}\n", i.print_string(r));
        i.output.push_str(&line);
        Ok(r.clone())
    });
}

fn call_with_optional(interp: &mut Interpreter, block: &Value, arg: &Value) -> R {
    match block {
        Value::Block(b) if block_arity(&b.node) == 0 => interp.call_block(b, vec![]),
        other => interp.call_value(other, vec![arg.clone()]),
    }
}

fn instantiate(interp: &mut Interpreter, class: ClassId, size: usize) -> R {
    match interp.class(class).layout {
        Layout::Slots => {
            let slots = vec![Value::Nil; interp.class(class).all_slots.len()];
            Ok(Value::Object(Rc::new(Instance { class, slots: RefCell::new(slots) })))
        }
        Layout::Indexable => Ok(interp.new_array(class, vec![Value::Nil; size])),
        Layout::Random => {
            let seed = interp.rng.next_u64();
            Ok(Value::Native(Rc::new(Native::Random(Box::new(RefCell::new(ChaCha8Rng::seed_from_u64(seed)))))))
        }
        Layout::MetaLink => Ok(Value::Link(interp.new_link())),
        Layout::None => Err(interp.fail(ErrorKind::NotInstantiable(interp.class_name(class)))),
    }
}

fn class(interp: &mut Interpreter) {
    let c = interp.builtins.class;
    def(interp, c, "new", |i, r, _| match r {
        Value::Class(class) => instantiate(i, *class, 0),
        _ => Err(wrong_type(i, "new", "a class")),
    });
    def(interp, c, "new:", |i, r, a| {
        let size = int_of(i, &a[0], "new:")?;
        match r {
            Value::Class(class) if size >= 0 => instantiate(i, *class, size as usize),
            _ => Err(wrong_type(i, "new:", "a non-negative Integer")),
        }
    });
    def(interp, c, "name", |i, r, _| match r {
        Value::Class(class) => Ok(Value::str(i.class_name(*class).as_str())),
        _ => Ok(Value::Nil),
    });
    def(interp, c, "superclass", |i, r, _| match r {
        Value::Class(class) => Ok(i.class(*class).superclass.map(Value::Class).unwrap_or(Value::Nil)),
        _ => Ok(Value::Nil),
    });
    def(interp, c, "inheritsFrom:", |i, r, a| {
        let other = class_arg(i, &a[0], "inheritsFrom:")?;
        match r {
            Value::Class(class) => Ok(Value::Bool(*class != other && i.is_subclass(*class, other))),
            _ => Ok(Value::Bool(false)),
        }
    });
    def(interp, c, "lookupSelector:", |i, r, a| {
        let selector = sym_of(i, &a[0], "lookupSelector:")?;
        let Value::Class(class) = r else { return Ok(Value::Nil) };
        match i.lookup_method(*class, selector) {
            Some(MethodRef::Compiled(m)) => {
                let root = m.ast();
                Ok(Value::Mirror(Rc::new(Mirror::method(m, root))))
            }
            _ => Ok(Value::Nil),
        }
    });
    def(interp, c, "includesSelector:", |i, r, a| {
        let selector = sym_of(i, &a[0], "includesSelector:")?;
        let Value::Class(class) = r else { return Ok(Value::Bool(false)) };
        Ok(Value::Bool(i.class(*class).methods.contains_key(&selector)))
    });
    def(interp, c, "selectors", |i, r, _| {
        let Value::Class(class) = r else { return Ok(Value::Nil) };
        let mut names: Vec<&str> = i.class(*class).methods.keys().map(|s| s.as_str()).collect();
        names.sort_unstable();
        let values = names.into_iter().map(Value::sym).collect();
        Ok(i.new_array(i.builtins.array, values))
    });
    def(interp, c, "slotNames", |i, r, _| {
        let Value::Class(class) = r else { return Ok(Value::Nil) };
        let values = i.class(*class).all_slots.iter().map(|s| Value::Symbol(*s)).collect();
        Ok(i.new_array(i.builtins.array, values))
    });
    def(interp, c, "compile:", |i, r, a| {
        let source = text_of(i, &a[0], "compile:")?;
        let Value::Class(class) = r else { return Err(wrong_type(i, "compile:", "a class")) };
        match i.compile_method(*class, &source) {
            Ok(m) => {
                let root = m.ast();
                Ok(Value::Mirror(Rc::new(Mirror::method(m, root))))
            }
            Err(e) => Err(i.fail(ErrorKind::Other(e.to_string()))),
        }
    });
    def(interp, c, "browse", |i, r, _| {
        let line = format!("browse: {}\n", i.print_string(r));
        i.output.push_str(&line);
        Ok(r.clone())
    });
}

fn boolean(interp: &mut Interpreter) {
    let c = interp.builtins.boolean;
    def(interp, c, "ifTrue:", |i, r, a| if bool_of(i, r, "ifTrue:")? { i.call_value(&a[0], vec![]) } else { Ok(Value::Nil) });
    def(interp, c, "ifFalse:", |i, r, a| if bool_of(i, r, "ifFalse:")? { Ok(Value::Nil) } else { i.call_value(&a[0], vec![]) });
    def(interp, c, "ifTrue:ifFalse:", |i, r, a| {
        let branch = if bool_of(i, r, "ifTrue:ifFalse:")? { &a[0] } else { &a[1] };
        i.call_value(branch, vec![])
    });
    def(interp, c, "ifFalse:ifTrue:", |i, r, a| {
        let branch = if bool_of(i, r, "ifFalse:ifTrue:")? { &a[1] } else { &a[0] };
        i.call_value(branch, vec![])
    });
    def(interp, c, "and:", |i, r, a| if bool_of(i, r, "and:")? { i.call_value(&a[0], vec![]) } else { Ok(Value::Bool(false)) });
    def(interp, c, "or:", |i, r, a| if bool_of(i, r, "or:")? { Ok(Value::Bool(true)) } else { i.call_value(&a[0], vec![]) });
    def(interp, c, "not", |i, r, _| Ok(Value::Bool(!bool_of(i, r, "not")?)));
    def(interp, c, "&", |i, r, a| Ok(Value::Bool(bool_of(i, r, "&")? & bool_of(i, &a[0], "&")?)));
    def(interp, c, "|", |i, r, a| Ok(Value::Bool(bool_of(i, r, "|")? | bool_of(i, &a[0], "|")?)));
}

macro_rules! int_binary {
    ($interp:expr, $class:expr, $sel:literal, |$i:ident, $x:ident, $y:ident| $body:expr) => {
        def($interp, $class, $sel, |$i, r, a| {
            let $x = int_of($i, r, $sel)?;
            let $y = int_of($i, &a[0], $sel)?;
            $body
        });
    };
}

fn integer(interp: &mut Interpreter) {
    let c = interp.builtins.integer;
    int_binary!(interp, c, "+", |i, x, y| checked(i, x.checked_add(y)));
    int_binary!(interp, c, "-", |i, x, y| checked(i, x.checked_sub(y)));
    int_binary!(interp, c, "*", |i, x, y| checked(i, x.checked_mul(y)));
    int_binary!(interp, c, "/", |i, x, y| checked(i, x.checked_div_euclid(nonzero(i, y)?)));
    int_binary!(interp, c, "//", |i, x, y| {
        let y = nonzero(i, y)?;
        let q = x.checked_div(y);
        checked(i, q.map(|q| if (x % y != 0) && ((x < 0) != (y < 0)) { q - 1 } else { q }))
    });
    int_binary!(interp, c, "\\\\", |i, x, y| {
        let y = nonzero(i, y)?;
        let m = x.checked_rem(y);
        checked(i, m.map(|m| if m != 0 && ((m < 0) != (y < 0)) { m + y } else { m }))
    });
    int_binary!(interp, c, "rem:", |i, x, y| checked(i, x.checked_rem(nonzero(i, y)?)));
    int_binary!(interp, c, "quo:", |i, x, y| checked(i, x.checked_div(nonzero(i, y)?)));
    int_binary!(interp, c, "<", |_i, x, y| Ok(Value::Bool(x < y)));
    int_binary!(interp, c, ">", |_i, x, y| Ok(Value::Bool(x > y)));
    int_binary!(interp, c, "<=", |_i, x, y| Ok(Value::Bool(x <= y)));
    int_binary!(interp, c, ">=", |_i, x, y| Ok(Value::Bool(x >= y)));
    int_binary!(interp, c, "max:", |_i, x, y| Ok(Value::Int(x.max(y))));
    int_binary!(interp, c, "min:", |_i, x, y| Ok(Value::Int(x.min(y))));
    int_binary!(interp, c, "bitAnd:", |_i, x, y| Ok(Value::Int(x & y)));
    int_binary!(interp, c, "bitOr:", |_i, x, y| Ok(Value::Int(x | y)));
    int_binary!(interp, c, "bitXor:", |_i, x, y| Ok(Value::Int(x ^ y)));
    int_binary!(interp, c, "gcd:", |_i, x, y| {
        let (mut a, mut b) = (x.unsigned_abs(), y.unsigned_abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        Ok(Value::Int(a as i64))
    });
    def(interp, c, "abs", |i, r, _| checked(i, int_of(i, r, "abs")?.checked_abs()));
    def(interp, c, "negated", |i, r, _| checked(i, int_of(i, r, "negated")?.checked_neg()));
    def(interp, c, "squared", |i, r, _| {
        let x = int_of(i, r, "squared")?;
        checked(i, x.checked_mul(x))
    });
    def(interp, c, "sqrtFloor", |i, r, _| {
        let x = int_of(i, r, "sqrtFloor")?;
        if x < 0 {
            return Err(wrong_type(i, "sqrtFloor", "a non-negative Integer"));
        }
        let mut s = (x as f64).sqrt() as i64;
        while s * s > x {
            s -= 1;
        }
        while (s + 1) * (s + 1) <= x {
            s += 1;
        }
        Ok(Value::Int(s))
    });
    def(interp, c, "even", |i, r, _| Ok(Value::Bool(int_of(i, r, "even")? % 2 == 0)));
    def(interp, c, "odd", |i, r, _| Ok(Value::Bool(int_of(i, r, "odd")? % 2 != 0)));
    def(interp, c, "isZero", |i, r, _| Ok(Value::Bool(int_of(i, r, "isZero")? == 0)));
    def(interp, c, "asString", |i, r, _| Ok(Value::str(&int_of(i, r, "asString")?.to_string())));
    def(interp, c, "between:and:", |i, r, a| {
        let x = int_of(i, r, "between:and:")?;
        let lo = int_of(i, &a[0], "between:and:")?;
        let hi = int_of(i, &a[1], "between:and:")?;
        Ok(Value::Bool(lo <= x && x <= hi))
    });
    def(interp, c, "to:do:", |i, r, a| {
        let from = int_of(i, r, "to:do:")?;
        let to = int_of(i, &a[0], "to:do:")?;
        let mut k = from;
        while k <= to {
            i.call_value(&a[1], vec![Value::Int(k)])?;
            k += 1;
        }
        Ok(r.clone())
    });
    def(interp, c, "to:by:do:", |i, r, a| {
        let from = int_of(i, r, "to:by:do:")?;
        let to = int_of(i, &a[0], "to:by:do:")?;
        let step = nonzero(i, int_of(i, &a[1], "to:by:do:")?)?;
        let mut k = from;
        while (step > 0 && k <= to) || (step < 0 && k >= to) {
            i.call_value(&a[2], vec![Value::Int(k)])?;
            k = match k.checked_add(step) {
                Some(next) => next,
                None => break,
            };
        }
        Ok(r.clone())
    });
    def(interp, c, "timesRepeat:", |i, r, a| {
        let n = int_of(i, r, "timesRepeat:")?;
        for _ in 0..n.max(0) {
            i.call_value(&a[0], vec![])?;
        }
        Ok(r.clone())
    });
}

fn strings(interp: &mut Interpreter) {
    let s = interp.builtins.string;
    def(interp, s, ",", |i, r, a| {
        let mut out = text_of(i, r, ",")?;
        out.push_str(&text_of(i, &a[0], ",")?);
        Ok(Value::str(&out))
    });
    def(interp, s, "size", |i, r, _| Ok(Value::Int(text_of(i, r, "size")?.chars().count() as i64)));
    def(interp, s, "at:", |i, r, a| {
        let text = text_of(i, r, "at:")?;
        let index = int_of(i, &a[0], "at:")?;
        let size = text.chars().count();
        match usize::try_from(index).ok().filter(|&k| k >= 1).and_then(|k| text.chars().nth(k - 1)) {
            Some(ch) => Ok(Value::str(&ch.to_string())),
            None => Err(i.fail(ErrorKind::IndexOutOfBounds { index, size })),
        }
    });
    def(interp, s, "asSymbol", |i, r, _| Ok(Value::Symbol(sym_of(i, r, "asSymbol")?)));
    def(interp, s, "asString", |_, r, _| Ok(r.clone()));
    def(interp, s, "isEmpty", |i, r, _| Ok(Value::Bool(text_of(i, r, "isEmpty")?.is_empty())));
    def(interp, s, "notEmpty", |i, r, _| Ok(Value::Bool(!text_of(i, r, "notEmpty")?.is_empty())));
    def(interp, s, "includesSubstring:", |i, r, a| {
        let text = text_of(i, r, "includesSubstring:")?;
        Ok(Value::Bool(text.contains(&text_of(i, &a[0], "includesSubstring:")?)))
    });
    def(interp, s, "reversed", |i, r, _| Ok(Value::str(&text_of(i, r, "reversed")?.chars().rev().collect::<String>())));
    def(interp, s, "asUppercase", |i, r, _| Ok(Value::str(&text_of(i, r, "asUppercase")?.to_uppercase())));
    def(interp, s, "asLowercase", |i, r, _| Ok(Value::str(&text_of(i, r, "asLowercase")?.to_lowercase())));
    def(interp, s, "asInteger", |i, r, _| Ok(text_of(i, r, "asInteger")?.trim().parse::<i64>().map(Value::Int).unwrap_or(Value::Nil)));
    def(interp, s, "<", |i, r, a| Ok(Value::Bool(text_of(i, r, "<")? < text_of(i, &a[0], "<")?)));

    let y = interp.builtins.symbol;
    def(interp, y, "asString", |i, r, _| Ok(Value::str(&text_of(i, r, "asString")?)));
    def(interp, y, "asSymbol", |_, r, _| Ok(r.clone()));
    def(interp, y, "size", |i, r, _| Ok(Value::Int(text_of(i, r, "size")?.chars().count() as i64)));
    def(interp, y, "numArgs", |i, r, _| Ok(Value::Int(sym_of(i, r, "numArgs")?.arity() as i64)));
    def(interp, y, ",", |i, r, a| {
        let mut out = text_of(i, r, ",")?;
        out.push_str(&text_of(i, &a[0], ",")?);
        Ok(Value::str(&out))
    });
}

fn index_arg(interp: &Interpreter, arr: &ArrayObj, v: &Value, selector: &str) -> Result<usize, Unwind> {
    let index = int_of(interp, v, selector)?;
    let size = arr.items.borrow().len();
    if index >= 1 && (index as usize) <= size {
        Ok(index as usize - 1)
    } else {
        Err(interp.fail(ErrorKind::IndexOutOfBounds { index, size }))
    }
}

fn collections(interp: &mut Interpreter) {
    for c in [interp.builtins.array, interp.builtins.ordered_collection] {
        def_class_side(interp, c, "with:", with_items);
        def_class_side(interp, c, "with:with:", with_items);
        def_class_side(interp, c, "with:with:with:", with_items);
        def_class_side(interp, c, "with:with:with:with:", with_items);
        def_class_side(interp, c, "withAll:", |i, r, a| with_items(i, r, &items(&a[0])));
        def(interp, c, "size", |i, r, _| Ok(Value::Int(array_of(i, r, "size")?.items.borrow().len() as i64)));
        def(interp, c, "add:", |i, r, a| {
            array_of(i, r, "add:")?.items.borrow_mut().push(a[0].clone());
            Ok(a[0].clone())
        });
        def(interp, c, "addFirst:", |i, r, a| {
            array_of(i, r, "addFirst:")?.items.borrow_mut().insert(0, a[0].clone());
            Ok(a[0].clone())
        });
        def(interp, c, "addAll:", |i, r, a| {
            let extra = items(&a[0]);
            array_of(i, r, "addAll:")?.items.borrow_mut().extend(extra);
            Ok(a[0].clone())
        });
        def(interp, c, "removeFirst", |i, r, _| {
            let arr = array_of(i, r, "removeFirst")?;
            let mut v = arr.items.borrow_mut();
            if v.is_empty() {
                drop(v);
                return Err(i.fail(ErrorKind::IndexOutOfBounds { index: 1, size: 0 }));
            }
            Ok(v.remove(0))
        });
        def(interp, c, "removeLast", |i, r, _| {
            let arr = array_of(i, r, "removeLast")?;
            let popped = arr.items.borrow_mut().pop();
            popped.ok_or_else(|| i.fail(ErrorKind::IndexOutOfBounds { index: 0, size: 0 }))
        });
        def(interp, c, "remove:", |i, r, a| {
            let arr = array_of(i, r, "remove:")?;
            let pos = arr.items.borrow().iter().position(|x| x.equals(&a[0]));
            match pos {
                Some(p) => Ok(arr.items.borrow_mut().remove(p)),
                None => Err(i.fail(ErrorKind::Other(format!("{} not found", i.print_string(&a[0]))))),
            }
        });
        def(interp, c, "at:", |i, r, a| {
            let arr = array_of(i, r, "at:")?;
            let k = index_arg(i, &arr, &a[0], "at:")?;
            let v = arr.items.borrow()[k].clone();
            Ok(v)
        });
        def(interp, c, "at:put:", |i, r, a| {
            let arr = array_of(i, r, "at:put:")?;
            let k = index_arg(i, &arr, &a[0], "at:put:")?;
            arr.items.borrow_mut()[k] = a[1].clone();
            Ok(a[1].clone())
        });
        def(interp, c, "first", |i, r, _| {
            let first = array_of(i, r, "first")?.items.borrow().first().cloned();
            first.ok_or_else(|| i.fail(ErrorKind::IndexOutOfBounds { index: 1, size: 0 }))
        });
        def(interp, c, "last", |i, r, _| {
            let last = array_of(i, r, "last")?.items.borrow().last().cloned();
            last.ok_or_else(|| i.fail(ErrorKind::IndexOutOfBounds { index: 0, size: 0 }))
        });
        def(interp, c, "isEmpty", |i, r, _| Ok(Value::Bool(array_of(i, r, "isEmpty")?.items.borrow().is_empty())));
        def(interp, c, "notEmpty", |i, r, _| Ok(Value::Bool(!array_of(i, r, "notEmpty")?.items.borrow().is_empty())));
        def(interp, c, "includes:", |_, r, a| Ok(Value::Bool(items(r).iter().any(|x| x.equals(&a[0])))));
        def(interp, c, "indexOf:", |_, r, a| {
            Ok(Value::Int(items(r).iter().position(|x| x.equals(&a[0])).map_or(0, |p| p as i64 + 1)))
        });
        def(interp, c, "do:", |i, r, a| {
            for x in items(r) {
                i.call_value(&a[0], vec![x])?;
            }
            Ok(r.clone())
        });
        def(interp, c, "reverseDo:", |i, r, a| {
            for x in items(r).into_iter().rev() {
                i.call_value(&a[0], vec![x])?;
            }
            Ok(r.clone())
        });
        def(interp, c, "doWithIndex:", |i, r, a| {
            for (k, x) in items(r).into_iter().enumerate() {
                i.call_value(&a[0], vec![x, Value::Int(k as i64 + 1)])?;
            }
            Ok(r.clone())
        });
        def(interp, c, "keysAndValuesDo:", |i, r, a| {
            for (k, x) in items(r).into_iter().enumerate() {
                i.call_value(&a[0], vec![Value::Int(k as i64 + 1), x])?;
            }
            Ok(r.clone())
        });
        def(interp, c, "collect:", |i, r, a| {
            let mut out = Vec::new();
            for x in items(r) {
                out.push(i.call_value(&a[0], vec![x])?);
            }
            Ok(i.new_array(i.class_of(r), out))
        });
        def(interp, c, "select:", |i, r, a| filter(i, r, &a[0], true));
        def(interp, c, "reject:", |i, r, a| filter(i, r, &a[0], false));
        def(interp, c, "detect:ifNone:", |i, r, a| {
            for x in items(r) {
                if matches!(i.call_value(&a[0], vec![x.clone()])?, Value::Bool(true)) {
                    return Ok(x);
                }
            }
            i.call_value(&a[1], vec![])
        });
        def(interp, c, "detect:", |i, r, a| {
            for x in items(r) {
                if matches!(i.call_value(&a[0], vec![x.clone()])?, Value::Bool(true)) {
                    return Ok(x);
                }
            }
            Ok(Value::Nil)
        });
        def(interp, c, "anySatisfy:", |i, r, a| {
            for x in items(r) {
                if matches!(i.call_value(&a[0], vec![x])?, Value::Bool(true)) {
                    return Ok(Value::Bool(true));
                }
            }
            Ok(Value::Bool(false))
        });
        def(interp, c, "allSatisfy:", |i, r, a| {
            for x in items(r) {
                if !matches!(i.call_value(&a[0], vec![x])?, Value::Bool(true)) {
                    return Ok(Value::Bool(false));
                }
            }
            Ok(Value::Bool(true))
        });
        def(interp, c, "count:", |i, r, a| {
            let mut n = 0;
            for x in items(r) {
                if matches!(i.call_value(&a[0], vec![x])?, Value::Bool(true)) {
                    n += 1;
                }
            }
            Ok(Value::Int(n))
        });
        def(interp, c, "inject:into:", |i, r, a| {
            let mut acc = a[0].clone();
            for x in items(r) {
                acc = i.call_value(&a[1], vec![acc, x])?;
            }
            Ok(acc)
        });
        def(interp, c, "sum", |i, r, _| {
            let mut total: i64 = 0;
            for x in items(r) {
                total = total.checked_add(int_of(i, &x, "sum")?).ok_or_else(|| i.fail(ErrorKind::IntegerOverflow))?;
            }
            Ok(Value::Int(total))
        });
        def(interp, c, "max", |i, r, _| {
            let mut best: Option<i64> = None;
            for x in items(r) {
                let v = int_of(i, &x, "max")?;
                best = Some(best.map_or(v, |b| b.max(v)));
            }
            Ok(best.map(Value::Int).unwrap_or(Value::Nil))
        });
        def(interp, c, "min", |i, r, _| {
            let mut best: Option<i64> = None;
            for x in items(r) {
                let v = int_of(i, &x, "min")?;
                best = Some(best.map_or(v, |b| b.min(v)));
            }
            Ok(best.map(Value::Int).unwrap_or(Value::Nil))
        });
        def(interp, c, "reversed", |i, r, _| {
            let mut v = items(r);
            v.reverse();
            Ok(i.new_array(i.class_of(r), v))
        });
        def(interp, c, "copy", |i, r, _| Ok(i.new_array(i.class_of(r), items(r))));
        def(interp, c, "asArray", |i, r, _| Ok(i.new_array(i.builtins.array, items(r))));
        def(interp, c, "asOrderedCollection", |i, r, _| Ok(i.new_array(i.builtins.ordered_collection, items(r))));
        def(interp, c, ",", |i, r, a| {
            let mut v = items(r);
            v.extend(items(&a[0]));
            Ok(i.new_array(i.class_of(r), v))
        });
    }
}

fn with_items(interp: &mut Interpreter, r: &Value, a: &[Value]) -> R {
    let Value::Class(class) = r else { return Err(wrong_type(interp, "with:", "a class")) };
    Ok(interp.new_array(*class, a.to_vec()))
}

fn filter(interp: &mut Interpreter, r: &Value, block: &Value, keep: bool) -> R {
    let mut out = Vec::new();
    for x in items(r) {
        let hit = matches!(interp.call_value(block, vec![x.clone()])?, Value::Bool(true));
        if hit == keep {
            out.push(x);
        }
    }
    Ok(interp.new_array(interp.class_of(r), out))
}

fn block_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<Rc<crate::value::Closure>, Unwind> {
    match v {
        Value::Block(b) => Ok(b.clone()),
        _ => Err(wrong_type(interp, selector, "a block")),
    }
}

fn blocks(interp: &mut Interpreter) {
    let c = interp.builtins.block;
    for selector in ["value", "value:", "value:value:", "value:value:value:", "value:value:value:value:"] {
        def(interp, c, selector, |i, r, a| {
            let b = block_of(i, r, "value")?;
            i.call_block(&b, a.to_vec())
        });
    }
    def(interp, c, "valueWithArguments:", |i, r, a| {
        let b = block_of(i, r, "valueWithArguments:")?;
        i.call_block(&b, items(&a[0]))
    });
    def(interp, c, "numArgs", |i, r, _| Ok(Value::Int(block_arity(&block_of(i, r, "numArgs")?.node) as i64)));
    def(interp, c, "whileTrue:", |i, r, a| {
        let cond = block_of(i, r, "whileTrue:")?;
        while matches!(i.call_block(&cond, vec![])?, Value::Bool(true)) {
            i.call_value(&a[0], vec![])?;
        }
        Ok(Value::Nil)
    });
    def(interp, c, "whileFalse:", |i, r, a| {
        let cond = block_of(i, r, "whileFalse:")?;
        while matches!(i.call_block(&cond, vec![])?, Value::Bool(false)) {
            i.call_value(&a[0], vec![])?;
        }
        Ok(Value::Nil)
    });
    def(interp, c, "whileTrue", |i, r, _| {
        let cond = block_of(i, r, "whileTrue")?;
        while matches!(i.call_block(&cond, vec![])?, Value::Bool(true)) {}
        Ok(Value::Nil)
    });
    def(interp, c, "whileFalse", |i, r, _| {
        let cond = block_of(i, r, "whileFalse")?;
        while matches!(i.call_block(&cond, vec![])?, Value::Bool(false)) {}
        Ok(Value::Nil)
    });
}

/// Text written by `Transcript log:`; objects may override `printString`.
fn log_text(interp: &mut Interpreter, v: &Value) -> Result<String, Unwind> {
    if let Value::Object(_) = v {
        if let Value::Str(s) = interp.send(v.clone(), Sym::new("printString"), vec![])? {
            return Ok(s.to_string());
        }
    }
    Ok(interp.display_string(v))
}

fn transcript(interp: &mut Interpreter) {
    let c = interp.builtins.transcript;
    def(interp, c, "log:", |i, r, a| {
        let text = log_text(i, &a[0])?;
        i.output.push_str(&text);
        i.output.push('\n');
        Ok(r.clone())
    });
    def(interp, c, "show:", |i, r, a| {
        let text = log_text(i, &a[0])?;
        i.output.push_str(&text);
        Ok(r.clone())
    });
    def(interp, c, "print:", |i, r, a| {
        let text = i.print_string(&a[0]);
        i.output.push_str(&text);
        Ok(r.clone())
    });
    def(interp, c, "cr", |i, r, _| {
        i.output.push('\n');
        Ok(r.clone())
    });
    def(interp, c, "space", |i, r, _| {
        i.output.push(' ');
        Ok(r.clone())
    });
    def(interp, c, "tab", |i, r, _| {
        i.output.push('\t');
        Ok(r.clone())
    });
}

fn with_rng<T>(interp: &Interpreter, r: &Value, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> Result<T, Unwind> {
    match r {
        Value::Native(n) => match &**n {
            Native::Random(rng) => Ok(f(&mut rng.borrow_mut())),
            _ => Err(wrong_type(interp, "next", "a Random")),
        },
        _ => Err(wrong_type(interp, "next", "a Random")),
    }
}

fn random(interp: &mut Interpreter) {
    let c = interp.builtins.random;
    def_class_side(interp, c, "seed:", |i, _, a| {
        let seed = int_of(i, &a[0], "seed:")?;
        Ok(Value::Native(Rc::new(Native::Random(Box::new(RefCell::new(ChaCha8Rng::seed_from_u64(seed as u64)))))))
    });
    // No floats in the language: `next` answers an integer in [0, 1000000).
    def(interp, c, "next", |i, r, _| with_rng(i, r, |rng| Value::Int(rng.gen_range(0..1_000_000))));
    def(interp, c, "nextInt:", |i, r, a| {
        let n = int_of(i, &a[0], "nextInt:")?;
        if n < 1 {
            return Err(wrong_type(i, "nextInt:", "a positive Integer"));
        }
        with_rng(i, r, |rng| Value::Int(rng.gen_range(1..=n)))
    });
    def(interp, c, "between:and:", |i, r, a| {
        let lo = int_of(i, &a[0], "between:and:")?;
        let hi = int_of(i, &a[1], "between:and:")?;
        if lo > hi {
            return Err(wrong_type(i, "between:and:", "an ordered range"));
        }
        with_rng(i, r, |rng| Value::Int(rng.gen_range(lo..=hi)))
    });
}

fn halt(interp: &mut Interpreter) {
    let c = interp.builtins.halt;
    def_class_side(interp, c, "now", |i, r, _| {
        let class = match r {
            Value::Class(c) => *c,
            _ => i.builtins.halt,
        };
        let signal = instantiate(i, class, 0)?;
        i.send(signal, Sym::new("signal"), vec![])
    });
    def(interp, c, "signal:", |i, _, a| {
        let message = i.display_string(&a[0]);
        Err(Unwind::Halt(HaltSignal { message, trace: i.trace() }))
    });
}

fn link_of(interp: &Interpreter, v: &Value) -> Result<LinkId, Unwind> {
    match v {
        Value::Link(id) => Ok(*id),
        _ => Err(wrong_type(interp, "link:", "a MetaLink")),
    }
}

fn reification_names(interp: &Interpreter, v: &Value, selector: &str) -> Result<Vec<Sym>, Unwind> {
    items(v).iter().map(|x| sym_of(interp, x, selector)).collect()
}

fn metalink(interp: &mut Interpreter) {
    let c = interp.builtins.metalink;
    def(interp, c, "metaObject:", |i, r, a| {
        i.set_meta_object(link_of(i, r)?, a[0].clone());
        Ok(r.clone())
    });
    def(interp, c, "selector:", |i, r, a| {
        let selector = sym_of(i, &a[0], "selector:")?;
        i.set_selector(link_of(i, r)?, selector.as_str());
        Ok(r.clone())
    });
    def(interp, c, "control:", |i, r, a| {
        let name = sym_of(i, &a[0], "control:")?;
        let control = Control::from_name(name.as_str()).ok_or_else(|| link_err(i, LinkError::UnknownControl(name)))?;
        i.set_control(link_of(i, r)?, control);
        Ok(r.clone())
    });
    def(interp, c, "arguments:", |i, r, a| {
        let names = reification_names(i, &a[0], "arguments:")?;
        i.set_argument_syms(link_of(i, r)?, names);
        Ok(r.clone())
    });
    def(interp, c, "condition:", |i, r, a| {
        let condition = match &a[0] {
            Value::Bool(b) => Condition::Constant(*b),
            Value::Nil => {
                i.set_condition(link_of(i, r)?, None);
                return Ok(r.clone());
            }
            block => Condition::Block { block: block.clone(), arguments: Vec::new() },
        };
        i.set_condition(link_of(i, r)?, Some(condition));
        Ok(r.clone())
    });
    def(interp, c, "condition:arguments:", |i, r, a| {
        let arguments = reification_names(i, &a[1], "condition:arguments:")?;
        i.set_condition(link_of(i, r)?, Some(Condition::Block { block: a[0].clone(), arguments }));
        Ok(r.clone())
    });
    def(interp, c, "level:", |i, r, a| {
        let level = int_of(i, &a[0], "level:")?;
        let level = u32::try_from(level).map_err(|_| wrong_type(i, "level:", "a non-negative Integer"))?;
        i.set_level(link_of(i, r)?, level);
        Ok(r.clone())
    });
    def(interp, c, "invalidate", |i, r, _| {
        i.invalidate(link_of(i, r)?).map_err(|e| link_err(i, e))?;
        Ok(r.clone())
    });
    def(interp, c, "uninstall", |i, r, _| {
        i.uninstall(link_of(i, r)?);
        Ok(r.clone())
    });
    def(interp, c, "disable", |i, r, _| {
        i.set_enabled(link_of(i, r)?, false);
        Ok(r.clone())
    });
    def(interp, c, "enable", |i, r, _| {
        i.set_enabled(link_of(i, r)?, true);
        Ok(r.clone())
    });
    def(interp, c, "metaObject", |i, r, _| Ok(i.link(link_of(i, r)?).config.meta_object.clone()));
    def(interp, c, "selector", |i, r, _| Ok(i.link(link_of(i, r)?).config.selector.map(Value::Symbol).unwrap_or(Value::Nil)));
    def(interp, c, "control", |i, r, _| Ok(Value::sym(i.link(link_of(i, r)?).config.control.name())));
    def(interp, c, "level", |i, r, _| Ok(Value::Int(i.link(link_of(i, r)?).config.level as i64)));
    def(interp, c, "arguments", |i, r, _| {
        let names = i.link(link_of(i, r)?).config.arguments.iter().map(|s| Value::Symbol(*s)).collect();
        Ok(i.new_array(i.builtins.array, names))
    });
    def(interp, c, "isEnabled", |i, r, _| Ok(Value::Bool(i.link(link_of(i, r)?).enabled)));
    def(interp, c, "isInstalled", |i, r, _| Ok(Value::Bool(i.link(link_of(i, r)?).is_installed())));
    def(interp, c, "installCount", |i, r, _| Ok(Value::Int(i.link(link_of(i, r)?).installed_on.len() as i64)));
}

fn mirror_of<'a>(interp: &Interpreter, v: &'a Value, selector: &str) -> Result<&'a Mirror, Unwind> {
    match v {
        Value::Mirror(m) => Ok(m),
        _ => Err(wrong_type(interp, selector, "a mirror")),
    }
}

fn tree_of(interp: &Interpreter, v: &Value, selector: &str) -> Result<(Rc<Node>, Option<Rc<crate::runtime::CompiledMethod>>), Unwind> {
    match mirror_of(interp, v, selector)? {
        Mirror::Method { method, root } => Ok((root.clone(), Some(method.clone()))),
        Mirror::Node { node, method } => Ok((node.clone(), method.clone())),
        _ => Err(wrong_type(interp, selector, "a method or node mirror")),
    }
}

fn node_mirrors(interp: &Interpreter, nodes: Vec<Rc<Node>>, method: Option<Rc<crate::runtime::CompiledMethod>>) -> Value {
    let values = nodes.into_iter().map(|node| Value::Mirror(Rc::new(Mirror::Node { node, method: method.clone() }))).collect();
    interp.new_array(interp.builtins.array, values)
}

fn query(interp: &Interpreter, r: &Value, q: NodeQuery, selector: &str) -> R {
    let (root, method) = tree_of(interp, r, selector)?;
    Ok(node_mirrors(interp, find_nodes(&root, &q), method))
}

/// The id a mirror installs on; woven hook nodes are refused.
fn install_target(interp: &Interpreter, v: &Value) -> Result<crate::ast::NodeId, Unwind> {
    let (node, _) = tree_of(interp, v, "link:")?;
    if node.kind() == Kind::MetaHook {
        return Err(link_err(interp, LinkError::NodeNotInstallable { node: node.id, reason: "woven hook nodes are not part of the original method" }));
    }
    Ok(node.id)
}

fn mirrors(interp: &mut Interpreter) {
    let b = &interp.builtins;
    let (method, node, context, variable, operation, reflect) =
        (b.method_mirror, b.node_mirror, b.context_mirror, b.variable_mirror, b.operation, b.reflect);

    def_class_side(interp, reflect, "class:selector:", |i, _, a| {
        let class = class_arg(i, &a[0], "class:selector:")?;
        let selector = sym_of(i, &a[1], "class:selector:")?;
        match i.lookup_method(class, selector) {
            Some(MethodRef::Compiled(m)) => {
                let root = m.ast();
                Ok(Value::Mirror(Rc::new(Mirror::method(m, root))))
            }
            _ => Err(i.fail(ErrorKind::Other(format!("{}>>#{} has no syntax tree", i.class_name(class), selector)))),
        }
    });
    def_class_side(interp, reflect, "metaLevel", |i, _, _| Ok(Value::Int(i.meta_level as i64)));

    for c in [method, node] {
        def(interp, c, "ast", |i, r, _| {
            let (root, method) = tree_of(i, r, "ast")?;
            Ok(Value::Mirror(Rc::new(Mirror::Node { node: root, method })))
        });
        def(interp, c, "sends", |i, r, _| query(i, r, NodeQuery::AllSends, "sends"));
        def(interp, c, "allNodes", |i, r, _| query(i, r, NodeQuery::AllNodes, "allNodes"));
        def(interp, c, "sendsOf:", |i, r, a| {
            let s = sym_of(i, &a[0], "sendsOf:")?;
            query(i, r, NodeQuery::SendsOf(s), "sendsOf:")
        });
        def(interp, c, "reads:", |i, r, a| {
            let s = sym_of(i, &a[0], "reads:")?;
            query(i, r, NodeQuery::ReadsOf(s), "reads:")
        });
        def(interp, c, "writes:", |i, r, a| {
            let s = sym_of(i, &a[0], "writes:")?;
            query(i, r, NodeQuery::WritesOf(s), "writes:")
        });
        def(interp, c, "statementAt:", |i, r, a| {
            let k = int_of(i, &a[0], "statementAt:")?;
            let (root, method) = tree_of(i, r, "statementAt:")?;
            let found = if k >= 1 { find_nodes(&root, &NodeQuery::StatementAt(k as usize)) } else { Vec::new() };
            Ok(found
                .into_iter()
                .next()
                .map(|node| Value::Mirror(Rc::new(Mirror::Node { node, method })))
                .unwrap_or(Value::Nil))
        });
        def(interp, c, "link:", |i, r, a| {
            let target = install_target(i, r)?;
            i.install(link_of(i, &a[0])?, target).map_err(|e| link_err(i, e))?;
            Ok(r.clone())
        });
        def(interp, c, "link:forObject:", |i, r, a| {
            let target = install_target(i, r)?;
            i.install_for_object(link_of(i, &a[0])?, target, a[1].clone()).map_err(|e| link_err(i, e))?;
            Ok(r.clone())
        });
        def(interp, c, "removeLink:", |i, r, a| {
            let (node, _) = tree_of(i, r, "removeLink:")?;
            i.remove_link(node.id, link_of(i, &a[0])?);
            Ok(r.clone())
        });
        def(interp, c, "removeLink:forObject:", |i, r, a| {
            let (node, _) = tree_of(i, r, "removeLink:forObject:")?;
            i.remove_link_for_object(node.id, link_of(i, &a[0])?, &a[1]);
            Ok(r.clone())
        });
        def(interp, c, "links", |i, r, _| {
            let (node, _) = tree_of(i, r, "links")?;
            let links = i.links_on(node.id).into_iter().map(|(l, _)| Value::Link(l)).collect();
            Ok(i.new_array(i.builtins.array, links))
        });
        def(interp, c, "hasLinks", |i, r, _| {
            let (node, _) = tree_of(i, r, "hasLinks")?;
            Ok(Value::Bool(!i.links_on(node.id).is_empty()))
        });
        def(interp, c, "isWoven", |i, r, _| Ok(Value::Bool(mirror_of(i, r, "isWoven")?.is_woven())));
        def(interp, c, "selector", |i, r, _| {
            let (node, _) = tree_of(i, r, "selector")?;
            Ok(node.selector().map(Value::Symbol).unwrap_or(Value::Nil))
        });
        def(interp, c, "sourceCode", |i, r, _| {
            let (node, method) = tree_of(i, r, "sourceCode")?;
            let Some(m) = method else { return Ok(Value::str(&unparse(&node))) };
            let (start, end) = (node.span.start - m.source_offset, node.span.end - m.source_offset);
            Ok(m.source.get(start..end).map(Value::str).unwrap_or(Value::Nil))
        });
        def(interp, c, "methodClass", |i, r, _| {
            let (_, method) = tree_of(i, r, "methodClass")?;
            Ok(method.map(|m| Value::Class(m.class)).unwrap_or(Value::Nil))
        });
    }
    def(interp, node, "kind", |i, r, _| Ok(Value::sym(tree_of(i, r, "kind")?.0.kind().name())));
    def(interp, node, "nodeId", |i, r, _| Ok(Value::Int(tree_of(i, r, "nodeId")?.0.id.0 as i64)));
    def(interp, node, "name", |i, r, _| Ok(tree_of(i, r, "name")?.0.var_name().map(Value::Symbol).unwrap_or(Value::Nil)));
    def(interp, node, "isHook", |i, r, _| Ok(Value::Bool(tree_of(i, r, "isHook")?.0.kind() == Kind::MetaHook)));
    def(interp, node, "children", |i, r, _| {
        let (node, method) = tree_of(i, r, "children")?;
        let kids = node.children().into_iter().cloned().collect();
        Ok(node_mirrors(i, kids, method))
    });
    def(interp, node, "method", |i, r, _| {
        let (_, method) = tree_of(i, r, "method")?;
        Ok(method
            .map(|m| {
                let root = m.ast();
                Value::Mirror(Rc::new(Mirror::method(m, root)))
            })
            .unwrap_or(Value::Nil))
    });
    def(interp, node, "value", |i, r, _| match &tree_of(i, r, "value")?.0.kind {
        NodeKind::Literal(lit) => Ok(super::eval::literal_value(lit)),
        _ => Ok(Value::Nil),
    });

    let ctx = |i: &Interpreter, r: &Value| -> Result<crate::mirror::ContextSnapshot, Unwind> {
        match mirror_of(i, r, "context")? {
            Mirror::Context(c) => Ok(c.clone()),
            _ => Err(wrong_type(i, "context", "a context mirror")),
        }
    };
    let _ = ctx;
    def(interp, context, "receiver", |i, r, _| Ok(context_of(i, r)?.receiver));
    def(interp, context, "selector", |i, r, _| Ok(Value::Symbol(context_of(i, r)?.selector)));
    def(interp, context, "methodClass", |i, r, _| Ok(context_of(i, r)?.class.map(Value::Class).unwrap_or(Value::Nil)));
    def(interp, context, "isBlock", |i, r, _| Ok(Value::Bool(context_of(i, r)?.is_block)));
    def(interp, context, "label", |i, r, _| Ok(Value::str(&context_of(i, r)?.label)));
    def(interp, context, "arguments", |i, r, _| {
        let args = context_of(i, r)?.arguments;
        Ok(i.new_array(i.builtins.array, args))
    });
    def(interp, context, "sender", |i, r, _| {
        Ok(context_of(i, r)?.sender.map(|s| Value::Mirror(Rc::new(Mirror::Context((*s).clone())))).unwrap_or(Value::Nil))
    });
    def(interp, context, "temps", |i, r, _| {
        let pairs = context_of(i, r)?
            .temps
            .into_iter()
            .map(|(n, v)| i.new_array(i.builtins.array, vec![Value::Symbol(n), v]))
            .collect();
        Ok(i.new_array(i.builtins.array, pairs))
    });
    def(interp, context, "tempNamed:", |i, r, a| {
        let name = sym_of(i, &a[0], "tempNamed:")?;
        Ok(context_of(i, r)?.temp(name.as_str()).cloned().unwrap_or(Value::Nil))
    });
    def(interp, context, "stack", |i, r, _| {
        let labels = context_of(i, r)?.chain().iter().map(|l| Value::str(l)).collect();
        Ok(i.new_array(i.builtins.array, labels))
    });

    def(interp, variable, "name", |i, r, _| Ok(Value::Symbol(variable_of(i, r)?.name)));
    def(interp, variable, "value", |i, r, _| {
        let v = variable_of(i, r)?;
        Ok(v.read(i))
    });
    def(interp, variable, "kind", |i, r, _| Ok(Value::sym(variable_of(i, r)?.kind_name())));
    def(interp, variable, "holder", |i, r, _| Ok(variable_of(i, r)?.holder()));

    def(interp, operation, "value", |i, r, _| match r {
        Value::Native(n) => match &**n {
            Native::Operation(w) => i.invoke_operation(w),
            _ => Err(wrong_type(i, "value", "an Operation")),
        },
        _ => Err(wrong_type(i, "value", "an Operation")),
    });
    def(interp, operation, "isInvoked", |_, r, _| match r {
        Value::Native(n) => Ok(Value::Bool(matches!(&**n, Native::Operation(w) if w.invoked()))),
        _ => Ok(Value::Bool(false)),
    });
}

fn context_of(interp: &Interpreter, v: &Value) -> Result<crate::mirror::ContextSnapshot, Unwind> {
    match mirror_of(interp, v, "context")? {
        Mirror::Context(c) => Ok(c.clone()),
        _ => Err(wrong_type(interp, "context", "a context mirror")),
    }
}

fn variable_of(interp: &Interpreter, v: &Value) -> Result<crate::mirror::VariableMirror, Unwind> {
    match mirror_of(interp, v, "variable")? {
        Mirror::Variable(var) => Ok(var.clone()),
        _ => Err(wrong_type(interp, "variable", "a variable mirror")),
    }
}

fn native_index(interp: &Interpreter, v: &Value, selector: &str) -> Result<usize, Unwind> {
    match v {
        Value::Native(n) => match &**n {
            Native::Watch(k) | Native::Breakpoint(k) | Native::Counter(k) => Ok(*k),
            _ => Err(wrong_type(interp, selector, "a tool")),
        },
        _ => Err(wrong_type(interp, selector, "a tool")),
    }
}

fn tool_err(interp: &Interpreter, e: crate::tools::ToolError) -> Unwind {
    interp.fail(ErrorKind::Other(e.to_string()))
}

fn tools(interp: &mut Interpreter) {
    let b = &interp.builtins;
    let (watch, breakpoint, counter, probe) = (b.watch, b.breakpoint, b.counter, b.probe);

    fn watch_new(i: &mut Interpreter, a: &[Value], persistent: bool) -> R {
        let class = class_arg(i, &a[0], "class:variable:")?;
        let var = sym_of(i, &a[1], "class:variable:")?;
        let id = i.watch_variable(class, var.as_str(), persistent).map_err(|e| tool_err(i, e))?;
        Ok(Value::Native(Rc::new(Native::Watch(id.0))))
    }
    def_class_side(interp, watch, "class:variable:", |i, _, a| watch_new(i, a, false));
    def_class_side(interp, watch, "class:variable:persistent:", |i, _, a| {
        let persistent = bool_of(i, &a[2], "class:variable:persistent:")?;
        watch_new(i, a, persistent)
    });
    def(interp, watch, "record:value:method:", |i, r, a| {
        let k = native_index(i, r, "record:value:method:")?;
        i.record_watch(k, a[0].clone(), a[1].clone(), &a[2]);
        Ok(Value::Nil)
    });
    def(interp, watch, "history", |i, r, _| {
        let k = native_index(i, r, "history")?;
        let rows: Vec<Value> = i
            .watch_history(crate::tools::WatchId(k))
            .iter()
            .map(|rec| {
                (rec.object.clone(), rec.value.clone(), rec.method.as_ref().map_or(Value::Nil, |m| Value::str(&m.to_string())))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(o, v, m)| i.new_array(i.builtins.array, vec![o, v, m]))
            .collect();
        Ok(i.new_array(i.builtins.array, rows))
    });
    def(interp, watch, "size", |i, r, _| {
        let k = native_index(i, r, "size")?;
        Ok(Value::Int(i.watch_history(crate::tools::WatchId(k)).len() as i64))
    });
    def(interp, watch, "remove", |i, r, _| {
        let k = native_index(i, r, "remove")?;
        i.remove_watch(crate::tools::WatchId(k));
        Ok(r.clone())
    });

    fn breakpoint_new(i: &mut Interpreter, a: &[Value], site: BreakpointSite, target: Option<Value>) -> R {
        let class = class_arg(i, &a[0], "onClass:selector:")?;
        let selector = sym_of(i, &a[1], "onClass:selector:")?;
        let id = match target {
            None => i.set_breakpoint(class, selector.as_str(), site),
            Some(t) => i.set_breakpoint_for_object(class, selector.as_str(), site, t),
        }
        .map_err(|e| tool_err(i, e))?;
        Ok(Value::Native(Rc::new(Native::Breakpoint(id.0))))
    }
    def_class_side(interp, breakpoint, "onClass:selector:", |i, _, a| breakpoint_new(i, a, BreakpointSite::MethodEntry, None));
    def_class_side(interp, breakpoint, "onClass:selector:statementAt:", |i, _, a| {
        let k = int_of(i, &a[2], "onClass:selector:statementAt:")?;
        breakpoint_new(i, a, BreakpointSite::StatementAt(k.max(0) as usize), None)
    });
    def_class_side(interp, breakpoint, "onClass:selector:send:", |i, _, a| {
        let s = sym_of(i, &a[2], "onClass:selector:send:")?;
        breakpoint_new(i, a, BreakpointSite::SendOf(s), None)
    });
    def_class_side(interp, breakpoint, "onClass:selector:forObject:", |i, _, a| {
        breakpoint_new(i, a, BreakpointSite::MethodEntry, Some(a[2].clone()))
    });
    def(interp, breakpoint, "remove", |i, r, _| {
        let k = native_index(i, r, "remove")?;
        i.remove_breakpoint(crate::tools::BreakpointId(k));
        Ok(r.clone())
    });

    def_class_side(interp, counter, "on:", |i, _, a| {
        let targets = match &a[0] {
            Value::Array(_) => items(&a[0]),
            single => vec![single.clone()],
        };
        let mut nodes = Vec::new();
        for t in &targets {
            nodes.push(install_target(i, t)?);
        }
        let id = i.trace_count(&nodes).map_err(|e| tool_err(i, e))?;
        Ok(Value::Native(Rc::new(Native::Counter(id.0))))
    });
    def(interp, counter, "hit:", |i, r, a| {
        let k = native_index(i, r, "hit:")?;
        let (node, _) = tree_of(i, &a[0], "hit:")?;
        i.record_hit(k, node.id);
        Ok(Value::Nil)
    });
    def(interp, counter, "total", |i, r, _| {
        let k = native_index(i, r, "total")?;
        Ok(Value::Int(i.counter_total(crate::tools::CounterId(k)) as i64))
    });
    def(interp, counter, "countAt:", |i, r, a| {
        let k = native_index(i, r, "countAt:")?;
        let (node, _) = tree_of(i, &a[0], "countAt:")?;
        Ok(Value::Int(i.counter_counts(crate::tools::CounterId(k)).get(&node.id).copied().unwrap_or(0) as i64))
    });
    def(interp, counter, "link", |i, r, _| {
        let k = native_index(i, r, "link")?;
        Ok(Value::Link(i.counter_link(crate::tools::CounterId(k))))
    });
    def(interp, counter, "remove", |i, r, _| {
        let k = native_index(i, r, "remove")?;
        let link = i.counter_link(crate::tools::CounterId(k));
        i.uninstall(link);
        Ok(r.clone())
    });

    def_class_side(interp, probe, "new", |_, _, _| {
        Ok(Value::Native(Rc::new(Native::LevelProbe(RefCell::new(Vec::new()), Cell::new(0)))))
    });
    fn probe_record(i: &mut Interpreter, r: &Value) -> R {
        if let Value::Native(n) = r {
            if let Native::LevelProbe(levels, count) = &**n {
                levels.borrow_mut().push(i.meta_level);
                count.set(count.get() + 1);
            }
        }
        Ok(Value::Nil)
    }
    def(interp, probe, "record", |i, r, _| probe_record(i, r));
    def(interp, probe, "record:", |i, r, _| probe_record(i, r));
    def(interp, probe, "record:with:", |i, r, _| probe_record(i, r));
    def(interp, probe, "count", |_, r, _| match r {
        Value::Native(n) => match &**n {
            Native::LevelProbe(_, count) => Ok(Value::Int(count.get() as i64)),
            _ => Ok(Value::Int(0)),
        },
        _ => Ok(Value::Int(0)),
    });
    def(interp, probe, "levels", |i, r, _| {
        let levels: Vec<Value> = match r {
            Value::Native(n) => match &**n {
                Native::LevelProbe(levels, _) => levels.borrow().iter().map(|&l| Value::Int(l as i64)).collect(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        };
        Ok(i.new_array(i.builtins.array, levels))
    });
}
