//! The tree walker, message dispatch and hook triggering.

use std::rc::Rc;

use super::{ErrorKind, Frame, Interpreter, MethodImpl, Unwind};
use crate::ast::{Literal, Node, NodeKind, SourceSpan};
use crate::metalink::{ActiveCondition, ActiveConfig, Control, HookSite};
use crate::reify::{PendingOp, Phase, TriggerContext};
use crate::runtime::CompiledMethod;
use crate::symbol::Sym;
use crate::value::{ArrayObj, ClassId, Closure, Env, Instance, LinkId, Value};

/// The lexical situation of the code being evaluated.
#[derive(Clone)]
pub struct Cx {
    pub(crate) receiver: Value,
    pub(crate) env: Rc<Env>,
    /// Serial of the method activation `^` returns from.
    pub(crate) home: u64,
    /// Class defining the running method; `super` starts above it.
    pub(crate) class: Option<ClassId>,
    /// `None` for top-level code.
    pub(crate) method: Option<Rc<CompiledMethod>>,
}

/// A resolved variable binding.
#[derive(Clone)]
pub enum VarLocation {
    Temp { env: Rc<Env>, index: usize },
    Slot { object: Rc<Instance>, index: usize },
    Global(Sym),
}

impl std::fmt::Debug for VarLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarLocation::Temp { index, .. } => write!(f, "Temp({index})"),
            VarLocation::Slot { index, .. } => write!(f, "Slot({index})"),
            VarLocation::Global(name) => write!(f, "Global({name})"),
        }
    }
}

pub(crate) fn literal_value(lit: &Literal) -> Value {
    match lit {
        Literal::Int(v) => Value::Int(*v),
        Literal::Str(s) => Value::Str(s.clone()),
        Literal::Symbol(s) => Value::Symbol(*s),
        Literal::True => Value::Bool(true),
        Literal::False => Value::Bool(false),
        Literal::Nil => Value::Nil,
    }
}

/// Number of parameters of a block node, looking through a hook.
pub fn block_arity(node: &Node) -> usize {
    match &node.kind {
        NodeKind::Block { params, .. } => params.len(),
        NodeKind::MetaHook { wrapped, .. } => block_arity(wrapped),
        _ => 0,
    }
}

fn unhook(node: &Rc<Node>) -> (&Rc<Node>, Option<&Rc<HookSite>>) {
    match &node.kind {
        NodeKind::MetaHook { wrapped, site } => (wrapped, Some(site)),
        _ => (node, None),
    }
}

impl Interpreter {
    pub(crate) fn eval(&mut self, node: &Rc<Node>, cx: &Cx) -> Result<Value, Unwind> {
        match &node.kind {
            NodeKind::Sequence { statements } => {
                let mut last = Value::Nil;
                for statement in statements {
                    last = self.eval(statement, cx)?;
                }
                Ok(last)
            }
            NodeKind::Literal(lit) => Ok(literal_value(lit)),
            NodeKind::LiteralArray(items) => {
                Ok(self.new_array(self.builtins.array, items.iter().map(literal_value).collect()))
            }
            NodeKind::VarRead { name } => self.read_name(*name, cx),
            NodeKind::Assignment { name, value } => {
                let v = self.eval(value, cx)?;
                self.store_name(*name, v.clone(), cx)?;
                Ok(v)
            }
            NodeKind::Return { value } => {
                let v = self.eval(value, cx)?;
                Err(self.return_from(v, cx))
            }
            NodeKind::MessageSend { receiver, selector, args } => {
                let (recv, lookup_from) = self.eval_receiver(receiver, cx)?;
                let mut argv = Vec::with_capacity(args.len());
                for arg in args {
                    argv.push(self.eval(arg, cx)?);
                }
                self.set_span(node.span);
                self.dispatch(recv, *selector, argv, lookup_from)
            }
            NodeKind::Block { .. } => Ok(self.make_closure(node, cx)),
            NodeKind::SelfRef { .. } => Ok(cx.receiver.clone()),
            NodeKind::MetaHook { wrapped, site } => self.eval_hook(node, wrapped, site, cx),
            NodeKind::MethodDef { .. } | NodeKind::ClassDef { .. } | NodeKind::TempDecl { .. } => {
                Err(self.fail(ErrorKind::Other(format!("{} nodes cannot be evaluated", node.kind()))))
            }
        }
    }

    fn set_span(&mut self, span: SourceSpan) {
        if let Some(frame) = self.frames.last_mut() {
            frame.span = Some(span);
        }
    }

    /// Evaluates a receiver; a `super` receiver also yields where lookup starts.
    fn eval_receiver(&mut self, receiver: &Rc<Node>, cx: &Cx) -> Result<(Value, Option<Option<ClassId>>), Unwind> {
        let (inner, _) = unhook(receiver);
        let value = self.eval(receiver, cx)?;
        match inner.kind {
            NodeKind::SelfRef { is_super: true } => {
                let start = cx.class.and_then(|c| self.class(c).superclass);
                Ok((value, Some(start)))
            }
            _ => Ok((value, None)),
        }
    }

    fn return_from(&self, value: Value, cx: &Cx) -> Unwind {
        let alive = self.frames.iter().rev().any(|f| f.serial == cx.home);
        if alive {
            Unwind::Return { home: cx.home, value }
        } else {
            self.fail(ErrorKind::BlockCannotReturn)
        }
    }

    fn make_closure(&self, node: &Rc<Node>, cx: &Cx) -> Value {
        Value::Block(Rc::new(Closure {
            node: node.clone(),
            env: cx.env.clone(),
            receiver: cx.receiver.clone(),
            home: cx.home,
            class: cx.class,
            method: cx.method.clone(),
        }))
    }

    pub(crate) fn new_array(&self, class: ClassId, items: Vec<Value>) -> Value {
        Value::Array(Rc::new(ArrayObj { class, items: std::cell::RefCell::new(items) }))
    }

    fn slot_index(&self, class: Option<ClassId>, name: Sym) -> Option<usize> {
        let class = class?;
        self.class(class).all_slots.iter().position(|s| *s == name)
    }

    /// Finds the binding `name` refers to in `cx`.
    pub(crate) fn locate(&self, name: Sym, cx: &Cx) -> Option<VarLocation> {
        let mut env = Some(&cx.env);
        while let Some(e) = env {
            if let Some(index) = e.vars.borrow().iter().position(|(n, _)| *n == name) {
                return Some(VarLocation::Temp { env: e.clone(), index });
            }
            env = e.parent.as_ref();
        }
        if let Value::Object(object) = &cx.receiver {
            if let Some(index) = self.slot_index(cx.class, name) {
                if index < object.slots.borrow().len() {
                    return Some(VarLocation::Slot { object: object.clone(), index });
                }
            }
        }
        if self.globals.contains_key(&name) || cx.method.is_none() {
            return Some(VarLocation::Global(name));
        }
        None
    }

    pub(crate) fn read_location(&self, location: &VarLocation) -> Value {
        match location {
            VarLocation::Temp { env, index } => env.vars.borrow()[*index].1.clone(),
            VarLocation::Slot { object, index } => object.slots.borrow()[*index].clone(),
            VarLocation::Global(name) => self.globals.get(name).cloned().unwrap_or(Value::Nil),
        }
    }

    pub(crate) fn write_location(&mut self, location: &VarLocation, value: Value) {
        match location {
            VarLocation::Temp { env, index } => env.vars.borrow_mut()[*index].1 = value,
            VarLocation::Slot { object, index } => object.slots.borrow_mut()[*index] = value,
            VarLocation::Global(name) => {
                self.globals.insert(*name, value);
            }
        }
    }

    fn read_name(&mut self, name: Sym, cx: &Cx) -> Result<Value, Unwind> {
        match self.locate(name, cx) {
            Some(VarLocation::Global(g)) if !self.globals.contains_key(&g) => {
                Err(self.fail(ErrorKind::UndefinedVariable(name)))
            }
            Some(location) => Ok(self.read_location(&location)),
            None => Err(self.fail(ErrorKind::UndefinedVariable(name))),
        }
    }

    /// Undeclared names assigned at top level become globals.
    fn store_name(&mut self, name: Sym, value: Value, cx: &Cx) -> Result<(), Unwind> {
        match self.locate(name, cx) {
            Some(location) => {
                self.write_location(&location, value);
                Ok(())
            }
            None => Err(self.fail(ErrorKind::UndefinedVariable(name))),
        }
    }

    /// Sends a message from host code.
    pub fn send(&mut self, receiver: Value, selector: Sym, args: Vec<Value>) -> Result<Value, Unwind> {
        self.dispatch(receiver, selector, args, None)
    }

    /// `lookup_from` is `Some` for super sends.
    pub(crate) fn dispatch(
        &mut self,
        receiver: Value,
        selector: Sym,
        args: Vec<Value>,
        lookup_from: Option<Option<ClassId>>,
    ) -> Result<Value, Unwind> {
        self.stats.sends += 1;
        let found = match lookup_from {
            Some(start) => start.and_then(|c| self.lookup_impl(c, selector)).map(|(m, _)| m),
            None => self.find_impl(&receiver, selector),
        };
        match found {
            Some(MethodImpl::Compiled(method)) => {
                if args.len() != method.signature.arity {
                    return Err(self.fail(ErrorKind::WrongArgumentCount { expected: method.signature.arity, got: args.len() }));
                }
                self.invoke_method(&method, receiver, args)
            }
            Some(MethodImpl::Primitive(prim)) => {
                if args.len() != selector.arity() {
                    return Err(self.fail(ErrorKind::WrongArgumentCount { expected: selector.arity(), got: args.len() }));
                }
                prim(self, &receiver, &args)
            }
            None => Err(self.fail(ErrorKind::DoesNotUnderstand { receiver: self.print_string(&receiver), selector })),
        }
    }

    fn find_impl(&self, receiver: &Value, selector: Sym) -> Option<MethodImpl> {
        if let Value::Class(class) = receiver {
            let mut c = Some(*class);
            while let Some(id) = c {
                let record = self.class(id);
                if let Some(prim) = record.class_side.get(&selector) {
                    return Some(MethodImpl::Primitive(*prim));
                }
                c = record.superclass;
            }
            return self.lookup_impl(self.builtins.class, selector).map(|(m, _)| m);
        }
        self.lookup_impl(self.class_of(receiver), selector).map(|(m, _)| m)
    }

    pub fn responds_to(&self, receiver: &Value, selector: Sym) -> bool {
        self.find_impl(receiver, selector).is_some()
    }

    fn check_depth(&self) -> Result<(), Unwind> {
        if self.frames.len() >= self.max_depth {
            return Err(self.fail(ErrorKind::StackOverflow(self.max_depth)));
        }
        Ok(())
    }

    pub(crate) fn invoke_method(&mut self, method: &Rc<CompiledMethod>, receiver: Value, args: Vec<Value>) -> Result<Value, Unwind> {
        self.check_depth()?;
        let root = method.executable();
        let (def, site) = unhook(&root);
        let NodeKind::MethodDef { params, temps, body, selector } = &def.kind else {
            unreachable!("method trees have a MethodDef root")
        };
        let mut vars = Vec::with_capacity(params.len() + temps.len());
        vars.extend(params.iter().copied().zip(args.iter().cloned()));
        vars.extend(temps.iter().map(|t| (t.var_name().expect("temp name"), Value::Nil)));
        let env = Env::new(vars, None);
        let serial = self.next_serial();
        self.frames.push(Frame {
            serial,
            receiver: receiver.clone(),
            class: Some(method.class),
            selector: *selector,
            is_block: false,
            args: args.clone(),
            env: env.clone(),
            span: Some(def.span),
            method: Some(method.clone()),
        });
        let cx = Cx { receiver, env, home: serial, class: Some(method.class), method: Some(method.clone()) };
        let result = match site {
            None => self.run_method_body(body, &cx),
            Some(site) => {
                let op = PendingOp::MethodBody(body.clone(), cx.clone());
                self.activation_hook(site, &cx, args, op)
            }
        };
        self.frames.pop();
        result
    }

    fn run_method_body(&mut self, body: &Rc<Node>, cx: &Cx) -> Result<Value, Unwind> {
        match self.eval(body, cx) {
            Ok(_) => Ok(cx.receiver.clone()),
            Err(Unwind::Return { home, value }) if home == cx.home => Ok(value),
            Err(other) => Err(other),
        }
    }

    pub(crate) fn call_block(&mut self, closure: &Rc<Closure>, args: Vec<Value>) -> Result<Value, Unwind> {
        let (def, site) = unhook(&closure.node);
        let NodeKind::Block { params, temps, body } = &def.kind else {
            unreachable!("closures are made from Block nodes")
        };
        if params.len() != args.len() {
            return Err(self.fail(ErrorKind::WrongArgumentCount { expected: params.len(), got: args.len() }));
        }
        self.check_depth()?;
        let mut vars = Vec::with_capacity(params.len() + temps.len());
        vars.extend(params.iter().copied().zip(args.iter().cloned()));
        vars.extend(temps.iter().map(|t| (t.var_name().expect("temp name"), Value::Nil)));
        let env = Env::new(vars, Some(closure.env.clone()));
        let serial = self.next_serial();
        let selector = closure.method.as_ref().map_or_else(|| Sym::new("DoIt"), |m| m.signature.selector);
        self.frames.push(Frame {
            serial,
            receiver: closure.receiver.clone(),
            class: closure.class.or(Some(self.builtins.undefined)),
            selector,
            is_block: true,
            args: args.clone(),
            env: env.clone(),
            span: Some(def.span),
            method: closure.method.clone(),
        });
        let cx = Cx {
            receiver: closure.receiver.clone(),
            env,
            home: closure.home,
            class: closure.class,
            method: closure.method.clone(),
        };
        let result = match site {
            None => self.eval(body, &cx),
            Some(site) => {
                let op = PendingOp::Eval(body.clone(), cx.clone());
                self.activation_hook(site, &cx, args, op)
            }
        };
        self.frames.pop();
        result
    }

    /// Calls a block, or sends `value...` to any other object.
    pub(crate) fn call_value(&mut self, callee: &Value, args: Vec<Value>) -> Result<Value, Unwind> {
        match callee {
            Value::Block(closure) => self.call_block(closure, args),
            other => {
                let selector = match args.len() {
                    0 => "value",
                    1 => "value:",
                    2 => "value:value:",
                    3 => "value:value:value:",
                    _ => "value:value:value:value:",
                };
                self.send(other.clone(), Sym::new(selector), args)
            }
        }
    }

    pub(crate) fn perform_op(&mut self, op: &PendingOp) -> Result<Value, Unwind> {
        match op {
            PendingOp::Send { receiver, selector, args, lookup_from } => {
                self.dispatch(receiver.clone(), *selector, args.clone(), *lookup_from)
            }
            PendingOp::Read(location) => Ok(self.read_location(location)),
            PendingOp::Write(location, value) => {
                self.write_location(location, value.clone());
                Ok(value.clone())
            }
            PendingOp::Yield(value) => Ok(value.clone()),
            PendingOp::Eval(node, cx) => self.eval(node, cx),
            PendingOp::MethodBody(body, cx) => self.run_method_body(body, cx),
        }
    }

    /// Hooks on method and block nodes fire around the whole activation.
    fn activation_hook(&mut self, site: &Rc<HookSite>, cx: &Cx, args: Vec<Value>, op: PendingOp) -> Result<Value, Unwind> {
        self.stats.hook_visits += 1;
        let mut ctx = TriggerContext::for_activation(site.node.clone(), cx, self.meta_level);
        ctx.activation_args = args;
        ctx.operation = Some(op);
        self.around(site, &mut ctx, |me, ctx| me.perform_op(ctx.operation.as_ref().expect("operation set")))
    }

    /// Before links, then the operation (or the instead link), then after links.
    fn around(
        &mut self,
        site: &HookSite,
        ctx: &mut TriggerContext,
        perform: impl FnOnce(&mut Self, &mut TriggerContext) -> Result<Value, Unwind>,
    ) -> Result<Value, Unwind> {
        self.fire_phase(site, Phase::Before, ctx)?;
        let value = match self.fire_phase(site, Phase::Instead, ctx)? {
            Some(v) => v,
            None => match ctx.performed() {
                Some(v) => v,
                None => perform(self, ctx)?,
            },
        };
        ctx.pending_value = Some(value.clone());
        self.fire_phase(site, Phase::After, ctx)?;
        Ok(value)
    }

    fn eval_hook(&mut self, hook: &Rc<Node>, wrapped: &Rc<Node>, site: &Rc<HookSite>, cx: &Cx) -> Result<Value, Unwind> {
        self.stats.hook_visits += 1;
        let mut ctx = TriggerContext::for_activation(site.node.clone(), cx, self.meta_level);
        ctx.activation_args = self.frames.last().map(|f| f.args.clone()).unwrap_or_default();
        match &wrapped.kind {
            NodeKind::MessageSend { receiver, selector, args } => {
                let (recv, lookup_from) = self.eval_receiver(receiver, cx)?;
                let mut argv = Vec::with_capacity(args.len());
                for arg in args {
                    argv.push(self.eval(arg, cx)?);
                }
                self.set_span(wrapped.span);
                ctx.pending_receiver = Some(recv.clone());
                ctx.pending_args = Some(argv.clone());
                let op = PendingOp::Send { receiver: recv, selector: *selector, args: argv, lookup_from };
                ctx.operation = Some(op.clone());
                self.around(site, &mut ctx, |me, _| me.perform_op(&op))
            }
            NodeKind::VarRead { name } => {
                let location = self.locate(*name, cx);
                ctx.variable = location.clone();
                ctx.operation = location.clone().map(PendingOp::Read);
                let name = *name;
                self.around(site, &mut ctx, |me, _| me.read_name(name, cx))
            }
            NodeKind::Assignment { name, value } => {
                let v = self.eval(value, cx)?;
                let location = self.locate(*name, cx);
                ctx.variable = location.clone();
                ctx.pending_value = Some(v.clone());
                ctx.operation = location.clone().map(|l| PendingOp::Write(l, v.clone()));
                let name = *name;
                self.fire_phase(site, Phase::Before, &mut ctx)?;
                let result = match self.fire_phase(site, Phase::Instead, &mut ctx)? {
                    Some(replacement) => replacement,
                    None => {
                        if ctx.performed().is_none() {
                            self.store_name(name, v.clone(), cx)?;
                        }
                        v
                    }
                };
                self.fire_phase(site, Phase::After, &mut ctx)?;
                Ok(result)
            }
            NodeKind::Return { value } => {
                let v = self.eval(value, cx)?;
                ctx.pending_value = Some(v.clone());
                ctx.operation = Some(PendingOp::Yield(v.clone()));
                self.fire_phase(site, Phase::Before, &mut ctx)?;
                let v = match self.fire_phase(site, Phase::Instead, &mut ctx)? {
                    // The return was replaced and never performed.
                    Some(replacement) if ctx.performed().is_none() => return Ok(replacement),
                    // Performed through #operation: return what the meta-object answered.
                    Some(replacement) => replacement,
                    None => v,
                };
                ctx.pending_value = Some(v.clone());
                self.fire_phase(site, Phase::After, &mut ctx)?;
                Err(self.return_from(v, cx))
            }
            NodeKind::Block { .. } => Ok(self.make_closure(hook, cx)),
            _ => {
                ctx.operation = Some(PendingOp::Eval(wrapped.clone(), cx.clone()));
                self.around(site, &mut ctx, |me, _| me.eval(wrapped, cx))
            }
        }
    }

    /// Fires the links of one phase. Returns the result of the last instead
    /// link that fired.
    fn fire_phase(&mut self, site: &HookSite, phase: Phase, ctx: &mut TriggerContext) -> Result<Option<Value>, Unwind> {
        let control = match phase {
            Phase::Before => Control::Before,
            Phase::Instead => Control::Instead,
            Phase::After => Control::After,
        };
        let mut ids: Vec<LinkId> = site.links.class_wide.clone();
        for (target, links) in &site.links.object_centric {
            if target.identical(&ctx.receiver) {
                ids.extend(links.iter().copied());
            }
        }
        if phase == Phase::After {
            ids.reverse();
        }
        let mut result = None;
        for id in ids {
            if self.links[id.0 as usize].dirty {
                // The link changed since weaving; pick up its new definition.
                self.stats.registry_reads += 1;
                let _ = self.invalidate(id);
            }
            let link = &self.links[id.0 as usize];
            if !link.enabled {
                continue;
            }
            let Some(config) = link.active.clone() else { continue };
            if config.control != control || config.level != self.meta_level {
                continue;
            }
            ctx.phase = phase;
            ctx.link = Some(id);
            let saved = self.meta_level;
            self.meta_level += 1;
            let fired = self.fire_link(&config, ctx);
            self.meta_level = saved;
            if let Some(v) = fired? {
                result = Some(v);
            }
        }
        Ok(result)
    }

    /// Runs at the meta level: condition, reifications, then the dispatch.
    fn fire_link(&mut self, config: &ActiveConfig, ctx: &TriggerContext) -> Result<Option<Value>, Unwind> {
        match &config.condition {
            None | Some(ActiveCondition::Constant(true)) => {}
            Some(ActiveCondition::Constant(false)) => return Ok(None),
            Some(ActiveCondition::Block { block, arguments }) => {
                let args = self.reify_all(arguments, ctx)?;
                if !matches!(self.call_value(block, args)?, Value::Bool(true)) {
                    return Ok(None);
                }
            }
        }
        let args = self.reify_all(&config.arguments, ctx)?;
        self.stats.link_fires += 1;
        self.send(config.meta_object.clone(), config.selector, args).map(Some)
    }

    fn reify_all(&self, kinds: &[crate::reify::ReificationKind], ctx: &TriggerContext) -> Result<Vec<Value>, Unwind> {
        kinds.iter().map(|&k| self.resolve(k, ctx).map_err(|e| self.fail(e.into()))).collect()
    }
}
