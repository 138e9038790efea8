//! Acceptance criteria 1 to 9, run in order on one thread so the timing
//! criteria never compete with each other. Prints one line per criterion and
//! exits nonzero when any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::rc::Rc;
use std::time::{Duration, Instant};

use metalink::ast::{find_nodes, Node};
use metalink::bench::{self, CacheState, Linkage, OverheadScenario, Workload};
use metalink::listings;
use metalink::mirror::Mirror;
use metalink::reify::{PendingOp, TriggerContext};
use metalink::runtime::VarLocation;
use metalink::value::Native;
use metalink::{
    ClassId, Control, Interpreter, Kind, LinkId, NodeId, NodeQuery, Phase, ReificationKind, ReifyError, Sym, Value,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn global(interp: &Interpreter, name: &str) -> Value {
    interp.global(name).unwrap_or_else(|| panic!("global {name} is not bound"))
}

fn run(interp: &mut Interpreter, source: &str) -> Result<metalink::RunResult, String> {
    interp.run_program(source).map_err(|e| format!("{e}"))
}

fn nodes_of(interp: &Interpreter, class: &str, selector: &str) -> Vec<Rc<Node>> {
    let root = interp.method_ast(class, selector).expect("method exists");
    find_nodes(&root, &NodeQuery::AllNodes)
}

fn class(interp: &Interpreter, name: &str) -> ClassId {
    interp.class_named(name).unwrap_or_else(|| panic!("class {name}"))
}

fn link(interp: &mut Interpreter, meta: Value, selector: &str, control: Control, args: &[&str]) -> LinkId {
    let id = interp.new_link();
    interp.set_meta_object(id, meta);
    interp.set_selector(id, selector);
    interp.set_control(id, control);
    interp.set_arguments(id, args);
    id
}

// 1 -------------------------------------------------------------------------

fn listings_conformance() -> Verdict {
    let start = Instant::now();
    let reports = listings::run_all(0);
    let elapsed = start.elapsed();
    for r in &reports {
        if let Err(why) = &r.verdict {
            return Err(format!("listing {}: {why}", r.index));
        }
    }
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{}/{} listings in {:.0} ms", reports.len(), reports.len(), elapsed.as_secs_f64() * 1e3))
}

// 2 -------------------------------------------------------------------------

/// The target-node column of the reification table, written out by hand.
fn table_targets(kind: ReificationKind) -> Option<&'static [Kind]> {
    use ReificationKind::*;
    const MESSAGE_METHOD_BLOCK: &[Kind] = &[Kind::MessageSend, Kind::MethodDef, Kind::Block];
    const MESSAGE_METHOD: &[Kind] = &[Kind::MessageSend, Kind::MethodDef];
    const VARIABLE_ASSIGNMENT: &[Kind] = &[Kind::VarRead, Kind::Assignment];
    const VALUE: &[Kind] = &[Kind::VarRead, Kind::Assignment, Kind::MessageSend, Kind::Return];
    match kind {
        Arguments => Some(MESSAGE_METHOD_BLOCK),
        Receiver | Selector | Sender => Some(MESSAGE_METHOD),
        Name | NewValue => Some(VARIABLE_ASSIGNMENT),
        Value => Some(VALUE),
        _ => None,
    }
}

/// Phases in which the reified value exists for an applicable pair.
fn available(kind: ReificationKind, node: Kind, phase: Phase) -> bool {
    match (kind, node) {
        (ReificationKind::Value, Kind::MessageSend | Kind::VarRead) => phase == Phase::After,
        (ReificationKind::NewValue, Kind::VarRead) => false,
        _ => true,
    }
}

const MATRIX_SOURCE: &str = "class Matrix [ | slot |
  run: arg [ | t | t := arg + 1. slot := #(1 2). ^[:b | b] value: self ] ]";

fn matrix_nodes(interp: &mut Interpreter) -> Vec<Rc<Node>> {
    let mut by_kind = Vec::new();
    let program = metalink::parser::parse(MATRIX_SOURCE).expect("matrix source parses");
    by_kind.push(program.classes[0].clone());
    let all = nodes_of(interp, "Matrix", "run:");
    for kind in Kind::ALL.into_iter().filter(|k| *k != Kind::ClassDef) {
        let node = all.iter().find(|n| n.kind() == kind).unwrap_or_else(|| panic!("no {kind} node"));
        by_kind.push(node.clone());
    }
    by_kind
}

fn expected_value(
    interp: &Interpreter,
    kind: ReificationKind,
    ctx: &TriggerContext,
    got: &Value,
) -> Result<(), String> {
    use ReificationKind as R;
    let node_kind = ctx.node.kind();
    let same_int = |want: i64| ensure(got.as_int() == Some(want), || format!("expected {want}"));
    let array_of = |want: &[i64]| match got {
        Value::Array(a) => {
            let items: Vec<Option<i64>> = a.items.borrow().iter().map(Value::as_int).collect();
            ensure(items == want.iter().map(|&w| Some(w)).collect::<Vec<_>>(), || format!("array {items:?}"))
        }
        _ => Err("not an array".into()),
    };
    let method_mirror = |woven: bool| match got {
        Value::Mirror(m) => match &**m {
            Mirror::Method { method, .. } => {
                let expected = ctx.method.as_ref().expect("ctx method");
                ensure(Rc::ptr_eq(method, expected) && m.is_woven() == woven, || "wrong method mirror".into())
            }
            _ => Err("not a method mirror".into()),
        },
        _ => Err("not a mirror".into()),
    };
    match kind {
        R::Arguments if node_kind == Kind::MessageSend => array_of(&[1]),
        R::Arguments => array_of(&[41]),
        R::Class => ensure(matches!(got, Value::Class(c) if interp.class_name(*c).as_str() == "Matrix"), || {
            "class is not Matrix".into()
        }),
        R::Receiver if node_kind == Kind::MessageSend => same_int(41),
        R::Receiver | R::Object => ensure(got.identical(&ctx.receiver), || "not the executing object".into()),
        R::Entity | R::OriginalMethod | R::Method => method_mirror(false),
        R::Link => ensure(matches!(got, Value::Link(l) if Some(*l) == ctx.link), || "not the firing link".into()),
        R::Name => ensure(matches!(got, Value::Symbol(s) if Some(*s) == ctx.node.var_name()), || "wrong name".into()),
        R::NewValue | R::Value => same_int(42),
        R::Node => ensure(
            matches!(got, Value::Mirror(m) if m.node().is_some_and(|n| Rc::ptr_eq(n, &ctx.node))),
            || "not a mirror of the hooked node".into(),
        ),
        R::Operation => ensure(
            matches!(got, Value::Native(n) if matches!(&**n, Native::Operation(w) if !w.invoked())),
            || "not an uninvoked operation".into(),
        ),
        R::Selector => {
            ensure(matches!(got, Value::Symbol(s) if Some(*s) == ctx.node.selector()), || "wrong selector".into())
        }
        // Resolved outside any activation: there is neither a sender nor a
        // current context.
        R::Sender | R::Context => ensure(got.is_nil(), || "expected nil outside an activation".into()),
        R::Variable => match (node_kind, got) {
            (Kind::VarRead | Kind::Assignment, Value::Mirror(m)) => match &**m {
                Mirror::Variable(v) => {
                    ensure(Some(v.name) == ctx.node.var_name() && v.read(interp).as_int() == Some(5), || {
                        "variable mirror does not read the slot".into()
                    })
                }
                _ => Err("not a variable mirror".into()),
            },
            (Kind::VarRead | Kind::Assignment, _) => Err("expected a variable mirror".into()),
            _ => ensure(got.is_nil(), || "expected nil for a node without a variable".into()),
        },
    }
}

fn reification_matrix() -> Verdict {
    let mut interp = Interpreter::new();
    run(&mut interp, MATRIX_SOURCE)?;
    run(&mut interp, "matrixObject := Matrix new. matrixObject instVarNamed: #slot put: 5")?;
    let receiver = global(&interp, "matrixObject");
    let Value::Object(instance) = &receiver else { return Err("matrixObject is not an instance".into()) };
    let method = interp.method("Matrix", "run:").map_err(|e| e.to_string())?;
    let link = interp.new_link();
    let nodes = matrix_nodes(&mut interp);

    let mut cells = 0;
    let mut inapplicable = 0;
    for node in &nodes {
        for kind in ReificationKind::ALL {
            let applicable = table_targets(kind).is_none_or(|ks| ks.contains(&node.kind()));
            ensure(kind.applicable(node.kind()) == applicable, || format!("{kind} on {} disagrees", node.kind()))?;
            for phase in [Phase::Before, Phase::Instead, Phase::After] {
                cells += 1;
                let mut ctx = TriggerContext::new(node.clone(), receiver.clone());
                ctx.phase = phase;
                ctx.link = Some(link);
                ctx.method = Some(method.clone());
                ctx.activation_args = vec![Value::Int(41)];
                ctx.pending_receiver = Some(Value::Int(41));
                ctx.pending_args = Some(vec![Value::Int(1)]);
                // Offered in every phase: the phase rules must hold it back.
                ctx.pending_value = Some(Value::Int(42));
                if matches!(node.kind(), Kind::VarRead | Kind::Assignment) {
                    ctx.variable = Some(VarLocation::Slot { object: instance.clone(), index: 0 });
                }
                ctx.operation = Some(PendingOp::Yield(Value::Int(7)));
                let cell = format!("{kind} on {} {phase}", node.kind());
                match (applicable, interp.resolve(kind, &ctx)) {
                    (false, Err(ReifyError::InapplicableReification { .. })) => inapplicable += 1,
                    (false, other) => return Err(format!("{cell}: expected InapplicableReification, got {:?}", other.err())),
                    (true, Ok(v)) if available(kind, node.kind(), phase) => {
                        expected_value(&interp, kind, &ctx, &v).map_err(|e| format!("{cell}: {e}"))?
                    }
                    (true, Err(ReifyError::PhaseUnavailable { .. })) if !available(kind, node.kind(), phase) => {}
                    (true, other) => return Err(format!("{cell}: unexpected {:?}", other.err())),
                }
            }
        }
    }
    ensure(interp.output().is_empty(), || "resolving produced output".into())?;
    ensure(cells == 17 * Kind::ALL.len() * 3, || format!("{cells} cells"))?;
    Ok(format!("{cells}/{cells} cells ({inapplicable} inapplicable)"))
}

// 3 -------------------------------------------------------------------------

struct Generated {
    classes: String,
    main: String,
    methods: usize,
}

fn expr(rng: &mut ChaCha8Rng, method: usize, depth: u32) -> String {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => rng.gen_range(0..10).to_string(),
            1 => "a".into(),
            2 => "b".into(),
            _ => "x".into(),
        };
    }
    match rng.gen_range(0..4) {
        0 => format!("({} + {})", expr(rng, method, depth - 1), expr(rng, method, depth - 1)),
        1 => format!("(({} * 3) \\\\ 1000)", expr(rng, method, depth - 1)),
        2 if method > 0 => format!("(self m{}: {})", rng.gen_range(0..method), expr(rng, method, depth - 1)),
        _ => format!("({} max: {})", expr(rng, method, depth - 1), expr(rng, method, depth - 1)),
    }
}

fn statement(rng: &mut ChaCha8Rng, method: usize) -> String {
    match rng.gen_range(0..7) {
        0 => format!("a := {}.", expr(rng, method, 2)),
        1 => format!("b := (b + {}) \\\\ 10000.", expr(rng, method, 2)),
        2 => format!("Transcript log: ({}) printString.", expr(rng, method, 2)),
        3 => format!("1 to: {} do: [:i | a := (a + i) \\\\ 10000].", rng.gen_range(1..6)),
        4 => "(a > b) ifTrue: [Transcript log: 'gt'] ifFalse: [Transcript log: 'le'].".into(),
        5 => format!("t := {}. Transcript log: t printString.", expr(rng, method, 1)),
        _ => "(Array with: a with: b) do: [:each | Transcript log: each printString].".into(),
    }
}

fn generate(rng: &mut ChaCha8Rng) -> Generated {
    let methods = rng.gen_range(2..=4);
    let mut classes = String::from("class Gen [ | a b |\n  init [ a := 0. b := 1 ]\n");
    for m in 0..methods {
        let body: Vec<String> = (0..rng.gen_range(1..=4)).map(|_| statement(rng, m)).collect();
        classes.push_str(&format!("  m{m}: x [ | t | {} ^{} ]\n", body.join(" "), expr(rng, m, 2)));
    }
    classes.push_str("]\nclass Spy [ hit [ Transcript log: 'spy' ] hit: r [ Transcript log: r printString ] instead [ ^0 ] ]\n");
    let main = format!(
        "| g | g := Gen new. g init. Transcript log: (g m{}: {}) printString. Transcript log: (g m0: {}) printString.",
        methods - 1,
        rng.gen_range(0..5),
        rng.gen_range(0..5)
    );
    Generated { classes, main, methods }
}

fn output_of(interp: &mut Interpreter, main: &str) -> String {
    match interp.run_program(main) {
        Ok(r) => r.output,
        Err(metalink::runtime::ProgramError::Runtime { error, output }) => format!("{output}<error {error}>"),
        Err(e) => format!("<{e}>"),
    }
}

fn identity_restoration() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut links_installed = 0;
    let mut diverged = 0;
    for case in 0..200 {
        let program = generate(&mut rng);
        let mut oracle = Interpreter::new();
        run(&mut oracle, &program.classes).map_err(|e| format!("case {case}: {e}\n{}", program.classes))?;
        let expected = output_of(&mut oracle, &program.main);
        ensure(!expected.contains("<error"), || format!("case {case}: oracle run failed: {expected}"))?;

        let mut interp = Interpreter::new();
        run(&mut interp, &program.classes)?;
        run(&mut interp, "spy := Spy new")?;
        let spy = global(&interp, "spy");
        let mut placed: Vec<(LinkId, NodeId)> = Vec::new();
        for _ in 0..rng.gen_range(1..=5) {
            let selector = format!("m{}:", rng.gen_range(0..program.methods));
            let nodes = nodes_of(&interp, "Gen", &selector);
            let node = nodes.choose(&mut rng).expect("methods have nodes").clone();
            let control = [Control::Before, Control::After, Control::Instead][rng.gen_range(0..3)];
            let id = match control {
                Control::Instead => link(&mut interp, spy.clone(), "instead", control, &[]),
                _ if rng.gen_bool(0.5) => link(&mut interp, spy.clone(), "hit", control, &[]),
                _ => {
                    let arg = ["node", "object", "class", "selector", "link", "context"].choose(&mut rng).unwrap();
                    link(&mut interp, spy.clone(), "hit:", control, &[arg])
                }
            };
            if interp.install(id, node.id).is_ok() {
                placed.push((id, node.id));
            }
        }
        links_installed += placed.len();
        diverged += usize::from(output_of(&mut interp, &program.main) != expected);
        for (id, node) in &placed {
            if rng.gen_bool(0.5) {
                interp.uninstall(*id);
            } else {
                interp.remove_link(*node, *id);
            }
        }
        let restored = output_of(&mut interp, &program.main);
        ensure(restored == expected, || {
            format!("case {case}: {restored:?} != {expected:?}\n{}\n{}", program.classes, program.main)
        })?;
        ensure(interp.methods().all(|m| !m.has_twin()), || format!("case {case}: a twin survived"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200/200 programs, {links_installed} links, {diverged} linked runs diverged, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

// 4 -------------------------------------------------------------------------

const LEVELS_SOURCE: &str = "
class Base [ work [ ^self step + 1 ] step [ | t | t := 2. ^t * 3 ] ]
class Nest [ hit [ ^Base new work ] ]";

fn probe_levels(probe: &Value) -> Vec<u32> {
    match probe {
        Value::Native(n) => match &**n {
            Native::LevelProbe(levels, _) => levels.borrow().clone(),
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

fn level_discipline() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut halts = 0;
    let mut fires = 0;
    for trial in 0..200 {
        let mut interp = Interpreter::new();
        run(&mut interp, LEVELS_SOURCE)?;
        let step = interp.method_ast("Base", "step").map_err(|e| e.to_string())?;
        let mut candidates = nodes_of(&interp, "Base", "work");
        candidates.extend(nodes_of(&interp, "Base", "step"));
        candidates.retain(|n| n.kind() != Kind::TempDecl && n.kind() != Kind::Sequence);

        // Nest links at levels 0..depth re-enter the base code one level up,
        // so levels 0..=depth run and depth + 1 <= 4.
        let depth = rng.gen_range(0..=3u32);
        for level in 0..depth {
            run(&mut interp, "nest := Nest new")?;
            let nest = global(&interp, "nest");
            let id = link(&mut interp, nest, "hit", Control::Before, &[]);
            interp.set_level(id, level);
            interp.install(id, step.id).map_err(|e| e.to_string())?;
        }
        let halt_level = rng.gen_bool(0.3).then(|| rng.gen_range(0..=3u32));
        if let Some(level) = halt_level {
            let halt = Value::Class(class(&interp, "Halt"));
            let id = link(&mut interp, halt, "now", Control::Before, &[]);
            interp.set_level(id, level);
            let ret = find_nodes(&step, &NodeQuery::StatementAt(2)).pop().ok_or("no return")?;
            interp.install(id, ret.id).map_err(|e| e.to_string())?;
        }
        let mut probes = Vec::new();
        for p in 0..rng.gen_range(1..=6) {
            run(&mut interp, &format!("probe{p} := LevelProbe new"))?;
            let probe = global(&interp, &format!("probe{p}"));
            let level = rng.gen_range(0..=3u32);
            let control = if rng.gen_bool(0.5) { Control::Before } else { Control::After };
            let id = link(&mut interp, probe.clone(), "record", control, &[]);
            interp.set_level(id, level);
            let node = candidates.choose(&mut rng).unwrap();
            interp.install(id, node.id).map_err(|e| e.to_string())?;
            probes.push((probe, level));
        }

        let result = interp.run_program("Base new work").map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(interp.meta_level() == 0, || format!("trial {trial}: meta level left at {}", interp.meta_level()))?;
        let halted = result.halted();
        ensure(halted == halt_level.is_some_and(|h| h <= depth), || format!("trial {trial}: halt mismatch"))?;
        halts += halted as usize;
        for (probe, level) in &probes {
            let levels = probe_levels(probe);
            fires += levels.len();
            ensure(levels.iter().all(|&l| l == level + 1), || {
                format!("trial {trial}: level-{level} link ran its meta-object at levels {levels:?}")
            })?;
            if !halted {
                let want = usize::from(*level <= depth);
                ensure(levels.len() == want, || format!("trial {trial}: level-{level} probe fired {} times", levels.len()))?;
            }
        }
    }
    Ok(format!("200/200 nests, {fires} probe fires, {halts} halting runs"))
}

// 5 -------------------------------------------------------------------------

fn object_centric_isolation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut interp = Interpreter::new();
    run(
        &mut interp,
        "class Cell [ | v | touch [ v := 1. ^v ] ]
         class Recorder [ | seen | init [ seen := OrderedCollection new ] record: o [ seen add: o ] seen [ ^seen ] ]
         cells := OrderedCollection new.
         1 to: 100 do: [:i | cells add: Cell new].
         recorder := Recorder new.
         recorder init",
    )?;
    let cells: Vec<Value> = match global(&interp, "cells") {
        Value::Array(a) => a.items.borrow().clone(),
        _ => return Err("cells is not a collection".into()),
    };
    ensure(cells.len() == 100, || format!("{} cells", cells.len()))?;
    let chosen: Vec<usize> = rand::seq::index::sample(&mut rng, 100, 7).into_vec();
    let root = interp.method_ast("Cell", "touch").map_err(|e| e.to_string())?;
    let recorder = global(&interp, "recorder");
    let id = link(&mut interp, recorder, "record:", Control::Before, &["object"]);
    for &i in &chosen {
        interp.install_for_object(id, root.id, cells[i].clone()).map_err(|e| e.to_string())?;
    }
    run(&mut interp, "cells do: [:c | c touch]. cells reverseDo: [:c | c touch]")?;

    let seen: Vec<Value> = match run(&mut interp, "recorder seen")?.outcome {
        metalink::Outcome::Value(Value::Array(a)) => a.items.borrow().clone(),
        _ => return Err("recorder seen is not a collection".into()),
    };
    // Brute force: map every record back to its index in the population.
    let mut hits = vec![0usize; cells.len()];
    for s in &seen {
        let index = cells.iter().position(|c| c.identical(s)).ok_or("recorded an object outside the population")?;
        hits[index] += 1;
    }
    let fired: BTreeSet<usize> = (0..cells.len()).filter(|&i| hits[i] > 0).collect();
    let expected: BTreeSet<usize> = chosen.iter().copied().collect();
    ensure(fired == expected, || format!("fired for {fired:?}, linked {expected:?}"))?;
    ensure(expected.iter().all(|&i| hits[i] == 2), || format!("per-object counts {hits:?}"))?;
    Ok(format!("7/7 linked objects fired, 93 silent, {} records", seen.len()))
}

// 6 -------------------------------------------------------------------------

const TWIN_SOURCE: &str = "
class Tw [ | v |
  a [ v := 1. ^v + 2 ]
  b: x [ ^x * 2 ]
  c [ ^(self b: 3) + (self a) ] ]
class Tw2 extends Tw [ d [ ^self c ] ]
class Spy [ hit [ ^nil ] ]";

const TWIN_METHODS: [(&str, &str, &str); 4] = [
    ("Tw", "a", "a [ v := 1. ^v + 2 ]"),
    ("Tw", "b:", "b: x [ ^x * 2 ]"),
    ("Tw", "c", "c [ ^(self b: 3) + (self a) ]"),
    ("Tw2", "d", "d [ ^self c ]"),
];

/// The invariant recomputed from scratch: a method has a twin exactly when
/// some node of its current tree has a registered link.
fn brute_force_twins(interp: &Interpreter) -> Result<(), String> {
    for (class, selector, _) in TWIN_METHODS {
        let method = interp.method(class, selector).map_err(|e| e.to_string())?;
        let linked = find_nodes(&method.ast(), &NodeQuery::AllNodes).iter().any(|n| !interp.links_on(n.id).is_empty());
        ensure(method.has_twin() == linked, || format!("{class}>>{selector}: twin {} linked {linked}", method.has_twin()))?;
    }
    Ok(())
}

fn twin_lifecycle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut interp = Interpreter::new();
    run(&mut interp, TWIN_SOURCE)?;
    run(&mut interp, "spy := Spy new. target := Tw2 new")?;
    let spy = global(&interp, "spy");
    let target = global(&interp, "target");
    let links: Vec<LinkId> = (0..6).map(|_| link(&mut interp, spy.clone(), "hit", Control::Before, &[])).collect();
    let mut placed: Vec<(LinkId, NodeId, bool)> = Vec::new();
    let mut ops = [0usize; 6];
    for step in 0..500 {
        let (owner, selector, source) = TWIN_METHODS[rng.gen_range(0..TWIN_METHODS.len())];
        let op = rng.gen_range(0..6);
        ops[op] += 1;
        match op {
            0 | 1 => {
                let nodes = nodes_of(&interp, owner, selector);
                let node = nodes.choose(&mut rng).unwrap().id;
                let id = *links.choose(&mut rng).unwrap();
                let object = op == 1;
                let installed = if object {
                    interp.install_for_object(id, node, target.clone())
                } else {
                    interp.install(id, node)
                };
                if installed.is_ok() {
                    placed.push((id, node, object));
                }
            }
            2 if !placed.is_empty() => {
                let (id, node, object) = placed.swap_remove(rng.gen_range(0..placed.len()));
                if object {
                    interp.remove_link_for_object(node, id, &target);
                } else {
                    interp.remove_link(node, id);
                }
            }
            3 => {
                let id = *links.choose(&mut rng).unwrap();
                interp.uninstall(id);
                placed.retain(|(l, _, _)| *l != id);
            }
            4 => {
                interp.recompile(class(&interp, owner), Sym::new(selector), source).map_err(|e| e.to_string())?;
            }
            _ => {
                let id = *links.choose(&mut rng).unwrap();
                interp.set_selector(id, "hit");
                interp.invalidate(id).map_err(|e| format!("step {step}: {e}"))?;
            }
        }
        ensure(interp.twin_invariant_holds(), || format!("step {step}: registry and twins disagree"))?;
        brute_force_twins(&interp).map_err(|e| format!("step {step}: {e}"))?;
        if step % 50 == 0 {
            let r = run(&mut interp, "target d")?;
            ensure(matches!(r.outcome, metalink::Outcome::Value(Value::Int(9))), || format!("step {step}: target d"))?;
        }
    }
    Ok(format!("500/500 steps (install {} object {} remove {} uninstall {} recompile {} invalidate {})",
        ops[0], ops[1], ops[2], ops[3], ops[4], ops[5]))
}

// 7 -------------------------------------------------------------------------

fn benchmark_orderings() -> Verdict {
    let budget = Duration::from_secs(1);
    let start = Instant::now();
    let mut overhead = Vec::new();
    for linkage in Linkage::ALL {
        let scenario = OverheadScenario::new(Workload::MessageSend, linkage).with_budget(budget);
        overhead.push(bench::bench_overhead(&scenario).map_err(|e| e.to_string())?.overhead_percent);
    }
    let overhead_time = start.elapsed();
    let (none, empty, full) = (overhead[0], overhead[1], overhead[2]);
    let start = Instant::now();
    let install = bench::bench_install(bench::DEFAULT_CORPUS, CacheState::Hot);
    let install_time = start.elapsed();
    let hot = install.install_hot_seconds.ok_or("hot install not measured")?;
    let summary = format!(
        "send full {full:.1}% empty {empty:.1}% nolink {none:+.1}%; install hot {:.1} ms cold {:.1} ms recompile {:.1} ms",
        hot * 1e3,
        install.install_cold_seconds * 1e3,
        install.recompile_seconds * 1e3
    );
    ensure(full >= empty && empty > none && none.abs() <= 5.0, || format!("overhead ordering: {summary}"))?;
    ensure(install.method_count == bench::DEFAULT_CORPUS, || format!("corpus has {} methods", install.method_count))?;
    ensure(hot <= install.install_cold_seconds && install.install_cold_seconds <= install.recompile_seconds, || {
        format!("install ordering: {summary}")
    })?;
    let limit = Duration::from_secs(180);
    ensure(overhead_time < limit && install_time < limit, || format!("harness too slow: {overhead_time:?}, {install_time:?}"))?;
    Ok(summary)
}

// 8 -------------------------------------------------------------------------

fn zero_cost_baseline() -> Verdict {
    let mut interp = Interpreter::new();
    run(
        &mut interp,
        "class Loop [ run [ | s | s := 0. 1 to: 1000000 do: [:i | s := s + i]. ^s ] other [ ^1 ] ]
         class Spy [ hit [ ^nil ] ]
         spy := Spy new",
    )?;
    // A link elsewhere in the class must not cost the loop anything.
    let other = interp.method_ast("Loop", "other").map_err(|e| e.to_string())?;
    let spy = global(&interp, "spy");
    let id = link(&mut interp, spy, "hit", Control::Before, &[]);
    interp.install(id, other.id).map_err(|e| e.to_string())?;
    interp.reset_stats();
    let result = run(&mut interp, "Loop new run")?;
    let stats = interp.stats();
    ensure(matches!(result.outcome, metalink::Outcome::Value(Value::Int(500000500000))), || "wrong sum".into())?;
    ensure(stats.hook_visits == 0 && stats.registry_reads == 0, || format!("{stats:?}"))?;
    Ok(format!("0 hook visits, 0 registry reads over 10^6 iterations ({} sends)", stats.sends))
}

// 9 -------------------------------------------------------------------------

fn persistent_watch() -> Verdict {
    let mut interp = Interpreter::new();
    run(&mut interp, "class Account [ | balance | deposit: n [ balance := n ] ]")?;
    let account = class(&interp, "Account");
    let plain = interp.watch_variable(account, "balance", false).map_err(|e| e.to_string())?;
    let kept = interp.watch_variable(account, "balance", true).map_err(|e| e.to_string())?;
    run(&mut interp, "Account new deposit: 10")?;
    ensure(interp.watch_history(plain).len() == 1 && interp.watch_history(kept).len() == 1, || {
        "both watches should record before the recompile".into()
    })?;
    interp.recompile(account, Sym::new("deposit:"), "deposit: n [ balance := n * 2 ]").map_err(|e| e.to_string())?;
    run(&mut interp, "Account new deposit: 20")?;
    let plain_len = interp.watch_history(plain).len();
    let kept_values: Vec<Option<i64>> = interp.watch_history(kept).iter().map(|r| r.value.as_int()).collect();
    ensure(plain_len == 1, || format!("plain watch kept recording ({plain_len} records)"))?;
    ensure(kept_values == [Some(10), Some(40)], || format!("persistent watch history {kept_values:?}"))?;
    Ok("plain watch stopped at 1 record, persistent watch resumed with 40".into())
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("listings conformance", listings_conformance),
        ("reification matrix", reification_matrix),
        ("identity restoration", identity_restoration),
        ("level discipline", level_discipline),
        ("object-centric isolation", object_centric_isolation),
        ("twin lifecycle", twin_lifecycle),
        ("benchmark orderings", benchmark_orderings),
        ("zero-cost baseline", zero_cost_baseline),
        ("persistent watch", persistent_watch),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
