//! Ports of the seven introductory metalink listings, each with a check of
//! its observable behavior.

use std::time::{Duration, Instant};

use crate::metalink::Control;
use crate::runtime::{Interpreter, Outcome, ProgramError, RunResult};
use crate::value::{Native, Value};

type Check = fn(&Interpreter, &RunResult) -> Result<(), String>;

pub struct Listing {
    pub index: usize,
    pub title: &'static str,
    pub source: &'static str,
    check: Check,
}

#[derive(Debug)]
pub struct ListingReport {
    pub index: usize,
    pub title: &'static str,
    pub verdict: Result<(), String>,
    pub output: String,
    pub elapsed: Duration,
}

impl ListingReport {
    pub fn passed(&self) -> bool {
        self.verdict.is_ok()
    }
}

pub const LISTINGS: [Listing; 7] = [
    Listing { index: 1, title: "breakpoint link configuration", source: include_str!("listings/listing1.mk"), check: check1 },
    Listing { index: 2, title: "installation halts before logCr", source: include_str!("listings/listing2.mk"), check: check2 },
    Listing { index: 3, title: "removal and uninstallation", source: include_str!("listings/listing3.mk"), check: check3 },
    Listing { index: 4, title: "receiver and arguments reifications", source: include_str!("listings/listing4.mk"), check: check4 },
    Listing { index: 5, title: "condition on a reification", source: include_str!("listings/listing5.mk"), check: check5 },
    Listing { index: 6, title: "object-centric breakpoint", source: include_str!("listings/listing6.mk"), check: check6 },
    Listing { index: 7, title: "level-gated breakpoint", source: include_str!("listings/listing7.mk"), check: check7 },
];

pub fn listing(index: usize) -> Option<&'static Listing> {
    LISTINGS.iter().find(|l| l.index == index)
}

impl Listing {
    pub fn run(&self, seed: u64) -> ListingReport {
        let start = Instant::now();
        let mut interp = Interpreter::with_seed(seed);
        let name = format!("listing{}.mk", self.index);
        let (verdict, output) = match interp.run_file(self.source, &name) {
            Ok(run) => ((self.check)(&interp, &run), run.output),
            Err(ProgramError::Syntax(e)) => (Err(format!("syntax error: {e}")), String::new()),
            Err(ProgramError::Runtime { error, output }) => (Err(format!("runtime error: {error}")), output),
        };
        ListingReport { index: self.index, title: self.title, verdict, output, elapsed: start.elapsed() }
    }
}

pub fn run_all(seed: u64) -> Vec<ListingReport> {
    LISTINGS.iter().map(|l| l.run(seed)).collect()
}

fn expect(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn expect_output(run: &RunResult, want: &str) -> Result<(), String> {
    expect(run.output == want, || format!("output {:?}, expected {:?}", run.output, want))
}

fn expect_halt_in(run: &RunResult, label: &str) -> Result<(), String> {
    match &run.outcome {
        Outcome::Halt(h) => expect(h.trace.iter().any(|l| l.label.contains(label)), || {
            format!("halt trace does not mention {label}: {:?}", h.trace.iter().map(|l| &l.label).collect::<Vec<_>>())
        }),
        Outcome::Value(_) => Err("expected a halt".into()),
    }
}

fn expect_no_halt(run: &RunResult) -> Result<(), String> {
    expect(!run.halted(), || "unexpected halt".into())
}

fn check1(interp: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_no_halt(run)?;
    let Some(Value::Link(id)) = interp.global("metalink") else { return Err("metalink is not a MetaLink".into()) };
    let link = interp.link(id);
    expect(matches!(link.config.meta_object, Value::Class(c) if interp.class_name(c).as_str() == "Halt"), || "meta-object is not Halt".into())?;
    expect(link.config.selector.map(|s| s.as_str() == "now").unwrap_or(false), || "selector is not #now".into())?;
    expect(link.config.control == Control::Before, || "control is not #before".into())?;
    expect(!link.is_installed(), || "configured link is already installed".into())?;
    expect(run.output.lines().count() == 1, || format!("expected one description line, got {:?}", run.output))
}

fn check2(_: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_output(run, "")?;
    expect_halt_in(run, "logCr")
}

fn check3(interp: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_no_halt(run)?;
    expect_output(run, "an Object\nan Object\n")?;
    let Some(Value::Link(id)) = interp.global("metalink") else { return Err("metalink missing".into()) };
    expect(!interp.link(id).is_installed(), || "link still installed".into())
}

/// Checks the four lines one trigger of the reification block prints.
fn meta_block_lines(lines: &[&str], size: usize) -> Result<(), String> {
    expect(lines.len() == 4, || format!("expected 4 lines, got {lines:?}"))?;
    expect(lines[0] == "browse: OrderedCollection", || format!("browse line {:?}", lines[0]))?;
    let inner = lines[1]
        .strip_prefix("inspect: an OrderedCollection(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("receiver line {:?}", lines[1]))?;
    let items: Vec<&str> = inner.split_whitespace().collect();
    expect(items.len() == size && items.iter().all(|i| i.parse::<i64>().is_ok()), || format!("receiver items {items:?}"))?;
    let args = format!("inspect: an Array('Size: {size}')");
    expect(lines[2] == args, || format!("arguments line {:?}, expected {args:?}", lines[2]))?;
    let sized = format!("Size: {size}");
    expect(lines[3] == sized, || format!("size line {:?}", lines[3]))
}

fn check4(_: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_no_halt(run)?;
    let lines: Vec<&str> = run.output.lines().collect();
    meta_block_lines(&lines, 2)
}

fn check5(_: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_no_halt(run)?;
    let lines: Vec<&str> = run.output.lines().collect();
    expect(lines.first() == Some(&"Size: 2"), || format!("condition should hold back the meta block at size 2: {lines:?}"))?;
    meta_block_lines(&lines[1..], 3)
}

fn check6(_: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_output(run, "No break\n")?;
    expect_halt_in(run, "logCr:")
}

fn check7(interp: &Interpreter, run: &RunResult) -> Result<(), String> {
    expect_output(run, "")?;
    match &run.outcome {
        Outcome::Halt(h) => expect(h.message == "Halt", || format!("halt message {:?}", h.message))?,
        Outcome::Value(_) => return Err("expected the base-level call to halt".into()),
    }
    expect(interp.meta_level() == 0, || format!("meta level left at {}", interp.meta_level()))?;
    let Some(Value::Native(n)) = interp.global("probe") else { return Err("probe missing".into()) };
    let Native::LevelProbe(levels, count) = &*n else { return Err("probe is not a LevelProbe".into()) };
    // Exactly one meta-level run of messageText, and the level-0 link did not
    // fire again from inside it (that would recurse until the stack limit).
    expect(count.get() == 1, || format!("spy fired {} times (levels {:?})", count.get(), levels.borrow()))
}
