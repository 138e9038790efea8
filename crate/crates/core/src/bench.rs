//! Overhead and installation-cost measurements.
//!
//! Overhead runs a workload method repeatedly for a time budget and reports
//! executions per second against an unlinked reference. Installation cost
//! compares recompiling a corpus with installing a trivial link on it.

use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::ast::{find_nodes, NodeId, NodeQuery};
use crate::metalink::Control;
use crate::runtime::{CompiledMethod, Interpreter, Unwind};
use crate::symbol::Sym;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Workload {
    /// `doSend` sends a one-argument message; links go on that send.
    MessageSend,
    /// `doVar` assigns then reads a slot; links go on both.
    VarReadWrite,
    /// Same method as `VarReadWrite`, linked on the read only.
    VarRead,
    /// Same method as `VarReadWrite`, linked on the write only.
    VarWrite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Linkage {
    NoLink,
    /// A before link sending a 0-arg empty method, no reifications.
    EmptyMetaCall,
    /// A link reifying object, selector, arguments and receiver on sends,
    /// object, name and value on variable accesses.
    FullReification,
}

impl Workload {
    pub const ALL: [Workload; 4] = [Workload::MessageSend, Workload::VarReadWrite, Workload::VarRead, Workload::VarWrite];

    pub fn name(self) -> &'static str {
        match self {
            Workload::MessageSend => "send",
            Workload::VarReadWrite => "var",
            Workload::VarRead => "var-read",
            Workload::VarWrite => "var-write",
        }
    }

    pub fn from_name(name: &str) -> Option<Workload> {
        Workload::ALL.into_iter().find(|w| w.name() == name)
    }

    fn selector(self) -> &'static str {
        match self {
            Workload::MessageSend => "doSend",
            _ => "doVar",
        }
    }
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::NoLink, Linkage::EmptyMetaCall, Linkage::FullReification];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::NoLink => "nolink",
            Linkage::EmptyMetaCall => "empty",
            Linkage::FullReification => "full",
        }
    }

    pub fn from_name(name: &str) -> Option<Linkage> {
        Linkage::ALL.into_iter().find(|l| l.name() == name)
    }
}

#[derive(Clone, Debug)]
pub struct OverheadScenario {
    pub workload: Workload,
    pub linkage: Linkage,
    /// Executions between clock checks.
    pub iterations: u64,
    /// Measuring time per repetition.
    pub duration_budget: Duration,
}

impl OverheadScenario {
    pub fn new(workload: Workload, linkage: Linkage) -> OverheadScenario {
        OverheadScenario { workload, linkage, iterations: 1_000, duration_budget: Duration::from_secs(5) }
    }

    pub fn with_budget(mut self, budget: Duration) -> OverheadScenario {
        self.duration_budget = budget;
        self
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.workload.name(), self.linkage.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("one batch of {iterations} executions took {took:?}, over the {budget:?} budget")]
    BudgetExceeded { iterations: u64, took: Duration, budget: Duration },
    #[error("workload failed: {0}")]
    Workload(String),
}

pub const REPETITIONS: usize = 3;

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub scenario: String,
    pub reference: String,
    /// Median executions per second of the scenario.
    pub executions_per_second: f64,
    pub reference_per_second: f64,
    pub overhead_percent: f64,
    pub repetitions: usize,
    /// What the last workload execution answered, for neutrality checks.
    pub result: String,
}

const WORKLOAD: &str = "
class BenchWorkload [
  | slot |
  doSend [ ^self callee: 3 ]
  callee: x [ ^x ]
  doVar [ slot := 1. ^slot ]
]

class BenchMeta [
  noop [ ]
  send: object selector: selector arguments: arguments receiver: receiver [ ]
  write: object name: name newValue: value [ ]
  read: object name: name value: value [ ]
]
";

/// A prepared interpreter running one scenario.
struct Bench {
    interp: Interpreter,
    receiver: Value,
    selector: Sym,
}

impl Bench {
    fn new(workload: Workload, linkage: Linkage) -> Bench {
        let mut interp = Interpreter::new();
        interp.run_program(WORKLOAD).expect("benchmark workload loads");
        interp.run_program("benchTarget := BenchWorkload new. benchMeta := BenchMeta new").expect("benchmark objects");
        let receiver = interp.global("benchTarget").unwrap();
        let meta = interp.global("benchMeta").unwrap();
        let root = interp.method_ast("BenchWorkload", workload.selector()).unwrap();
        let slot = Sym::new("slot");
        let sends = || find_nodes(&root, &NodeQuery::SendsOf(Sym::new("callee:")));
        let writes = || find_nodes(&root, &NodeQuery::WritesOf(slot));
        let reads = || find_nodes(&root, &NodeQuery::ReadsOf(slot));
        let mut attach = |nodes: Vec<Rc<crate::ast::Node>>, selector: &str, arguments: &[&str], control: Control| {
            let link = interp.new_link();
            interp.set_meta_object(link, meta.clone());
            interp.set_selector(link, selector);
            interp.set_control(link, control);
            interp.set_arguments(link, arguments);
            for n in nodes {
                interp.install(link, n.id).expect("benchmark link installs");
            }
        };
        match linkage {
            Linkage::NoLink => {}
            Linkage::EmptyMetaCall => {
                let nodes = match workload {
                    Workload::MessageSend => sends(),
                    Workload::VarReadWrite => [writes(), reads()].concat(),
                    Workload::VarRead => reads(),
                    Workload::VarWrite => writes(),
                };
                attach(nodes, "noop", &[], Control::Before);
            }
            Linkage::FullReification => {
                if workload == Workload::MessageSend {
                    attach(sends(), "send:selector:arguments:receiver:", &["object", "selector", "arguments", "receiver"], Control::Before);
                }
                if matches!(workload, Workload::VarReadWrite | Workload::VarWrite) {
                    attach(writes(), "write:name:newValue:", &["object", "name", "newValue"], Control::Before);
                }
                if matches!(workload, Workload::VarReadWrite | Workload::VarRead) {
                    // The value read only exists once the read has happened.
                    attach(reads(), "read:name:value:", &["object", "name", "value"], Control::After);
                }
            }
        }
        Bench { interp, receiver, selector: Sym::new(workload.selector()) }
    }

    fn execute(&mut self) -> Result<Value, Unwind> {
        self.interp.send(self.receiver.clone(), self.selector, Vec::new())
    }

    /// Runs batches until the budget is spent; answers executions per second.
    fn rate(&mut self, iterations: u64, budget: Duration) -> Result<(f64, Value), BenchError> {
        let start = Instant::now();
        let mut done = 0u64;
        let mut last = Value::Nil;
        loop {
            let batch = Instant::now();
            for _ in 0..iterations {
                last = self.execute().map_err(|e| BenchError::Workload(format!("{e:?}")))?;
            }
            let took = batch.elapsed();
            if done == 0 && took > budget {
                return Err(BenchError::BudgetExceeded { iterations, took, budget });
            }
            done += iterations;
            let elapsed = start.elapsed();
            if elapsed >= budget {
                return Ok((done as f64 / elapsed.as_secs_f64(), last));
            }
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

pub fn overhead_percent(reference_rate: f64, scenario_rate: f64) -> f64 {
    (reference_rate / scenario_rate - 1.0) * 100.0
}

/// Measures `scenario` against the unlinked run of the same workload.
/// Repetitions of the two alternate so drift hits both alike.
pub fn bench_overhead(scenario: &OverheadScenario) -> Result<BenchReport, BenchError> {
    let mut reference = Bench::new(scenario.workload, Linkage::NoLink);
    let mut subject = Bench::new(scenario.workload, scenario.linkage);
    let warm_up = scenario.duration_budget / 4;
    reference.rate(scenario.iterations, warm_up)?;
    subject.rate(scenario.iterations, warm_up)?;
    let (mut ref_rates, mut rates) = (Vec::new(), Vec::new());
    let mut result = Value::Nil;
    for _ in 0..REPETITIONS {
        ref_rates.push(reference.rate(scenario.iterations, scenario.duration_budget)?.0);
        let (rate, value) = subject.rate(scenario.iterations, scenario.duration_budget)?;
        rates.push(rate);
        result = value;
    }
    let (reference_per_second, executions_per_second) = (median(ref_rates), median(rates));
    Ok(BenchReport {
        scenario: scenario.id(),
        reference: format!("{}/{}", scenario.workload.name(), Linkage::NoLink.name()),
        executions_per_second,
        reference_per_second,
        overhead_percent: overhead_percent(reference_per_second, executions_per_second),
        repetitions: REPETITIONS,
        result: subject.interp.print_string(&result),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheState {
    /// Original trees are resident, as when a second link is installed.
    Hot,
    /// Original trees must be rebuilt from source first.
    Cold,
}

impl CacheState {
    pub fn from_name(name: &str) -> Option<CacheState> {
        match name {
            "hot" => Some(CacheState::Hot),
            "cold" => Some(CacheState::Cold),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InstallCostReport {
    pub method_count: usize,
    pub recompile_seconds: f64,
    pub install_cold_seconds: f64,
    /// Only measured when the hot cache was asked for.
    pub install_hot_seconds: Option<f64>,
}

pub const DEFAULT_CORPUS: usize = 2_000;
const METHODS_PER_CLASS: usize = 20;

/// Source of a synthetic corpus of `method_count` methods.
pub fn corpus_source(method_count: usize) -> String {
    let mut out = String::new();
    let classes = method_count.div_ceil(METHODS_PER_CLASS);
    for c in 0..classes {
        out.push_str(&format!("class Corpus{c} [\n  | a b |\n"));
        for m in 0..METHODS_PER_CLASS.min(method_count - c * METHODS_PER_CLASS) {
            out.push_str(&method_source(m));
            out.push('\n');
        }
        out.push_str("]\n");
    }
    out
}

fn method_source(m: usize) -> String {
    format!(
        "  m{m}: x [ | t u | t := x + {m}. u := t * 2. a := u. (t > 10) ifTrue: [ b := t ] ifFalse: [ b := u ]. ^Array with: a with: b with: 'm{m}' ]"
    )
}

fn corpus_methods(interp: &Interpreter) -> Vec<Rc<CompiledMethod>> {
    let mut methods: Vec<Rc<CompiledMethod>> =
        interp.methods().filter(|m| m.signature.class_name.as_str().starts_with("Corpus")).cloned().collect();
    methods.sort_by_key(|m| m.lo);
    methods
}

fn install_everywhere(interp: &mut Interpreter, meta: &Value, methods: &[Rc<CompiledMethod>]) -> crate::value::LinkId {
    let link = interp.new_link();
    interp.set_meta_object(link, meta.clone());
    interp.set_selector(link, "noop");
    interp.set_control(link, Control::Before);
    for m in methods {
        let root: NodeId = m.hi;
        interp.install(link, root).expect("trivial link installs");
    }
    link
}

/// Times recompiling every corpus method and installing a trivial link on
/// each of them, all on the same method set. Each timing is the median of
/// three repetitions.
pub fn bench_install(method_count: usize, cache: CacheState) -> InstallCostReport {
    let mut interp = Interpreter::new();
    interp.run_program(&corpus_source(method_count)).expect("corpus loads");
    interp.run_program(WORKLOAD).expect("benchmark workload loads");
    interp.run_program("benchMeta := BenchMeta new").expect("meta object");
    let meta = interp.global("benchMeta").unwrap();

    let (mut recompile, mut cold, mut hot) = (Vec::new(), Vec::new(), Vec::new());
    let mut count = 0;
    for _ in 0..REPETITIONS {
        let sources: Vec<(crate::value::ClassId, String)> =
            corpus_methods(&interp).iter().map(|m| (m.class, m.source.to_string())).collect();
        let start = Instant::now();
        for (class, source) in &sources {
            interp.compile_method(*class, source).expect("corpus recompiles");
        }
        recompile.push(start.elapsed().as_secs_f64());

        let methods = corpus_methods(&interp);
        count = methods.len();
        interp.flush_ast_cache();
        let start = Instant::now();
        let mut links = vec![install_everywhere(&mut interp, &meta, &methods)];
        cold.push(start.elapsed().as_secs_f64());

        if cache == CacheState::Hot {
            let start = Instant::now();
            links.push(install_everywhere(&mut interp, &meta, &methods));
            hot.push(start.elapsed().as_secs_f64());
        }
        // The next repetition recompiles unlinked methods again.
        for link in links {
            interp.uninstall(link);
        }
    }
    InstallCostReport {
        method_count: count,
        recompile_seconds: median(recompile),
        install_cold_seconds: median(cold),
        install_hot_seconds: (!hot.is_empty()).then(|| median(hot)),
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<16} {:>14.0} {:<16} {:>14.0} {:>10.1}", self.reference, self.reference_per_second, self.scenario, self.executions_per_second, self.overhead_percent)
    }
}

/// An aligned table in the shape Reference | Scenario | Overhead %.
pub fn overhead_table(reports: &[BenchReport]) -> String {
    let mut out = format!("{:<16} {:>14} {:<16} {:>14} {:>10}\n", "Reference", "exec/s", "Scenario", "exec/s", "Overhead %");
    for r in reports {
        out.push_str(&format!("{r}\n"));
    }
    out
}

pub fn overhead_records(reports: &[BenchReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "scenario={} reference={} rate={:.1} reference_rate={:.1} overhead_pct={:.2} repetitions={}\n",
                r.scenario, r.reference, r.executions_per_second, r.reference_per_second, r.overhead_percent, r.repetitions
            )
        })
        .collect()
}

pub fn install_table(report: &InstallCostReport) -> String {
    let hot = report.install_hot_seconds.map_or("-".to_string(), |s| format!("{s:.4}"));
    format!(
        "{:>8} {:>14} {:>18} {:>18}\n{:>8} {:>14.4} {:>18.4} {:>18}\n",
        "Methods", "Recompile (s)", "Install cold (s)", "Install hot (s)",
        report.method_count, report.recompile_seconds, report.install_cold_seconds, hot
    )
}

pub fn install_records(report: &InstallCostReport) -> String {
    let hot = report.install_hot_seconds.map_or("none".to_string(), |s| format!("{s:.6}"));
    format!(
        "methods={} recompile_s={:.6} install_cold_s={:.6} install_hot_s={}\n",
        report.method_count, report.recompile_seconds, report.install_cold_seconds, hot
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(workload: Workload, linkage: Linkage) -> BenchReport {
        let scenario = OverheadScenario { iterations: 100, ..OverheadScenario::new(workload, linkage) }.with_budget(Duration::from_millis(20));
        bench_overhead(&scenario).unwrap()
    }

    #[test]
    fn workloads_are_semantically_neutral() {
        for workload in Workload::ALL {
            let results: Vec<String> = Linkage::ALL.iter().map(|&l| quick(workload, l).result).collect();
            assert!(results.windows(2).all(|w| w[0] == w[1]), "{workload:?}: {results:?}");
        }
    }

    #[test]
    fn links_fire_in_linked_workloads() {
        let mut bench = Bench::new(Workload::VarReadWrite, Linkage::FullReification);
        bench.execute().unwrap();
        assert_eq!(bench.interp.stats().link_fires, 2);
        let mut bench = Bench::new(Workload::MessageSend, Linkage::NoLink);
        bench.execute().unwrap();
        assert_eq!(bench.interp.stats().hook_visits, 0);
    }

    #[test]
    fn corpus_has_requested_size() {
        let mut interp = Interpreter::new();
        interp.run_program(&corpus_source(45)).unwrap();
        assert_eq!(corpus_methods(&interp).len(), 45);
    }

    #[test]
    fn empty_corpus_report_is_well_formed() {
        let report = bench_install(0, CacheState::Hot);
        assert_eq!(report.method_count, 0);
        assert!(report.recompile_seconds < 0.01);
        assert!(install_table(&report).contains("Methods"));
    }

    #[test]
    fn overhead_formula() {
        assert_eq!(overhead_percent(200.0, 100.0), 100.0);
        assert_eq!(overhead_percent(100.0, 100.0), 0.0);
    }
}
