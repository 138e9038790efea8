use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use metalink::ast::dump_tree;
use metalink::bench::{self, CacheState, Linkage, OverheadScenario, Workload};
use metalink::listings;
use metalink::parser::parse;
use metalink::runtime::{format_trace, ProgramError};
use metalink::{Interpreter, Outcome};

const OK: u8 = 0;
const SYNTAX: u8 = 1;
const RUNTIME: u8 = 2;
const HALT: u8 = 3;
const LISTING_MISMATCH: u8 = 4;
const USAGE: u8 = 64;
const NO_INPUT: u8 = 66;
const BENCH_FAILURE: u8 = 70;

#[derive(Parser)]
#[command(name = "metalink", version, about = "Run programs and experiments of the metalink interpreter")]
struct Cli {
    /// Seed for every `Random new` the program creates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Seconds of measurement per benchmark repetition.
    #[arg(long, global = true, default_value_t = 5.0)]
    budget: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program file.
    Run { file: PathBuf },
    /// Run the bundled listing ports and check their behavior.
    Listings { index: Option<usize> },
    /// Print the syntax tree of a file, or of one of its methods.
    DumpAst { file: PathBuf, class: Option<String>, selector: Option<String> },
    /// Measure link overhead on a workload: send, var, var-read, var-write.
    BenchOverhead {
        workload: String,
        /// nolink, empty, full, or all.
        #[arg(default_value = "all")]
        linkage: String,
    },
    /// Compare link installation with recompilation on a synthetic corpus.
    BenchInstall {
        #[arg(default_value_t = bench::DEFAULT_CORPUS)]
        n: usize,
        /// hot or cold.
        #[arg(default_value = "hot")]
        cache: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    // Deeply recursive programs need more stack than the main thread has.
    let worker = std::thread::Builder::new().stack_size(512 << 20).spawn(move || execute(cli));
    match worker.map(|h| h.join()) {
        Ok(Ok(code)) => ExitCode::from(code),
        _ => ExitCode::from(BENCH_FAILURE),
    }
}

fn usage(message: &str) -> u8 {
    eprintln!("error: {message}");
    USAGE
}

fn read(file: &PathBuf) -> Result<String, u8> {
    std::fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", file.display());
        NO_INPUT
    })
}

fn execute(cli: Cli) -> u8 {
    match &cli.command {
        Command::Run { file } => run(file, cli.seed),
        Command::Listings { index } => run_listings(*index, cli.seed),
        Command::DumpAst { file, class, selector } => dump_ast(file, class.as_deref(), selector.as_deref()),
        Command::BenchOverhead { workload, linkage } => bench_overhead(&cli, workload, linkage),
        Command::BenchInstall { n, cache } => bench_install(&cli, *n, cache),
    }
}

fn run(file: &PathBuf, seed: u64) -> u8 {
    let source = match read(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut interp = Interpreter::with_seed(seed);
    let name = file.file_name().map_or("<input>".into(), |n| n.to_string_lossy().into_owned());
    let result = interp.run_file(&source, &name);
    let mut stdout = std::io::stdout();
    match result {
        Ok(run) => {
            let _ = stdout.write_all(run.output.as_bytes());
            match run.outcome {
                Outcome::Value(_) => OK,
                Outcome::Halt(h) => {
                    eprintln!("{}", h.message);
                    eprint!("{}", format_trace(&h.trace));
                    HALT
                }
            }
        }
        Err(ProgramError::Syntax(e)) => {
            eprintln!("{name}: {e}");
            SYNTAX
        }
        Err(ProgramError::Runtime { error, output }) => {
            let _ = stdout.write_all(output.as_bytes());
            eprintln!("error: {error}");
            eprint!("{}", format_trace(&error.trace));
            RUNTIME
        }
    }
}

fn run_listings(index: Option<usize>, seed: u64) -> u8 {
    let selected: Vec<&listings::Listing> = match index {
        Some(i) => match listings::listing(i) {
            Some(l) => vec![l],
            None => return usage(&format!("no listing {i}; listings are numbered 1 to 7")),
        },
        None => listings::LISTINGS.iter().collect(),
    };
    let reports: Vec<listings::ListingReport> = selected.iter().map(|l| l.run(seed)).collect();
    for r in &reports {
        match &r.verdict {
            Ok(()) => println!("listing {} pass  {} ({:.1} ms)", r.index, r.title, r.elapsed.as_secs_f64() * 1e3),
            Err(why) => println!("listing {} FAIL  {}: {why}", r.index, r.title),
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} pass", reports.len());
    if passed == reports.len() {
        OK
    } else {
        LISTING_MISMATCH
    }
}

fn dump_ast(file: &PathBuf, class: Option<&str>, selector: Option<&str>) -> u8 {
    let source = match read(file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let program = match parse(&source) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return SYNTAX;
        }
    };
    let Some(class) = class else {
        for c in &program.classes {
            print!("{}", dump_tree(c));
        }
        print!("{}", dump_tree(&program.body));
        return OK;
    };
    let Some(class_node) = program.classes.iter().find(|c| matches!(&c.kind, metalink::ast::NodeKind::ClassDef { name, .. } if name.as_str() == class))
    else {
        return usage(&format!("{} defines no class {class}", file.display()));
    };
    let metalink::ast::NodeKind::ClassDef { methods, .. } = &class_node.kind else { unreachable!() };
    match selector {
        None => print!("{}", dump_tree(class_node)),
        Some(sel) => match methods.iter().find(|m| m.selector().is_some_and(|s| s.as_str() == sel)) {
            Some(m) => print!("{}", dump_tree(m)),
            None => return usage(&format!("{class} defines no method {sel}")),
        },
    }
    OK
}

fn budget(cli: &Cli) -> Result<Duration, u8> {
    Duration::try_from_secs_f64(cli.budget).ok().filter(|d| !d.is_zero()).ok_or_else(|| usage("--budget must be a positive number of seconds"))
}

fn bench_overhead(cli: &Cli, workload: &str, linkage: &str) -> u8 {
    let Some(workload) = Workload::from_name(workload) else {
        return usage(&format!("unknown workload {workload}; expected send, var, var-read or var-write"));
    };
    let linkages: Vec<Linkage> = match linkage {
        "all" => Linkage::ALL.to_vec(),
        name => match Linkage::from_name(name) {
            Some(l) => vec![l],
            None => return usage(&format!("unknown linkage {name}; expected nolink, empty, full or all")),
        },
    };
    let budget = match budget(cli) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let mut reports = Vec::new();
    for linkage in linkages {
        match bench::bench_overhead(&OverheadScenario::new(workload, linkage).with_budget(budget)) {
            Ok(r) => reports.push(r),
            Err(e) => {
                eprintln!("error: {e}");
                return BENCH_FAILURE;
            }
        }
    }
    match cli.format {
        Format::Text => print!("{}", bench::overhead_table(&reports)),
        Format::Records => print!("{}", bench::overhead_records(&reports)),
    }
    OK
}

fn bench_install(cli: &Cli, n: usize, cache: &str) -> u8 {
    let Some(cache) = CacheState::from_name(cache) else {
        return usage(&format!("unknown cache state {cache}; expected hot or cold"));
    };
    let report = bench::bench_install(n, cache);
    match cli.format {
        Format::Text => print!("{}", bench::install_table(&report)),
        Format::Records => print!("{}", bench::install_records(&report)),
    }
    OK
}
