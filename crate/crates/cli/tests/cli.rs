use std::path::Path;
use std::process::{Command, Output};

fn metalink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metalink")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn program(dir: &tempfile::TempDir, name: &str, source: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, source).unwrap();
    path.to_string_lossy().into_owned()
}

fn listing(n: usize) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/src/listings/listing{n}.mk"));
    path.to_string_lossy().into_owned()
}

#[test]
fn listings_all_pass() {
    let out = metalink(&["listings"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).ends_with("7/7 pass\n"));
}

#[test]
fn single_listing_and_bad_index() {
    assert_eq!(code(&metalink(&["listings", "3"])), 0);
    assert_eq!(code(&metalink(&["listings", "8"])), 64);
}

#[test]
fn run_prints_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = program(&dir, "ok.mk", "Transcript log: 3 + 4");
    let out = metalink(&["run", &file]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "7\n");
}

#[test]
fn listing6_breaks_only_for_the_linked_collection() {
    let out = metalink(&["run", &listing(6)]);
    assert_eq!(code(&out), 3);
    assert_eq!(stdout(&out), "No break\n");
    let trace = stderr(&out);
    assert!(trace.starts_with("Halt"), "{trace}");
    assert!(trace.contains("logCr:"), "{trace}");
}

#[test]
fn exit_codes_for_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&metalink(&["run", &program(&dir, "syntax.mk", "x := ")])), 1);
    let out = metalink(&["run", &program(&dir, "dnu.mk", "Transcript log: 1. Object new fooBar")]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout(&out), "1\n");
    assert!(stderr(&out).contains("fooBar"));
    assert_eq!(code(&metalink(&["run", &dir.path().join("missing.mk").to_string_lossy()])), 66);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&metalink(&[])), 64);
    assert_eq!(code(&metalink(&["frobnicate"])), 64);
    assert_eq!(code(&metalink(&["--no-such-flag", "listings"])), 64);
    assert_eq!(code(&metalink(&["bench-overhead", "bogus"])), 64);
    assert_eq!(code(&metalink(&["bench-overhead", "send", "nolink", "--budget", "0"])), 64);
    assert_eq!(code(&metalink(&["bench-install", "10", "lukewarm"])), 64);
    assert_eq!(code(&metalink(&["--help"])), 0);
}

#[test]
fn seed_makes_listing4_reproducible() {
    let a = metalink(&["--seed", "5", "run", &listing(4)]);
    let b = metalink(&["--seed", "5", "run", &listing(4)]);
    let c = metalink(&["--seed", "6", "run", &listing(4)]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn dump_ast_shows_ids_and_spans() {
    let dir = tempfile::tempdir().unwrap();
    let file = program(&dir, "p.mk", "class Point [ |x| x [ ^x ] ]\nPoint new x");
    let out = metalink(&["dump-ast", &file, "Point", "x"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("MethodDef") && text.contains("Return") && text.contains("VarRead"), "{text}");
    assert_eq!(code(&metalink(&["dump-ast", &file, "Point", "y"])), 64);
    assert_eq!(code(&metalink(&["dump-ast", &program(&dir, "bad.mk", "x := ")])), 1);
}

#[test]
fn bench_records_format() {
    let out = metalink(&["--format", "records", "--budget", "0.05", "bench-overhead", "send", "empty"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("scenario=") && text.contains(" rate=") && text.contains(" overhead_pct="), "{text}");

    let out = metalink(&["--format", "records", "bench-install", "50", "cold"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("methods=50 "));
}
