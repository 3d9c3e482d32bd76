use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn modcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modcc")).args(args).env_remove("MODCC_SEED").output().expect("runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = path(dir, name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn build_then_verify() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "and6.json");
    let b = modcc(&["build", "and", "--m", "6", "--n", "6", "--depth", "2", "-o", s(&out)]);
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(report(&b)["stats"]["depth"], 2);
    let v = modcc(&["verify-and", s(&out)]);
    assert_eq!(code(&v), 0);
    assert_eq!(report(&v)["computes_and"], true);
}

#[test]
fn every_builder_verifies() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, Vec<&str>); 4] = [
        ("rec.json", vec!["build", "and", "--m", "6", "--n", "4", "--depth", "4"]),
        ("chain.json", vec!["build", "chain", "--primes", "2,3,2", "--n", "4"]),
        ("deep.json", vec!["build", "deep", "--m", "6", "--n", "8", "--depth", "3", "--sync"]),
        ("deep30.json", vec!["build", "deep", "--m", "30", "--n", "6", "--depth", "3"]),
    ];
    for (name, mut args) in cases {
        let out = path(&dir, name);
        args.extend(["-o", s(&out)]);
        assert_eq!(code(&modcc(&args)), 0, "{args:?}");
        assert_eq!(code(&modcc(&["verify-and", s(&out)])), 0, "{name}");
    }
}

#[test]
fn circuit_to_stdout_and_stdin() {
    let b = modcc(&["build", "and", "--m", "15", "--n", "3"]);
    assert_eq!(code(&b), 0);
    let header: Value = serde_json::from_slice(&b.stderr).unwrap();
    assert_eq!(header["output"], "-");
    let mut child = Command::new(env!("CARGO_BIN_EXE_modcc"))
        .args(["verify-and", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(&b.stdout).unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(0));
}

#[test]
fn verify_rejects_non_and() {
    let dir = TempDir::new().unwrap();
    let phi = write(&dir, "or.cnf", "p cnf 2 1\n1 2 0\n");
    let out = path(&dir, "or.json");
    assert_eq!(code(&modcc(&["build", "cnf", s(&phi), "--m", "6", "-o", s(&out)])), 0);
    let v = modcc(&["verify-and", s(&out)]);
    assert_eq!(code(&v), 1);
    assert_eq!(report(&v)["counterexample"], "10");
}

#[test]
fn sat_verdicts_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let unsat = write(&dir, "unsat.cnf", "p cnf 2 2\n1 0\n-1 0\n");
    let sat = write(&dir, "sat.cnf", "c two clauses\np cnf 3 2\n1 -2 0\n3 0\n");
    let (uc, sc) = (path(&dir, "u.json"), path(&dir, "s.json"));
    assert_eq!(code(&modcc(&["build", "cnf", s(&unsat), "--m", "6", "-o", s(&uc)])), 0);
    assert_eq!(code(&modcc(&["build", "cnf", s(&sat), "--m", "15", "-o", s(&sc)])), 0);

    let r = modcc(&["sat", "ransam", s(&uc)]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stdout).contains("probably-unsatisfiable"));
    let r = modcc(&["sat", "brute", s(&uc)]);
    assert_eq!(code(&r), 1);
    assert_eq!(report(&r)["result"]["verdict"], "unsatisfiable");

    for solver in ["brute", "lowweight", "ransam"] {
        let r = modcc(&["sat", solver, s(&sc)]);
        assert_eq!(code(&r), 0, "{solver}");
        let w = report(&r)["result"]["witness"].as_str().unwrap().to_string();
        let e = modcc(&["eval", s(&sc), "-a", &w]);
        assert_eq!(report(&e)["value"], 1, "{solver} witness {w}");
    }
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.cnf", "p cnf 2 1\n1 x 0\n");
    let r = modcc(&["build", "cnf", s(&bad), "--m", "6"]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
    let junk = write(&dir, "junk.json", "{\"format\": 1}");
    assert_eq!(code(&modcc(&["stats", s(&junk)])), 2);
    assert_eq!(code(&modcc(&["build", "and", "--m", "9", "--n", "3"])), 2);
    assert_eq!(code(&modcc(&["build", "and", "--m", "6"])), 2);
    assert_eq!(code(&modcc(&["frobnicate"])), 2);
}

#[test]
fn guard_is_enforced() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "and12.json");
    assert_eq!(code(&modcc(&["build", "and", "--m", "6", "--n", "12", "-o", s(&out)])), 0);
    let r = modcc(&["--guard", "10", "verify-and", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("guard"));
    assert_eq!(code(&modcc(&["--guard", "12", "verify-and", s(&out)])), 0);
}

#[test]
fn seed_handling() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "c.json");
    assert_eq!(code(&modcc(&["build", "and", "--m", "6", "--n", "8", "-o", s(&out)])), 0);
    let default = report(&modcc(&["sat", "ransam", s(&out)]));
    let explicit = report(&modcc(&["--seed", "7", "sat", "ransam", s(&out)]));
    assert_eq!(explicit["seed"], 7);
    assert_eq!(explicit["result"]["seed"], 7);
    assert_ne!(default["seed"], 7);
    let from_env = Command::new(env!("CARGO_BIN_EXE_modcc"))
        .args(["sat", "ransam", s(&out)])
        .env("MODCC_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(report(&from_env), explicit);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    let args = ["build", "prob", "--n", "2", "--slack", "2"];
    let ra = modcc(&[&args[..], &["-o", s(&a)]].concat());
    let rb = modcc(&[&["--workers", "1"][..], &args[..], &["-o", s(&b)]].concat());
    assert_eq!(code(&ra), 0, "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let mut ja = report(&ra);
    let mut jb = report(&rb);
    ja["output"] = Value::Null;
    jb["output"] = Value::Null;
    assert_eq!(ja, jb);
    assert_eq!(ja["build"]["certificate"]["certified"], true);

    let c = path(&dir, "and.json");
    modcc(&["build", "and", "--m", "6", "--n", "10", "-o", s(&c)]);
    for cmd in [&["sat", "ransam"][..], &["sat", "lowweight"], &["analyze", "spike"], &["analyze", "balance"]] {
        let one = modcc(&[&["--workers", "1"][..], cmd, &[s(&c)]].concat());
        let many = modcc(&[&["--workers", "4"][..], cmd, &[s(&c)]].concat());
        assert_eq!(one.stdout, many.stdout, "{cmd:?}");
        assert_eq!(code(&one), code(&many));
    }
}

#[test]
fn analysis_reports() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "and.json");
    modcc(&["build", "and", "--m", "6", "--n", "5", "-o", s(&c)]);
    let bal = report(&modcc(&["analyze", "balance", s(&c)]));
    assert_eq!(bal["balance"]["balance"], "1/16");
    assert_eq!(bal["bound_check"]["result"], "pass");
    let spike = report(&modcc(&["analyze", "spike", s(&c)]));
    assert_eq!(spike["spike"]["stack_sizes"], serde_json::json!([1]));
    let st = report(&modcc(&["stats", s(&c)]));
    assert_eq!(st["inputs"], 5);

    // mod-4 circuit: one gate counting inputs mod 4
    let text = r#"{"format": "modcc-circuit-v1", "num_inputs": 3, "constants": [], "levels": [{"modulus": 4}],
      "gates": [{"id": 0, "level": 1, "modulus": 4, "accept": [0],
      "wires": [{"src": {"input": 0}, "mult": 1}, {"src": {"input": 1}, "mult": 1}, {"src": {"input": 2}, "mult": 1}]}],
      "output": 0}"#;
    let m4 = write(&dir, "m4.json", text);
    let poly = modcc(&["analyze", "poly", s(&m4)]);
    assert_eq!(code(&poly), 0, "{}", String::from_utf8_lossy(&poly.stderr));
    let poly = report(&poly);
    assert_eq!(poly["p"], 2);
    assert_eq!(poly["fooling"]["assignment"], "000");
    assert_eq!(poly["fooling"]["refutes_and"], true);
    assert_eq!(code(&modcc(&["analyze", "poly", s(&c)])), 2);
}

#[test]
fn dihedral_commands() {
    let dir = TempDir::new().unwrap();
    let sat = write(&dir, "sat.cnf", "p cnf 3 2\n1 -2 0\n3 0\n");
    let unsat = write(&dir, "unsat.cnf", "p cnf 3 2\n1 0\n-1 0\n");
    let red = report(&modcc(&["dihedral", "reduce", s(&sat)]));
    assert_eq!(red["polynomial"]["primes"], serde_json::json!([3, 5]));

    let solved = modcc(&["dihedral", "solve", s(&sat)]);
    assert_eq!(code(&solved), 0);
    let bits = report(&solved)["witness"]["boolean"].as_str().unwrap().to_string();
    assert_eq!(code(&modcc(&["eval", s(&{
        let out = path(&dir, "sat.json");
        modcc(&["build", "cnf", s(&sat), "--m", "15", "-o", s(&out)]);
        out
    }), "-a", &bits])), 0);
    let none = modcc(&["dihedral", "solve", s(&unsat)]);
    assert_eq!(code(&none), 1);
    assert_eq!(report(&none)["verdict"], "unsolvable");

    assert_eq!(code(&modcc(&["dihedral", "eqv", s(&sat), s(&sat)])), 0);
    let diff = modcc(&["dihedral", "eqv", s(&sat), s(&unsat)]);
    assert_eq!(code(&diff), 1);
    assert_eq!(report(&diff)["verdict"], "differ");
    assert_eq!(code(&modcc(&["dihedral", "reduce", s(&sat), "--m", "6"])), 2);
}
