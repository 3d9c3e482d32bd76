//! `modcc`: build, evaluate, analyze and solve modular counting circuits.
//!
//! Exit status: 0 on success or a found verdict, 1 on a negative verdict
//! (unsatisfiable, property failed), 2 on usage, input or guard errors.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use modcc::circuit::{
    circuit_stats, find_disagreement, from_json, to_json, Assignment, LayeredCircuit, Modulus,
};
use modcc::cnf::CnfFormula;
use modcc::compiler::{chain_and, deep_and, depth2_and, depth2_cnf_circuit, recursive_and};
use modcc::counting::{circuit_to_polynomial, fooling_assignment, DEFAULT_MONOMIAL_CAP};
use modcc::dihedral::{cnf_to_dihedral, poleqv_check, polsat_brute, Equivalence, POLSAT_MAX_ARITY};
use modcc::prob::{find_good_lambda, prob_circuit, ProbError, DEFAULT_SLACK};
use modcc::sat::{
    analyze_balance, brute_force_sat, check_balance_bound, low_weight_sat, ransam, reduce_to_spike, BalanceCheck,
    BoundFunction, RanSamOptions, SatError,
};

const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_GUARD: usize = 24;

#[derive(Parser)]
#[command(name = "modcc", version, about = "Bounded-depth modular counting circuits")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, env = "MODCC_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Largest arity accepted by exhaustive commands.
    #[arg(long, global = true, default_value_t = DEFAULT_GUARD)]
    guard: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a circuit file.
    #[command(subcommand)]
    Build(Build),
    /// Evaluate a circuit on one assignment.
    Eval {
        circuit: PathBuf,
        /// Bits x1 x2 ... as a 0/1 string.
        #[arg(long, short)]
        assignment: String,
    },
    /// Check exhaustively that a circuit computes AND of all its inputs.
    VerifyAnd { circuit: PathBuf },
    /// Decide satisfiability.
    #[command(subcommand)]
    Sat(Sat),
    #[command(subcommand)]
    Analyze(Analyze),
    /// Equations over dihedral groups from 3-CNF formulas.
    #[command(subcommand)]
    Dihedral(Dihedral),
    /// Size, depth and wiring counts.
    Stats { circuit: PathBuf },
}

#[derive(Args)]
struct OutputArg {
    /// Write the circuit here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Build {
    /// AND_n: depth 2 directly, deeper by recursive composition.
    And {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Depth-2 circuit for a 3-CNF formula in DIMACS form.
    Cnf {
        formula: PathBuf,
        #[arg(long)]
        m: u64,
        #[command(flatten)]
        out: OutputArg,
    },
    /// AND_n over an alternating list of primes, one per level.
    Chain {
        #[arg(long, value_delimiter = ',', required = true)]
        primes: Vec<u64>,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Bundle construction of depth h >= 3 with all levels mod m.
    Deep {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        depth: usize,
        /// Synchronized first level.
        #[arg(long)]
        sync: bool,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Probabilistic depth-2 AND over inputs (a, b), b the random bits.
    Prob {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: u32,
        /// Modulus of the output gate.
        #[arg(long, default_value_t = 3)]
        q: u64,
        #[arg(long, default_value_t = 64)]
        max_attempts: u32,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundName {
    Linear,
    Square,
    Exp2,
}

impl BoundName {
    fn function(self) -> BoundFunction {
        match self {
            BoundName::Linear => BoundFunction::linear(),
            BoundName::Square => BoundFunction::square(),
            BoundName::Exp2 => BoundFunction::exp2(),
        }
    }
}

#[derive(Subcommand)]
enum Sat {
    /// Every assignment.
    Brute { circuit: PathBuf },
    /// Assignments of weight at most f⁻¹(size).
    Lowweight {
        circuit: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        bound: BoundName,
    },
    /// 2^min(f⁻¹(size), n) uniform samples.
    Ransam {
        circuit: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        bound: BoundName,
        #[arg(long)]
        max_samples: Option<u64>,
        /// Stop after this many milliseconds.
        #[arg(long)]
        time_budget_ms: Option<u64>,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Polynomial of a circuit whose levels are all mod the same prime power.
    Poly {
        circuit: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MONOMIAL_CAP)]
        cap: usize,
    },
    /// Balance, and whether it respects the bound function.
    Balance {
        circuit: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        bound: BoundName,
    },
    /// Fix variables until the smaller preimage is one point.
    Spike { circuit: PathBuf },
}

#[derive(Subcommand)]
enum Dihedral {
    /// Polynomial summary for a DIMACS formula.
    Reduce {
        formula: PathBuf,
        #[arg(long, default_value_t = 15)]
        m: u64,
    },
    /// Solve T = 1.
    Solve {
        formula: PathBuf,
        #[arg(long, default_value_t = 15)]
        m: u64,
    },
    /// Compare the polynomials of two formulas over the same variables.
    Eqv {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 15)]
        m: u64,
    },
}

/// A finished run: its report and whether the verdict was negative.
struct Run {
    report: Value,
    negative: bool,
}

impl Run {
    fn ok(report: Value) -> Self {
        Self { report, negative: false }
    }

    fn verdict(report: Value, positive: bool) -> Self {
        Self { report, negative: !positive }
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_circuit(path: &Path) -> Result<LayeredCircuit> {
    from_json(&read_input(path)?).with_context(|| format!("loading circuit {}", path.display()))
}

fn load_formula(path: &Path) -> Result<CnfFormula> {
    CnfFormula::parse_dimacs(&read_input(path)?).with_context(|| format!("parsing DIMACS {}", path.display()))
}

fn check_guard(n: usize, guard: usize) -> Result<()> {
    if n > guard {
        bail!("{n} inputs exceed the guard {guard} (raise --guard to override)");
    }
    Ok(())
}

fn bits(a: &Assignment) -> String {
    a.to_string()
}

fn emit_circuit(c: &LayeredCircuit, out: &OutputArg, summary: Value) -> Result<Run> {
    let text = to_json(c);
    // what we write must load back to the same circuit
    let back = from_json(&text).context("emitted circuit failed to reload")?;
    if back != c.normalized() {
        bail!("emitted circuit does not round-trip");
    }
    let stats = circuit_stats(c)?;
    let mut report = json!({"stats": stats, "build": summary});
    match &out.output {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            report["output"] = json!(path.display().to_string());
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            report["output"] = json!("-");
        }
    }
    Ok(Run::ok(report))
}

fn build(cmd: &Build, seed: u64) -> Result<Run> {
    match cmd {
        Build::And { m, n, depth, out } => {
            let c = if *depth == 2 { depth2_and(*m, *n)? } else { recursive_and(*m, *n, *depth)? };
            emit_circuit(&c, out, json!({"kind": "and", "m": m, "n": n, "depth": depth}))
        }
        Build::Cnf { formula, m, out } => {
            let phi = load_formula(formula)?;
            let c = depth2_cnf_circuit(&phi, *m)?;
            emit_circuit(&c, out, json!({"kind": "cnf", "m": m, "vars": phi.num_vars, "clauses": phi.num_clauses()}))
        }
        Build::Chain { primes, n, out } => {
            let c = chain_and(primes, *n)?;
            emit_circuit(&c, out, json!({"kind": "chain", "primes": primes, "n": n}))
        }
        Build::Deep { m, n, depth, sync, out } => {
            let d = deep_and(*m, *depth, *n, *sync)?;
            emit_circuit(&d.circuit, out, json!({"kind": "deep", "plan": d.plan}))
        }
        Build::Prob { n, slack, q, max_attempts, out } => {
            let (table, cert, certified) = match find_good_lambda(2, *n, *slack, *max_attempts, seed) {
                Ok((t, c)) => (t, c, true),
                Err(ProbError::Exhausted { best, .. }) => (best.0, best.1, false),
                Err(e) => return Err(e.into()),
            };
            let c = prob_circuit(&table, *q)?;
            let rows: Vec<Value> = cert
                .counts
                .iter()
                .enumerate()
                .map(|(a, &count)| json!({"a": format!("{:0width$b}", a, width = *n), "count": count}))
                .collect();
            let summary = json!({
                "kind": "prob",
                "n": n, "r": table.r, "slack": slack, "q": q,
                "table_seed": table.seed,
                "certificate": {
                    "certified": certified,
                    "threshold": cert.threshold,
                    "min_count": cert.min_count,
                    "attempts": cert.attempts,
                    "rows": rows,
                },
            });
            let mut run = emit_circuit(&c, out, summary)?;
            run.negative = !certified;
            Ok(run)
        }
    }
}

fn sat(cmd: &Sat, seed: u64, guard: usize) -> Result<Run> {
    let report = match cmd {
        Sat::Brute { circuit } => {
            let c = load_circuit(circuit)?;
            check_guard(c.num_inputs, guard)?;
            brute_force_sat(&c)?
        }
        Sat::Lowweight { circuit, bound } => low_weight_sat(&load_circuit(circuit)?, &bound.function())?,
        Sat::Ransam { circuit, bound, max_samples, time_budget_ms } => {
            let opts = RanSamOptions {
                max_samples: *max_samples,
                time_budget: time_budget_ms.map(std::time::Duration::from_millis),
            };
            ransam(&load_circuit(circuit)?, &bound.function(), seed, opts)?
        }
    };
    let sat = report.verdict.is_sat();
    Ok(Run::verdict(json!({"result": report.to_json()}), sat))
}

fn analyze(cmd: &Analyze, guard: usize) -> Result<Run> {
    match cmd {
        Analyze::Poly { circuit, cap } => {
            let c = load_circuit(circuit)?;
            let cp = circuit_to_polynomial(&c, *cap)?;
            let n = c.num_inputs;
            let (p, k) = Modulus::new(c.levels[0]).prime_power().expect("checked by the translation");
            let d2 = (cp.d as u128).saturating_mul(cp.d as u128);
            let fooling = match fooling_assignment(&cp.poly, n) {
                Ok(w) => json!({"assignment": bits(&w.assignment), "value": w.value, "refutes_and": w.refutes_and}),
                Err(_) => Value::Null,
            };
            Ok(Run::ok(json!({
                "p": p, "k": k,
                "monomials": cp.poly.len(),
                "degree": cp.poly.degree(),
                "d": cp.d,
                "degree_bound": cp.degree_bound.to_string(),
                "arity_exceeds_d_squared": n as u128 > d2,
                "fooling": fooling,
            })))
        }
        Analyze::Balance { circuit, bound } => {
            let c = load_circuit(circuit)?;
            check_guard(c.num_inputs, guard)?;
            let report = analyze_balance(&c)?;
            let check = check_balance_bound(&c, &bound.function())?;
            let failed = matches!(check, BalanceCheck::Fail { .. });
            Ok(Run::verdict(json!({"balance": report.to_json(), "bound_check": check.to_json()}), !failed))
        }
        Analyze::Spike { circuit } => {
            let c = load_circuit(circuit)?;
            check_guard(c.num_inputs, guard)?;
            match reduce_to_spike(&c) {
                Ok(r) => Ok(Run::ok(json!({"spike": r.to_json()}))),
                Err(SatError::Constant) => Ok(Run::verdict(json!({"spike": null, "reason": "constant circuit"}), false)),
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn dihedral(cmd: &Dihedral, guard: usize) -> Result<Run> {
    let guard = guard.min(POLSAT_MAX_ARITY);
    match cmd {
        Dihedral::Reduce { formula, m } => {
            let t = cnf_to_dihedral(&load_formula(formula)?, *m)?;
            Ok(Run::ok(json!({"polynomial": t.summary_json()})))
        }
        Dihedral::Solve { formula, m } => {
            let phi = load_formula(formula)?;
            check_guard(phi.num_vars, guard)?;
            let t = cnf_to_dihedral(&phi, *m)?;
            let sol = polsat_brute(&t, t.group().identity())?;
            let witness = sol.as_ref().map(|x| {
                json!({
                    "elements": x.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "boolean": x.iter().map(|e| if e.reflect { '0' } else { '1' }).collect::<String>(),
                })
            });
            let verdict = if sol.is_some() { "solvable" } else { "unsolvable" };
            Ok(Run::verdict(
                json!({"polynomial": t.summary_json(), "verdict": verdict, "witness": witness}),
                sol.is_some(),
            ))
        }
        Dihedral::Eqv { first, second, m } => {
            let (a, b) = (load_formula(first)?, load_formula(second)?);
            check_guard(a.num_vars.max(b.num_vars), guard)?;
            let (t, s) = (cnf_to_dihedral(&a, *m)?, cnf_to_dihedral(&b, *m)?);
            match poleqv_check(&t, &s)? {
                Equivalence::Equal => Ok(Run::ok(json!({"verdict": "equal"}))),
                Equivalence::Differ { point, quotient } => Ok(Run::verdict(
                    json!({
                        "verdict": "differ",
                        "point": point.iter().map(ToString::to_string).collect::<Vec<_>>(),
                        "quotient": quotient.to_string(),
                    }),
                    false,
                )),
            }
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Build(b) => match b {
            Build::And { .. } => "build and",
            Build::Cnf { .. } => "build cnf",
            Build::Chain { .. } => "build chain",
            Build::Deep { .. } => "build deep",
            Build::Prob { .. } => "build prob",
        },
        Command::Eval { .. } => "eval",
        Command::VerifyAnd { .. } => "verify-and",
        Command::Sat(s) => match s {
            Sat::Brute { .. } => "sat brute",
            Sat::Lowweight { .. } => "sat lowweight",
            Sat::Ransam { .. } => "sat ransam",
        },
        Command::Analyze(a) => match a {
            Analyze::Poly { .. } => "analyze poly",
            Analyze::Balance { .. } => "analyze balance",
            Analyze::Spike { .. } => "analyze spike",
        },
        Command::Dihedral(d) => match d {
            Dihedral::Reduce { .. } => "dihedral reduce",
            Dihedral::Solve { .. } => "dihedral solve",
            Dihedral::Eqv { .. } => "dihedral eqv",
        },
        Command::Stats { .. } => "stats",
    }
}

fn dispatch(cli: &Cli) -> Result<Run> {
    match &cli.command {
        Command::Build(b) => build(b, cli.seed),
        Command::Eval { circuit, assignment } => {
            let c = load_circuit(circuit)?;
            let a: Assignment = assignment.parse()?;
            let v = modcc::circuit::evaluate(&c, &a)?;
            Ok(Run::ok(json!({"assignment": bits(&a), "value": v as u8})))
        }
        Command::VerifyAnd { circuit } => {
            let c = load_circuit(circuit)?;
            check_guard(c.num_inputs, cli.guard)?;
            let n = c.num_inputs;
            let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            let bad = find_disagreement(&c.compile()?, move |m| m == full);
            let report = json!({
                "inputs": n,
                "computes_and": bad.is_none(),
                "counterexample": bad.map(|m| bits(&Assignment::from_mask(m, n))),
            });
            Ok(Run::verdict(report, bad.is_none()))
        }
        Command::Sat(s) => sat(s, cli.seed, cli.guard),
        Command::Analyze(a) => analyze(a, cli.guard),
        Command::Dihedral(d) => dihedral(d, cli.guard),
        Command::Stats { circuit } => {
            let c = load_circuit(circuit)?;
            Ok(Run::ok(json!({"stats": circuit_stats(&c)?, "inputs": c.num_inputs, "levels": c.levels})))
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| anyhow!("cannot start {} workers: {e}", cli.workers))?;
    }
    let Run { report, negative } = dispatch(cli)?;
    let mut out = json!({
        "modcc": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "seed": cli.seed,
    });
    if let (Value::Object(o), Value::Object(r)) = (&mut out, report) {
        o.extend(r);
    }
    let text = serde_json::to_string_pretty(&out)? + "\n";
    // circuits already went to stdout when no output path was given
    let circuit_on_stdout = matches!(&cli.command, Command::Build(_)) && out["output"] == "-";
    if circuit_on_stdout {
        io::stderr().write_all(text.as_bytes())?;
    } else {
        io::stdout().write_all(text.as_bytes())?;
    }
    Ok(!negative)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
