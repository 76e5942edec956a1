//! Command-line front end: load a network file, solve for optimal
//! policies, dump the algebraic representation or transition graph,
//! simulate closed-loop trajectories, and run the bundled benchmark.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 infeasible
//! problem. Output files are written atomically (temp file + rename), so
//! a failing run never leaves a partial file behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bcn::fmt::{round_sig9, sig9};
use bcn::logic::LogicalMatrix;
use bcn::model::{
    build_assr, feasible_region, load_network, stage_cost, Assr, BooleanNetwork, FeasibleRegion,
    ModelError,
};
use bcn::solver::{
    extract_policy, feedback_matrix, madani, rollout, value_iteration, RolloutMode, SolverConfig,
    SolverError, ValueTable,
};
use bcn::stg::{build_stg, TransitionGraph};

const ARA_NETWORK: &str = include_str!("../../../data/ara.json");
const ARA_EXPECTED: &str = include_str!("../../../data/ara_expected.json");

#[derive(Parser)]
#[command(
    name = "bcn",
    version,
    about = "Optimal control of Boolean control networks",
    after_help = "Initial states (--x0) are 1-based canonical indices; a string of exactly n \
                  0/1 characters (n = number of state variables, n >= 2) is instead read as the \
                  variable values in declaration order."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute optimal values, a policy, and the feedback matrix
    Solve(SolveArgs),
    /// Roll out a feedback law from x0 and write the trajectory CSV
    Simulate(SimulateArgs),
    /// Dump the transition table of the algebraic representation (CSV)
    Assr(NetworkArgs),
    /// Dump the state transition graph (DOT)
    Stg(NetworkArgs),
    /// Solve the bundled benchmark network and compare against the stored
    /// expected values
    Bench,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Network definition (JSON)
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Discount factor in (0, 1)
    #[arg(long)]
    lambda: f64,
    /// Stop threshold for value iteration (required with --algorithm vi)
    #[arg(long)]
    theta: Option<f64>,
    /// Sweep cap for value iteration
    #[arg(long)]
    max_iterations: Option<u64>,
    /// Initial state; when given, the optimal cost at x0 is reported
    #[arg(long)]
    x0: Option<String>,
    /// Write the result document here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// json: full document; csv: one state,value,input row per feasible state
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Network definition (JSON)
    #[arg(long)]
    network: PathBuf,
    /// Solver output file carrying `lambda` and `K_columns`
    #[arg(long)]
    policy: PathBuf,
    /// Initial state (index or bit-string)
    #[arg(long)]
    x0: String,
    /// Fixed number of steps
    #[arg(long, conflicts_with = "epsilon")]
    horizon: Option<usize>,
    /// Run until the discounted tail is below this bound [default: 1e-6]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Write the trajectory CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct NetworkArgs {
    /// Network definition (JSON)
    #[arg(long)]
    network: PathBuf,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Vi,
    Madani,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 1 }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = if matches!(e, ModelError::Infeasible) { 2 } else { 1 };
        CliError { message: e.to_string(), code }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let code = if matches!(e, SolverError::Model(ModelError::Infeasible)) { 2 } else { 1 };
        CliError { message: e.to_string(), code }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { message: e.to_string(), code: 1 }
    }
}

fn main() -> ExitCode {
    if let Err(e) = check_thread_env() {
        eprintln!("error: {}", e.message);
        return ExitCode::from(e.code);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// BCN_OPT_THREADS caps solver parallelism. The solvers currently run
/// single-threaded, so any positive value is a no-op; it is still
/// validated so a typo fails loudly instead of silently.
fn check_thread_env() -> Result<(), CliError> {
    match std::env::var("BCN_OPT_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(t) if t >= 1 => Ok(()),
            _ => Err(CliError::usage(format!(
                "BCN_OPT_THREADS must be a positive integer, got `{raw}`"
            ))),
        },
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Assr(args) => cmd_assr(args),
        Command::Stg(args) => cmd_stg(args),
        Command::Bench => cmd_bench(),
    }
}

/// Load a network and build everything up to the transition graph.
fn prepare(
    path: &Path,
) -> Result<(BooleanNetwork, Assr, FeasibleRegion, TransitionGraph), CliError> {
    let net = load_network(path)?;
    let assr = build_assr(&net);
    let region = feasible_region(&assr, net.constraints())?;
    let graph = build_stg(&assr, net.cost(), &region)?;
    Ok((net, assr, region, graph))
}

/// An initial state is a 1-based index, or — when the string is exactly
/// n characters of 0/1 and n ≥ 2 — the variable values in declaration
/// order (most significant first).
fn parse_x0(raw: &str, n: usize) -> Result<usize, CliError> {
    let big_n = 1usize << n;
    if n >= 2 && raw.len() == n && raw.chars().all(|c| c == '0' || c == '1') {
        let mut idx = 0usize;
        for c in raw.chars() {
            idx = (idx << 1) | (c == '1') as usize;
        }
        return Ok(idx + 1);
    }
    match raw.parse::<usize>() {
        Ok(x) if x >= 1 && x <= big_n => Ok(x),
        _ => Err(CliError::usage(format!(
            "invalid initial state `{raw}`: expected an index in [1, {big_n}] or {n} bits"
        ))),
    }
}

/// Write to stdout, exiting quietly when the downstream reader has
/// closed the pipe (e.g. `bcn stg … | head`).
fn out_write(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn out_line(text: &str) {
    out_write(&format!("{text}\n"));
}

/// Write atomically next to the destination, or to stdout when no path
/// is given.
fn emit(output: Option<&Path>, content: &str) -> Result<(), CliError> {
    match output {
        None => {
            out_write(content);
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::Builder::new().prefix(".bcn-out").tempfile_in(dir)?;
            tmp.write_all(content.as_bytes())?;
            tmp.persist(path).map_err(|e| CliError::from(e.error))?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveDoc {
    lambda: f64,
    algorithm: &'static str,
    values: BTreeMap<usize, f64>,
    policy: BTreeMap<usize, usize>,
    #[serde(rename = "K_columns")]
    k_columns: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal_cost_at_x0: Option<f64>,
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let (net, assr, region, graph) = prepare(&args.network)?;
    let theta = match args.algorithm {
        Algorithm::Vi => args
            .theta
            .ok_or_else(|| CliError::usage("--theta is required with --algorithm vi"))?,
        Algorithm::Madani => args.theta.unwrap_or(0.0),
    };
    let mut cfg = SolverConfig::new(args.lambda, theta)?;
    if let Some(cap) = args.max_iterations {
        cfg = cfg.with_max_iterations(cap)?;
    }
    let (values, iterations, algorithm) = match args.algorithm {
        Algorithm::Vi => {
            let r = value_iteration(&graph, &cfg, None)?;
            if !r.converged {
                eprintln!(
                    "warning: value iteration hit the cap of {} sweeps before the \
                     per-sweep change dropped below {theta}",
                    cfg.max_iterations()
                );
            }
            (r.values, Some(r.iterations), "vi")
        }
        Algorithm::Madani => (madani(&graph, args.lambda)?, None, "madani"),
    };
    let policy = extract_policy(&graph, &values, args.lambda)?;
    let k = feedback_matrix(&policy, &region, assr.big_m(), assr.big_n())?;

    let x0 = args.x0.as_deref().map(|raw| parse_x0(raw, net.n())).transpose()?;
    let cost_at_x0 = match x0 {
        None => None,
        Some(x) => match graph.position(x) {
            Some(p) => Some(round_sig9(values.get(p))),
            None => {
                return Err(CliError::usage(format!(
                    "initial state {x} is outside the feasible region"
                )))
            }
        },
    };

    let content = match args.format {
        Format::Json => {
            let doc = SolveDoc {
                lambda: args.lambda,
                algorithm,
                values: graph
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(p, &x)| (x, round_sig9(values.get(p))))
                    .collect(),
                policy: graph
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(p, &x)| (x, policy.input_at(p)))
                    .collect(),
                k_columns: k.col_indices().to_vec(),
                iterations,
                optimal_cost_at_x0: cost_at_x0,
            };
            let mut text = serde_json::to_string_pretty(&doc)
                .map_err(|e| CliError::usage(e.to_string()))?;
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = String::from("state_index,value,input\n");
            for (p, &x) in graph.vertices().iter().enumerate() {
                let _ = writeln!(text, "{x},{},{}", sig9(values.get(p)), policy.input_at(p));
            }
            text
        }
    };

    // With the document on stdout, the human-readable cost line moves to
    // stderr so the output stays machine-parseable.
    if let Some(v) = cost_at_x0 {
        let line = format!("optimal cost at x0 = {}", sig9(v));
        if args.output.is_some() {
            out_line(&line);
        } else {
            eprintln!("{line}");
        }
    }
    emit(args.output.as_deref(), &content)
}

#[derive(Deserialize)]
struct PolicyFile {
    lambda: f64,
    #[serde(rename = "K_columns")]
    k_columns: Vec<usize>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (net, assr, region, _) = prepare(&args.network)?;
    let text = std::fs::read_to_string(&args.policy)?;
    let pf: PolicyFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad policy file: {e}")))?;
    if pf.k_columns.len() != assr.big_n() {
        return Err(CliError::usage(format!(
            "policy file has {} K columns, expected {}",
            pf.k_columns.len(),
            assr.big_n()
        )));
    }
    let k = LogicalMatrix::new(assr.big_m(), pf.k_columns)
        .map_err(|e| CliError::usage(format!("bad policy file: {e}")))?;
    let x0 = parse_x0(&args.x0, net.n())?;
    let mode = match (args.horizon, args.epsilon) {
        (Some(t), None) => RolloutMode::Fixed(t),
        (None, eps) => RolloutMode::Epsilon(eps.unwrap_or(1e-6)),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let r = rollout(&assr, net.cost(), &region, &k, x0, pf.lambda, mode)?;

    let mut csv = String::from("t,state_index,state_bits,input_index,stage_cost,discounted_cumulative\n");
    let mut cumulative = 0.0f64;
    let mut scale = 1.0f64;
    for t in 0..r.horizon {
        let x = r.states[t];
        let u = r.inputs[t];
        let g = stage_cost(net.cost(), x, u, net.n(), net.m())?;
        cumulative += scale * g;
        scale *= pf.lambda;
        let _ = writeln!(
            csv,
            "{t},{x},{},{u},{},{}",
            bits_string(x, net.n()),
            sig9(g),
            sig9(cumulative)
        );
    }
    emit(args.output.as_deref(), &csv)
}

fn bits_string(x: usize, n: usize) -> String {
    let raw = x - 1;
    (0..n).map(|j| if (raw >> (n - 1 - j)) & 1 == 1 { '1' } else { '0' }).collect()
}

fn cmd_assr(args: NetworkArgs) -> Result<(), CliError> {
    let net = load_network(&args.network)?;
    let assr = build_assr(&net);
    let cells: Vec<String> = assr.table().iter().map(|s| s.to_string()).collect();
    emit(args.output.as_deref(), &format!("{}\n", cells.join(",")))
}

fn cmd_stg(args: NetworkArgs) -> Result<(), CliError> {
    let (_, _, _, graph) = prepare(&args.network)?;
    emit(args.output.as_deref(), &graph.to_dot())
}

// ------------------------------------------------------------------
// Benchmark: solve the bundled network both ways and compare against
// the stored expected values.
// ------------------------------------------------------------------

#[derive(Deserialize)]
struct Expected {
    stg: StgExpected,
    golden: GoldenExpected,
    alternates: AlternatesExpected,
}

#[derive(Deserialize)]
struct StgExpected {
    vertices: usize,
    edges: usize,
    min_out_degree: usize,
    max_out_degree: usize,
}

#[derive(Deserialize)]
struct Checksums {
    min: f64,
    max: f64,
    sum: f64,
}

#[derive(Deserialize)]
struct GoldenExpected {
    lambda: f64,
    x0: usize,
    optimal_cost: f64,
    optimal_cost_exact_fraction: (f64, f64),
    value_checksums: Checksums,
    vi_sweeps: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
struct AlternatesExpected {
    lambda_half_x0_10: f64,
    lambda_half_x0_503: f64,
    lambda_half_vi_sweeps: BTreeMap<String, u64>,
    lambda_half_value_checksums: Checksums,
}

struct Bench {
    failures: usize,
    checks: usize,
}

impl Bench {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.checks += 1;
        if ok {
            out_line(&format!("ok   {name}: {detail}"));
        } else {
            self.failures += 1;
            out_line(&format!("FAIL {name}: {detail}"));
        }
    }

    fn close(&mut self, name: &str, got: f64, expected: f64, tol: f64) {
        let ok = (got - expected).abs() <= tol;
        self.check(name, ok, format!("got {}, expected {}", sig9(got), sig9(expected)));
    }

    fn checksums(&mut self, name: &str, values: &ValueTable, expected: &Checksums) {
        let slice = values.as_slice();
        let min = slice.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let max = slice.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = slice.iter().sum();
        self.close(&format!("{name} min"), min, expected.min, 1e-6);
        self.close(&format!("{name} max"), max, expected.max, 1e-6);
        self.close(&format!("{name} sum"), sum, expected.sum, 1e-6);
    }
}

fn vi_sweeps(graph: &TransitionGraph, lambda: f64, theta: f64) -> Result<u64, CliError> {
    let cfg = SolverConfig::new(lambda, theta)?;
    Ok(value_iteration(graph, &cfg, None)?.iterations)
}

fn cmd_bench() -> Result<(), CliError> {
    let net = bcn::model::network_from_json(ARA_NETWORK)?;
    let expected: Expected = serde_json::from_str(ARA_EXPECTED)
        .map_err(|e| CliError::usage(format!("bad expected-values file: {e}")))?;
    let mut b = Bench { failures: 0, checks: 0 };

    let t0 = Instant::now();
    let assr = build_assr(&net);
    let t_assr = t0.elapsed();
    let region = feasible_region(&assr, net.constraints())?;
    let t1 = Instant::now();
    let graph = build_stg(&assr, net.cost(), &region)?;
    let t_stg = t1.elapsed();

    b.check(
        "stg vertices",
        graph.len() == expected.stg.vertices,
        format!("got {}, expected {}", graph.len(), expected.stg.vertices),
    );
    b.check(
        "stg edges",
        graph.edge_count() == expected.stg.edges,
        format!("got {}, expected {}", graph.edge_count(), expected.stg.edges),
    );
    let degrees: Vec<usize> = (0..graph.len()).map(|p| graph.edges_at(p).len()).collect();
    let dmin = degrees.iter().copied().min().unwrap_or(0);
    let dmax = degrees.iter().copied().max().unwrap_or(0);
    b.check(
        "stg out-degree range",
        dmin == expected.stg.min_out_degree && dmax == expected.stg.max_out_degree,
        format!(
            "got [{dmin}, {dmax}], expected [{}, {}]",
            expected.stg.min_out_degree, expected.stg.max_out_degree
        ),
    );

    // Exact solver at the golden discount factor.
    let lam = expected.golden.lambda;
    let t2 = Instant::now();
    let v = madani(&graph, lam)?;
    let t_madani = t2.elapsed();
    let p0 = graph
        .position(expected.golden.x0)
        .ok_or_else(|| CliError::usage("golden x0 missing from the graph".to_string()))?;
    b.close("optimal cost at golden x0", v.get(p0), expected.golden.optimal_cost, 1e-6);
    let (num, den) = expected.golden.optimal_cost_exact_fraction;
    b.close("optimal cost exact fraction", v.get(p0), num / den, 1e-9);
    b.checksums("golden value checksums", &v, &expected.golden.value_checksums);

    // Near-optimal solver: sweep counts at the documented thresholds plus
    // full-convergence agreement with the exact solver.
    for (theta_text, &sweeps_expected) in &expected.golden.vi_sweeps {
        let theta: f64 = theta_text
            .parse()
            .map_err(|_| CliError::usage(format!("bad threshold key `{theta_text}`")))?;
        let sweeps = vi_sweeps(&graph, lam, theta)?;
        b.check(
            &format!("vi sweeps at theta={theta_text}"),
            sweeps == sweeps_expected,
            format!("got {sweeps}, expected {sweeps_expected}"),
        );
    }
    let t3 = Instant::now();
    let cfg = SolverConfig::new(lam, 1e-12)?;
    let vi = value_iteration(&graph, &cfg, None)?;
    let t_vi = t3.elapsed();
    let max_diff = vi
        .values
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    b.check(
        "vi/madani agreement",
        max_diff <= 1e-6,
        format!("max |difference| = {:.3e}", max_diff),
    );

    // Secondary discount factor pinned as a regression.
    let v_half = madani(&graph, 0.5)?;
    let p10 = graph.position(10).expect("state 10 is feasible");
    let p503 = graph.position(503).expect("state 503 is feasible");
    b.close("cost at x0=10, lambda=0.5", v_half.get(p10), expected.alternates.lambda_half_x0_10, 1e-9);
    b.close(
        "cost at x0=503, lambda=0.5",
        v_half.get(p503),
        expected.alternates.lambda_half_x0_503,
        1e-9,
    );
    b.checksums(
        "lambda=0.5 value checksums",
        &v_half,
        &expected.alternates.lambda_half_value_checksums,
    );
    for (theta_text, &sweeps_expected) in &expected.alternates.lambda_half_vi_sweeps {
        let theta: f64 = theta_text
            .parse()
            .map_err(|_| CliError::usage(format!("bad threshold key `{theta_text}`")))?;
        let sweeps = vi_sweeps(&graph, 0.5, theta)?;
        b.check(
            &format!("vi sweeps at theta={theta_text}, lambda=0.5"),
            sweeps == sweeps_expected,
            format!("got {sweeps}, expected {sweeps_expected}"),
        );
    }

    b.check(
        "madani wall time",
        t_madani.as_secs_f64() < 10.0,
        format!("{:.1} ms (budget 10 s)", t_madani.as_secs_f64() * 1e3),
    );

    out_line(&format!(
        "timings: assr {:.1} ms, stg {:.1} ms, madani {:.1} ms, vi(theta=1e-12) {:.1} ms",
        t_assr.as_secs_f64() * 1e3,
        t_stg.as_secs_f64() * 1e3,
        t_madani.as_secs_f64() * 1e3,
        t_vi.as_secs_f64() * 1e3
    ));
    out_line(&format!("benchmark: {} checks, {} failures", b.checks, b.failures));
    if b.failures > 0 {
        return Err(CliError::usage(format!("{} benchmark checks failed", b.failures)));
    }
    Ok(())
}
