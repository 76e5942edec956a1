//! Black-box tests driving the installed binary the way a user would.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bcn");

fn ara() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ara.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("BCN_OPT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_toy_network(dir: &Path) -> PathBuf {
    let path = dir.join("toy.json");
    std::fs::write(
        &path,
        r#"{
  "states": ["x"],
  "inputs": ["u"],
  "functions": { "x": "u & x" },
  "cost": { "linear": { "A": [0.0], "B": [1.0] } }
}
"#,
    )
    .unwrap();
    path
}

#[test]
fn solve_reports_the_reference_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.json");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.6",
        "--x0",
        "503",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(
        stdout(&o).contains("optimal cost at x0 = 5.232"),
        "stdout: {}",
        stdout(&o)
    );

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["lambda"], 0.6);
    assert_eq!(doc["algorithm"], "madani");
    assert_eq!(doc["values"].as_object().unwrap().len(), 512);
    assert_eq!(doc["policy"].as_object().unwrap().len(), 512);
    assert_eq!(doc["K_columns"].as_array().unwrap().len(), 512);
    assert!((doc["values"]["503"].as_f64().unwrap() - 5.232).abs() < 1e-9);
    assert!((doc["optimal_cost_at_x0"].as_f64().unwrap() - 5.232).abs() < 1e-9);
    // The stored policy input and the feedback column agree at x0.
    let u503 = doc["policy"]["503"].as_u64().unwrap();
    assert_eq!(doc["K_columns"][502].as_u64().unwrap(), u503);
}

#[test]
fn solve_to_stdout_keeps_the_document_parseable() {
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.6",
        "--x0",
        "503",
    ]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).expect("stdout is JSON");
    assert!(doc["values"].is_object());
    // The human-readable line moves to stderr when the document owns stdout.
    assert!(stderr(&o).contains("optimal cost at x0 = 5.232"));
}

#[test]
fn value_iteration_needs_a_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "vi",
        "--lambda",
        "0.6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta"), "stderr: {}", stderr(&o));
    assert!(!out.exists(), "failed run must not leave an output file");
}

#[test]
fn value_iteration_agrees_on_the_reference_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vi.csv");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "vi",
        "--theta",
        "1e-9",
        "--lambda",
        "0.6",
        "--x0",
        "503",
        "--format",
        "csv",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    assert!(stdout(&o).contains("optimal cost at x0 = 5.232"));
    assert!(out.exists());
}

#[test]
fn value_iteration_reports_its_sweep_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vi.json");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "vi",
        "--theta",
        "0.1",
        "--lambda",
        "0.6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["algorithm"], "vi");
    assert_eq!(doc["iterations"], 9);
}

#[test]
fn csv_format_lists_every_feasible_state() {
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.6",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state_index,value,input"));
    assert_eq!(lines.count(), 512);
}

#[test]
fn assr_prints_the_transition_table() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy_network(dir.path());
    let o = run(&["assr", "--network", toy.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1,1,1,2\n");
}

#[test]
fn stg_prints_dot() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write_toy_network(dir.path());
    let o = run(&["stg", "--network", toy.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("digraph"), "got: {text}");
    // Both states reach state 1 at zero extra cost under input 1.
    assert!(text.contains("1 -> 1 [label=\"0/1\"]"), "got: {text}");
    assert!(text.contains("2 -> 1 [label=\"0/1\"]"), "got: {text}");
}

#[test]
fn simulate_replays_the_reported_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.json");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());

    // Bit-string start state: all variables true except D and T, which is
    // canonical index 503.
    let o = run(&[
        "simulate",
        "--network",
        ara().to_str().unwrap(),
        "--policy",
        out.to_str().unwrap(),
        "--x0",
        "111110110",
        "--epsilon",
        "1e-4",
    ]);
    assert!(o.status.success(), "stderr: {}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,state_index,state_bits,input_index,stage_cost,discounted_cumulative")
    );
    let first = lines.next().expect("at least one step");
    assert!(first.starts_with("0,503,111110110,"), "got: {first}");
    let last = text.lines().last().unwrap();
    let cumulative: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!(
        (cumulative - 5.232).abs() < 1e-3,
        "trajectory cost {cumulative} drifts from the reported 5.232"
    );

    // Each row is self-consistent: the running discounted total equals the
    // discounted sum of the printed stage costs.
    let mut recomputed = 0.0f64;
    let mut scale = 1.0f64;
    for (i, line) in text.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6, "row {i}: {line}");
        assert_eq!(cells[0].parse::<usize>().unwrap(), i);
        let g: f64 = cells[4].parse().unwrap();
        recomputed += scale * g;
        scale *= 0.6;
        let printed: f64 = cells[5].parse().unwrap();
        assert!(
            (printed - recomputed).abs() < 1e-5,
            "row {i}: cumulative {printed} vs recomputed {recomputed}"
        );
    }
}

#[test]
fn simulate_with_zero_horizon_emits_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solution.json");
    let o = run(&[
        "solve",
        "--network",
        ara().to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = run(&[
        "simulate",
        "--network",
        ara().to_str().unwrap(),
        "--policy",
        out.to_str().unwrap(),
        "--x0",
        "503",
        "--horizon",
        "0",
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "t,state_index,state_bits,input_index,stage_cost,discounted_cumulative\n"
    );
}

#[test]
fn fixed_horizon_and_epsilon_are_mutually_exclusive() {
    let o = run(&[
        "simulate",
        "--network",
        ara().to_str().unwrap(),
        "--policy",
        "unused.json",
        "--x0",
        "503",
        "--horizon",
        "5",
        "--epsilon",
        "1e-4",
    ]);
    assert!(!o.status.success());
}

#[test]
fn infeasible_constraints_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("impossible.json");
    std::fs::write(
        &path,
        r#"{
  "states": ["x"],
  "functions": { "x": "!x" },
  "cost": { "linear": { "A": [1.0], "B": [] } },
  "constraints": { "allowed_states": [1] }
}
"#,
    )
    .unwrap();
    let out = dir.path().join("never.json");
    let o = run(&[
        "solve",
        "--network",
        path.to_str().unwrap(),
        "--algorithm",
        "madani",
        "--lambda",
        "0.5",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"), "stderr: {}", stderr(&o));
    assert!(!out.exists(), "failed run must not leave an output file");
}

#[test]
fn thread_cap_env_var_is_validated() {
    let o = Command::new(BIN)
        .args(["assr", "--network", ara().to_str().unwrap()])
        .env("BCN_OPT_THREADS", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("BCN_OPT_THREADS"), "stderr: {}", stderr(&o));

    let o = Command::new(BIN)
        .args(["assr", "--network", ara().to_str().unwrap()])
        .env("BCN_OPT_THREADS", "4")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn outputs_are_byte_stable_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "solve".to_string(),
            "--network".to_string(),
            ara().to_str().unwrap().to_string(),
            "--algorithm".to_string(),
            "madani".to_string(),
            "--lambda".to_string(),
            "0.6".to_string(),
            "--output".to_string(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(Command::new(BIN).args(args(&a)).output().unwrap().status.success());
    assert!(Command::new(BIN).args(args(&b)).output().unwrap().status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bench_validates_the_stored_expected_values() {
    let o = run(&["bench"]);
    assert!(o.status.success(), "stdout: {}\nstderr: {}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("0 failures"), "got: {text}");
    assert!(!text.contains("FAIL"), "got: {text}");
}
