//! Optimal-control solvers on the transition graph.
//!
//! Two routes to the optimal value function of the discounted deterministic
//! problem: Gauss-Seidel value iteration (near-optimal, threshold-controlled)
//! and the exact polynomial-time method built on k-step minimal path costs
//! with a geometric-series extrapolation. Plus policy extraction, the
//! state-feedback matrix, exact policy evaluation, and closed-loop rollouts.

use crate::logic::LogicalMatrix;
use crate::model::{stage_cost, stage_cost_bound, Assr, FeasibleRegion, ModelError, StageCostSpec};
use crate::stg::TransitionGraph;
use std::fmt;

#[derive(Debug)]
pub enum SolverError {
    /// Invalid solver configuration (discount factor, threshold, cap).
    Config(String),
    /// A table/policy/matrix does not line up with the graph it is used on.
    Mismatch(String),
    InvalidArgument(String),
    /// A rollout left the feasible region or applied an inadmissible input:
    /// the supplied feedback law is broken.
    BrokenPolicy { step: usize, state: usize },
    Model(ModelError),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Config(msg) => write!(f, "invalid solver config: {msg}"),
            SolverError::Mismatch(msg) => write!(f, "mismatched arguments: {msg}"),
            SolverError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            SolverError::BrokenPolicy { step, state } => write!(
                f,
                "broken feedback law: inadmissible input at state {state} (rollout step {step})"
            ),
            SolverError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        SolverError::Model(e)
    }
}

/// Discount factor, stop threshold, and iteration cap for value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    lambda: f64,
    theta: f64,
    max_iterations: u64,
}

impl SolverConfig {
    /// θ = 0 is allowed but need not terminate on its own; the default cap
    /// of 10⁶ sweeps guards it.
    pub fn new(lambda: f64, theta: f64) -> Result<Self, SolverError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(SolverError::Config(format!(
                "discount factor must lie in (0, 1), got {lambda}"
            )));
        }
        if !(theta >= 0.0) {
            return Err(SolverError::Config(format!("threshold must be ≥ 0, got {theta}")));
        }
        Ok(SolverConfig { lambda, theta, max_iterations: 1_000_000 })
    }

    pub fn with_max_iterations(mut self, cap: u64) -> Result<Self, SolverError> {
        if cap == 0 {
            return Err(SolverError::Config("iteration cap must be positive".into()));
        }
        self.max_iterations = cap;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn max_iterations(&self) -> u64 {
        self.max_iterations
    }
}

fn check_lambda(lambda: f64) -> Result<(), SolverError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(SolverError::Config(format!("discount factor must lie in (0, 1), got {lambda}")))
    }
}

/// Per-vertex values aligned to `TransitionGraph::vertices()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable(Vec<f64>);

impl ValueTable {
    pub fn new(values: Vec<f64>) -> Self {
        ValueTable(values)
    }

    pub fn zeros(len: usize) -> Self {
        ValueTable(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value at a vertex position.
    pub fn get(&self, position: usize) -> f64 {
        self.0[position]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Per-vertex input choice aligned to `TransitionGraph::vertices()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(inputs: Vec<usize>) -> Self {
        Policy(inputs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Input applied at a vertex position.
    pub fn input_at(&self, position: usize) -> usize {
        self.0[position]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// K ∈ L_{M×N}: column i is the input applied in state i.
pub type FeedbackMatrix = LogicalMatrix;

/// Which update scheme a value-iteration sweep uses. Gauss-Seidel is the
/// default (updates in place, ascending vertex order); the synchronous
/// Jacobi variant exists because the λ-contraction of the per-sweep change
/// is cleanly stated only for synchronous updates. Both share a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    GaussSeidel,
    Jacobi,
}

/// Outcome of value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ViResult {
    pub values: ValueTable,
    /// Completed sweeps.
    pub iterations: u64,
    /// False when the cap was hit before the per-sweep change dropped
    /// below θ; the values are still returned.
    pub converged: bool,
    /// ψ after each sweep (max absolute value change), for diagnostics.
    pub sweep_changes: Vec<f64>,
}

/// Gauss-Seidel value iteration from `v0` (zeros when `None`).
pub fn value_iteration(
    g: &TransitionGraph,
    cfg: &SolverConfig,
    v0: Option<&ValueTable>,
) -> Result<ViResult, SolverError> {
    value_iteration_with(g, cfg, v0, Sweep::GaussSeidel)
}

/// Value iteration with an explicit sweep scheme.
pub fn value_iteration_with(
    g: &TransitionGraph,
    cfg: &SolverConfig,
    v0: Option<&ValueTable>,
    sweep: Sweep,
) -> Result<ViResult, SolverError> {
    let len = g.len();
    let mut v = match v0 {
        None => vec![0.0; len],
        Some(t) if t.len() == len => t.as_slice().to_vec(),
        Some(t) => {
            return Err(SolverError::Mismatch(format!(
                "initial table has {} entries for {len} vertices",
                t.len()
            )))
        }
    };
    let lambda = cfg.lambda;
    let mut scratch = match sweep {
        Sweep::GaussSeidel => Vec::new(),
        Sweep::Jacobi => vec![0.0; len],
    };
    let mut sweep_changes = Vec::new();
    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let mut psi = 0.0f64;
        match sweep {
            Sweep::GaussSeidel => {
                for p in 0..len {
                    let new = bellman_min(g, &v, p, lambda);
                    psi = psi.max((new - v[p]).abs());
                    v[p] = new;
                }
            }
            Sweep::Jacobi => {
                for p in 0..len {
                    let new = bellman_min(g, &v, p, lambda);
                    psi = psi.max((new - v[p]).abs());
                    scratch[p] = new;
                }
                std::mem::swap(&mut v, &mut scratch);
            }
        }
        iterations += 1;
        sweep_changes.push(psi);
        if psi < cfg.theta {
            converged = true;
            break;
        }
    }
    Ok(ViResult { values: ValueTable(v), iterations, converged, sweep_changes })
}

fn bellman_min(g: &TransitionGraph, v: &[f64], p: usize, lambda: f64) -> f64 {
    let mut best = f64::INFINITY;
    for e in g.edges_at(p) {
        let q = e.weight + lambda * v[e.succ_pos];
        if q < best {
            best = q;
        }
    }
    best
}

/// λ⁰..λⁿ by cumulative product.
fn lambda_powers(lambda: f64, n: usize) -> Vec<f64> {
    let mut pow = Vec::with_capacity(n + 1);
    pow.push(1.0);
    for k in 1..=n {
        pow.push(pow[k - 1] * lambda);
    }
    pow
}

/// Full d/y tables retained for diagnostics: d has |V|+1 rows (k ∈ [0,|V|],
/// row 0 all zeros), y has |V| rows (k ∈ [0,|V|−1]).
#[derive(Debug, Clone, PartialEq)]
pub struct MadaniWorkspace {
    d: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl MadaniWorkspace {
    /// d_k(x) at vertex position p: minimal discounted cost of a k-edge
    /// path starting at x.
    pub fn d(&self, k: usize, p: usize) -> f64 {
        self.d[k][p]
    }

    pub fn y(&self, k: usize, p: usize) -> f64 {
        self.y[k][p]
    }

    pub fn d_rows(&self) -> usize {
        self.d.len()
    }

    pub fn y_rows(&self) -> usize {
        self.y.len()
    }
}

/// Exact optimal values. Four stages: (1) k-step minimal path costs
/// d_k for k ∈ [0, |V|]; (2) the geometric extrapolation
/// y₀(x) = max_k (d_{|V|}(x) − λ^{|V|−k} d_k(x)) / (1 − λ^{|V|−k});
/// (3) y_k by the Bellman operator for k ∈ [1, |V|−1]; (4) v* = min_k y_k.
/// The d table is kept whole (stage 2 reads every row); y rolls two rows.
pub fn madani(g: &TransitionGraph, lambda: f64) -> Result<ValueTable, SolverError> {
    run_madani(g, lambda, false).map(|(v, _)| v)
}

/// `madani` retaining the full d and y tables (O(|V|²) memory).
pub fn madani_with_workspace(
    g: &TransitionGraph,
    lambda: f64,
) -> Result<(ValueTable, MadaniWorkspace), SolverError> {
    run_madani(g, lambda, true).map(|(v, ws)| (v, ws.unwrap()))
}

fn run_madani(
    g: &TransitionGraph,
    lambda: f64,
    keep_workspace: bool,
) -> Result<(ValueTable, Option<MadaniWorkspace>), SolverError> {
    check_lambda(lambda)?;
    let nv = g.len();
    if nv == 0 {
        return Err(SolverError::InvalidArgument("empty graph".into()));
    }
    let pow = lambda_powers(lambda, nv);

    // Stage 1: d_0 ≡ 0; d_k(x) = min_{(x,x′)∈E} w(x,x′) + λ·d_{k−1}(x′).
    let mut d: Vec<Vec<f64>> = Vec::with_capacity(nv + 1);
    d.push(vec![0.0; nv]);
    for k in 1..=nv {
        let prev = &d[k - 1];
        let mut row = vec![0.0; nv];
        for (p, slot) in row.iter_mut().enumerate() {
            *slot = bellman_min(g, prev, p, lambda);
        }
        d.push(row);
    }

    // Stage 2: y₀ by maximizing the closed cycle-tail extrapolation over
    // the path split point k.
    let d_last = &d[nv];
    let mut y0 = vec![0.0; nv];
    for p in 0..nv {
        let mut best = f64::NEG_INFINITY;
        for k in 0..nv {
            let j = nv - k;
            let cand = (d_last[p] - pow[j] * d[k][p]) / (1.0 - pow[j]);
            if cand > best {
                best = cand;
            }
        }
        y0[p] = best;
    }

    // Stages 3 and 4 interleaved: apply the Bellman operator |V|−1 times,
    // folding the running minimum.
    let mut v_star = y0.clone();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    if keep_workspace {
        y_rows.push(y0.clone());
    }
    let mut y_prev = y0;
    let mut y_cur = vec![0.0; nv];
    for _k in 1..nv {
        for (p, slot) in y_cur.iter_mut().enumerate() {
            *slot = bellman_min(g, &y_prev, p, lambda);
        }
        for p in 0..nv {
            if y_cur[p] < v_star[p] {
                v_star[p] = y_cur[p];
            }
        }
        if keep_workspace {
            y_rows.push(y_cur.clone());
        }
        std::mem::swap(&mut y_prev, &mut y_cur);
    }

    let workspace =
        if keep_workspace { Some(MadaniWorkspace { d, y: y_rows }) } else { None };
    Ok((ValueTable(v_star), workspace))
}

/// Greedy policy for a value table: per vertex, the edge minimizing
/// w(x,x′) + λ·V(x′), ties resolved toward the smallest best-input index.
pub fn extract_policy(
    g: &TransitionGraph,
    v: &ValueTable,
    lambda: f64,
) -> Result<Policy, SolverError> {
    check_lambda(lambda)?;
    if v.len() != g.len() {
        return Err(SolverError::Mismatch(format!(
            "value table has {} entries for {} vertices",
            v.len(),
            g.len()
        )));
    }
    let mut inputs = Vec::with_capacity(g.len());
    for p in 0..g.len() {
        let mut best_q = f64::INFINITY;
        let mut best_u = usize::MAX;
        for e in g.edges_at(p) {
            let q = e.weight + lambda * v.get(e.succ_pos);
            if q < best_q || (q == best_q && e.best_input < best_u) {
                best_q = q;
                best_u = e.best_input;
            }
        }
        inputs.push(best_u);
    }
    Ok(Policy(inputs))
}

/// Transcribe a policy into the feedback matrix K ∈ L_{M×N}: column i is
/// the policy's input for feasible state i; columns of states outside the
/// region are pinned to δ_M^1 so output files are byte-stable.
pub fn feedback_matrix(
    pol: &Policy,
    region: &FeasibleRegion,
    big_m: usize,
    big_n: usize,
) -> Result<FeedbackMatrix, SolverError> {
    if pol.len() != region.len() {
        return Err(SolverError::Mismatch(format!(
            "policy has {} entries for {} feasible states",
            pol.len(),
            region.len()
        )));
    }
    let mut cols = vec![1usize; big_n];
    for (p, &x) in region.states().iter().enumerate() {
        let u = pol.input_at(p);
        if u == 0 || u > big_m {
            return Err(SolverError::Mismatch(format!(
                "policy input {u} for state {x} outside [1, {big_m}]"
            )));
        }
        cols[x - 1] = u;
    }
    // Dimensions are valid by construction.
    Ok(LogicalMatrix::new(big_m, cols).unwrap())
}

/// Exact v_π by chain-following: each vertex's successor chain under π
/// ends in a cycle; the cycle value is its discounted cost divided by
/// 1 − λ^ℓ, and pre-cycle values follow by back-substitution. Memoized,
/// so every vertex is settled exactly once.
///
/// The stage cost of π's actual input is used (not the edge weight, which
/// is the minimum over all inputs reaching that successor), so dominated
/// policies evaluate truthfully; `assr` and `cost` supply it.
pub fn evaluate_policy_exact(
    assr: &Assr,
    cost: &StageCostSpec,
    g: &TransitionGraph,
    pol: &Policy,
    lambda: f64,
) -> Result<ValueTable, SolverError> {
    check_lambda(lambda)?;
    let nv = g.len();
    if pol.len() != nv {
        return Err(SolverError::Mismatch(format!(
            "policy has {} entries for {nv} vertices",
            pol.len()
        )));
    }
    let mut succ = vec![0usize; nv];
    let mut c = vec![0.0f64; nv];
    for (p, &x) in g.vertices().iter().enumerate() {
        let u = pol.input_at(p);
        let x_next = assr.next(x, u);
        succ[p] = g.position(x_next).ok_or_else(|| {
            SolverError::Mismatch(format!(
                "policy at state {x} leads to {x_next}, outside the graph"
            ))
        })?;
        c[p] = stage_cost(cost, x, u, assr.n(), assr.m())?;
    }

    let mut v = vec![f64::NAN; nv];
    let mut done = vec![false; nv];
    // 0 = unvisited, 1 = on the current path (with its path index).
    let mut on_path = vec![usize::MAX; nv];
    let mut path: Vec<usize> = Vec::new();
    for start in 0..nv {
        if done[start] {
            continue;
        }
        path.clear();
        let mut p = start;
        // Walk until a settled vertex or a repeat within this walk.
        let tail_value = loop {
            if done[p] {
                break v[p];
            }
            if on_path[p] != usize::MAX {
                // Cycle: path[on_path[p]..] closes on itself.
                let entry = on_path[p];
                let cycle = &path[entry..];
                let ell = cycle.len();
                let mut cycle_cost = 0.0f64;
                let mut scale = 1.0f64;
                for &q in cycle {
                    cycle_cost += scale * c[q];
                    scale *= lambda;
                }
                // scale is now λ^ℓ.
                let entry_value = cycle_cost / (1.0 - scale);
                v[cycle[0]] = entry_value;
                // Back-substitute around the cycle: stable (no division).
                for i in (1..ell).rev() {
                    let next_v = if i + 1 == ell { entry_value } else { v[cycle[i + 1]] };
                    v[cycle[i]] = c[cycle[i]] + lambda * next_v;
                }
                for &q in cycle {
                    done[q] = true;
                }
                path.truncate(entry);
                break entry_value;
            }
            on_path[p] = path.len();
            path.push(p);
            p = succ[p];
        };
        // Back-substitute the remaining pre-cycle path.
        let mut next_value = tail_value;
        for &q in path.iter().rev() {
            next_value = c[q] + lambda * next_value;
            v[q] = next_value;
            done[q] = true;
        }
        for &q in &path {
            on_path[q] = usize::MAX;
        }
        // on_path for cycle vertices stays stale, but they are done.
    }
    Ok(ValueTable(v))
}

/// Rollout horizon selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RolloutMode {
    /// Run exactly T steps.
    Fixed(usize),
    /// Run until the geometric tail bound λ^T·g_max/(1−λ) drops below ε,
    /// so the reported cost is within ε of the infinite-horizon value.
    Epsilon(f64),
}

/// A closed-loop trajectory: states has length T+1, inputs length T.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub states: Vec<usize>,
    pub inputs: Vec<usize>,
    pub discounted_cost: f64,
    pub horizon: usize,
}

/// Evolve the network from x0 under the feedback law u = Kx, accumulating
/// the discounted cost. Every visited state must stay feasible and every
/// applied input admissible; a violation reports the feedback law as
/// broken rather than producing a silently wrong cost.
pub fn rollout(
    assr: &Assr,
    cost: &StageCostSpec,
    region: &FeasibleRegion,
    k: &FeedbackMatrix,
    x0: usize,
    lambda: f64,
    mode: RolloutMode,
) -> Result<RolloutResult, SolverError> {
    check_lambda(lambda)?;
    let big_n = assr.big_n();
    let big_m = assr.big_m();
    if k.rows() != big_m || k.cols() != big_n {
        return Err(SolverError::Mismatch(format!(
            "feedback matrix is {}×{}, expected {big_m}×{big_n}",
            k.rows(),
            k.cols()
        )));
    }
    if !region.contains(x0) {
        return Err(SolverError::InvalidArgument(format!(
            "initial state {x0} is not in the feasible region"
        )));
    }
    let horizon = match mode {
        RolloutMode::Fixed(t) => t,
        RolloutMode::Epsilon(eps) => {
            if !(eps > 0.0) {
                return Err(SolverError::InvalidArgument(format!(
                    "epsilon must be positive, got {eps}"
                )));
            }
            let g_max = stage_cost_bound(cost);
            epsilon_horizon(lambda, g_max, eps)
        }
    };
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut discounted_cost = 0.0f64;
    let mut scale = 1.0f64;
    let mut x = x0;
    states.push(x);
    for step in 0..horizon {
        let u = k.column(x).index();
        let admissible = region
            .inputs_for_state(x)
            .map_or(false, |inputs| inputs.contains(&u));
        if !admissible {
            return Err(SolverError::BrokenPolicy { step, state: x });
        }
        discounted_cost += scale * stage_cost(cost, x, u, assr.n(), assr.m())?;
        scale *= lambda;
        x = assr.next(x, u);
        // Admissible inputs keep the state feasible by the pruning fixed
        // point; check anyway so a corrupted region cannot hide.
        if !region.contains(x) {
            return Err(SolverError::BrokenPolicy { step, state: x });
        }
        inputs.push(u);
        states.push(x);
    }
    Ok(RolloutResult { states, inputs, discounted_cost, horizon })
}

/// Smallest T with λ^T·g_max/(1−λ) < ε.
fn epsilon_horizon(lambda: f64, g_max: f64, eps: f64) -> usize {
    if g_max <= 0.0 {
        return 0;
    }
    let target = eps * (1.0 - lambda) / g_max;
    if target >= 1.0 {
        return 0;
    }
    // Log estimate, then exact adjustment against powi.
    let mut t = (target.ln() / lambda.ln()).ceil().max(0.0) as usize;
    while lambda.powi(t as i32) >= target {
        t += 1;
    }
    while t > 0 && lambda.powi((t - 1) as i32) < target {
        t -= 1;
    }
    t
}
