//! Independent ground-truth solvers and instance generators, used only by
//! tests. Deliberately naive: exhaustive policy enumeration and
//! finite-horizon backward induction share no code path with the real
//! solvers beyond exact policy evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    feasible_region, stage_cost, Assr, ConstraintSpec, FeasibleRegion, StageCostSpec,
};
use crate::solver::{evaluate_policy_exact, Policy, SolverError, ValueTable};
use crate::stg::{build_stg, TransitionGraph};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug)]
pub enum OracleError {
    /// The instance is too large for exhaustive enumeration.
    Refused { policies: u128, cap: u64 },
    Solver(SolverError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Refused { policies, cap } => {
                write!(f, "oracle refused: {policies} policies exceed the cap of {cap}")
            }
            OracleError::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for OracleError {}

impl From<SolverError> for OracleError {
    fn from(e: SolverError) -> Self {
        OracleError::Solver(e)
    }
}

/// Caps keeping the deliberately exponential oracles inside test budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Enumeration refuses when Π_x |C_u(x)| exceeds this.
    pub max_policies: u64,
    pub max_horizon: u32,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_policies: 1_000_000, max_horizon: 10_000 }
    }
}

/// Evaluate every feasible stationary policy exactly and return the
/// elementwise-minimum value table together with one policy attaining it
/// (the first policy, in odometer order over admissible inputs, whose
/// value sum reaches the minimum — such a policy attains the elementwise
/// minimum at every state by the policy-improvement argument).
pub fn enumerate_optimal(
    assr: &Assr,
    cost: &StageCostSpec,
    region: &FeasibleRegion,
    g: &TransitionGraph,
    lambda: f64,
    budget: &OracleBudget,
) -> Result<(ValueTable, Policy), OracleError> {
    let nv = region.len();
    let mut count: u128 = 1;
    for p in 0..nv {
        count = count.saturating_mul(region.inputs_at(p).len() as u128);
        if count > budget.max_policies as u128 {
            return Err(OracleError::Refused { policies: count, cap: budget.max_policies });
        }
    }
    // Odometer over per-vertex admissible-input choices.
    let mut choice = vec![0usize; nv];
    let mut best_values: Option<Vec<f64>> = None;
    let mut best_policy: Option<Vec<usize>> = None;
    let mut best_sum = f64::INFINITY;
    loop {
        let inputs: Vec<usize> =
            (0..nv).map(|p| region.inputs_at(p)[choice[p]]).collect();
        let pol = Policy::new(inputs);
        let v = evaluate_policy_exact(assr, cost, g, &pol, lambda)?;
        let sum: f64 = v.as_slice().iter().sum();
        match &mut best_values {
            None => {
                best_sum = sum;
                best_values = Some(v.as_slice().to_vec());
                best_policy = Some(pol.as_slice().to_vec());
            }
            Some(best) => {
                for (slot, &val) in best.iter_mut().zip(v.as_slice()) {
                    if val < *slot {
                        *slot = val;
                    }
                }
                if sum < best_sum {
                    best_sum = sum;
                    best_policy = Some(pol.as_slice().to_vec());
                }
            }
        }
        // Advance the odometer; done when it wraps.
        let mut p = 0;
        loop {
            if p == nv {
                return Ok((
                    ValueTable::new(best_values.unwrap()),
                    Policy::new(best_policy.unwrap()),
                ));
            }
            choice[p] += 1;
            if choice[p] < region.inputs_at(p).len() {
                break;
            }
            choice[p] = 0;
            p += 1;
        }
    }
}

/// Exact optimal T-step values by backward induction from terminal value
/// zero, straight off the (state, input) table — no graph involved.
/// |V_T − v*| ≤ λ^T·g_max/(1−λ).
pub fn truncated_dp(
    assr: &Assr,
    cost: &StageCostSpec,
    region: &FeasibleRegion,
    lambda: f64,
    horizon: u32,
) -> Result<ValueTable, SolverError> {
    assert!(horizon >= 1, "truncated DP needs a horizon of at least 1");
    let nv = region.len();
    let mut v = vec![0.0f64; nv];
    let mut next_v = vec![0.0f64; nv];
    for _ in 0..horizon {
        for (p, &x) in region.states().iter().enumerate() {
            let mut best = f64::INFINITY;
            for &u in region.inputs_at(p) {
                let succ = assr.next(x, u);
                // Admissible inputs keep the successor inside the region.
                let sp = region.position(succ).expect("pruned region is closed");
                let q = stage_cost(cost, x, u, assr.n(), assr.m())? + lambda * v[sp];
                if q < best {
                    best = q;
                }
            }
            next_v[p] = best;
        }
        std::mem::swap(&mut v, &mut next_v);
    }
    Ok(ValueTable::new(v))
}

/// A reproducible random problem: uniform random transition table (the
/// per-bit truth tables are iid uniform, so successors are uniform on
/// [1, N]), integer stage costs in [−5, 5] — negative costs included on
/// purpose — and optional constraints.
pub struct RandomInstance {
    pub assr: Assr,
    pub cost: StageCostSpec,
    pub constraints: ConstraintSpec,
    pub region: FeasibleRegion,
    pub graph: TransitionGraph,
}

/// Unconstrained random instance; always feasible.
pub fn random_instance(n: usize, m: usize, seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = random_parts(n, m, &mut rng, false);
    instance.expect("unconstrained instances are always feasible")
}

/// Random instance with random state/input constraints, retrying with
/// derived seeds until the pruned region is non-empty (falling back to an
/// unconstrained draw if feasibility keeps failing).
pub fn random_feasible_instance(n: usize, m: usize, seed: u64) -> RandomInstance {
    for attempt in 0u64..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt * 0x9e37_79b9));
        if let Some(instance) = random_parts(n, m, &mut rng, true) {
            return instance;
        }
    }
    random_instance(n, m, seed)
}

fn random_parts(n: usize, m: usize, rng: &mut ChaCha8Rng, constrain: bool) -> Option<RandomInstance> {
    let big_n = 1usize << n;
    let big_m = 1usize << m;
    let table: Vec<usize> = (0..big_n * big_m).map(|_| rng.gen_range(1..=big_n)).collect();
    let assr = Assr::from_table(n, m, table).unwrap();
    let values: Vec<f64> =
        (0..big_n * big_m).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
    let cost = StageCostSpec::Table(values);
    let constraints = if constrain {
        let mut allowed: BTreeSet<usize> = (1..=big_n).filter(|_| rng.gen_bool(0.8)).collect();
        if allowed.is_empty() {
            allowed.insert(rng.gen_range(1..=big_n));
        }
        let mut allowed_inputs: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &x in &allowed {
            if rng.gen_bool(0.3) {
                let subset: BTreeSet<usize> =
                    (1..=big_m).filter(|_| rng.gen_bool(0.6)).collect();
                if !subset.is_empty() {
                    allowed_inputs.insert(x, subset);
                }
            }
        }
        ConstraintSpec::new(Some(allowed), allowed_inputs)
    } else {
        ConstraintSpec::unconstrained()
    };
    let region = feasible_region(&assr, &constraints).ok()?;
    let graph = build_stg(&assr, &cost, &region).unwrap();
    Some(RandomInstance { assr, cost, constraints, region, graph })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::madani;

    #[test]
    fn singleton_inputs_give_the_unique_policy() {
        // m = 0: the only policy is u ≡ 1, on the forced cycle 1→2→1.
        let assr = Assr::from_table(1, 0, vec![2, 1]).unwrap();
        let cost = StageCostSpec::Table(vec![1.0, 3.0]);
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let g = build_stg(&assr, &cost, &region).unwrap();
        let (v, pol) =
            enumerate_optimal(&assr, &cost, &region, &g, 0.5, &OracleBudget::default()).unwrap();
        assert_eq!(pol.as_slice(), &[1, 1]);
        assert!((v.get(0) - 10.0 / 3.0).abs() < 1e-12);
        assert!((v.get(1) - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_matches_exact_solver_on_two_option() {
        let assr = Assr::from_table(1, 1, vec![1, 2, 2, 2]).unwrap();
        let cost = StageCostSpec::Table(vec![1.2, 2.0, 0.0, 2.0]);
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let g = build_stg(&assr, &cost, &region).unwrap();
        let (v, pol) =
            enumerate_optimal(&assr, &cost, &region, &g, 0.5, &OracleBudget::default()).unwrap();
        assert_eq!(v.get(0), 2.0);
        assert_eq!(v.get(1), 4.0);
        let exact = madani(&g, 0.5).unwrap();
        assert_eq!(v.as_slice(), exact.as_slice());
        // The returned policy attains the optimum at every state.
        let v_pi = evaluate_policy_exact(&assr, &cost, &g, &pol, 0.5).unwrap();
        for p in 0..g.len() {
            assert!((v_pi.get(p) - v.get(p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn budget_refusal() {
        let assr = Assr::from_table(1, 1, vec![1, 2, 2, 2]).unwrap();
        let cost = StageCostSpec::Table(vec![0.0; 4]);
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let g = build_stg(&assr, &cost, &region).unwrap();
        let budget = OracleBudget { max_policies: 3, max_horizon: 100 };
        let err = enumerate_optimal(&assr, &cost, &region, &g, 0.5, &budget).unwrap_err();
        assert!(matches!(err, OracleError::Refused { policies: 4, cap: 3 }));
    }

    #[test]
    fn truncated_dp_one_step() {
        let assr = Assr::from_table(1, 1, vec![1, 2, 2, 2]).unwrap();
        let cost = StageCostSpec::Table(vec![1.2, 2.0, 0.0, 2.0]);
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let v = truncated_dp(&assr, &cost, &region, 0.5, 1).unwrap();
        assert_eq!(v.get(0), 0.0);
        assert_eq!(v.get(1), 2.0);
    }

    #[test]
    fn truncated_dp_geometric_partial_sum() {
        let assr = Assr::from_table(1, 0, vec![1, 2]).unwrap();
        let cost = StageCostSpec::Table(vec![2.0, 2.0]);
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let v = truncated_dp(&assr, &cost, &region, 0.5, 20).unwrap();
        let expected = 4.0 * (1.0 - 0.5f64.powi(20));
        assert!((v.get(0) - expected).abs() < 1e-12);
    }

    #[test]
    fn truncated_dp_tail_bound_improves() {
        let inst = random_instance(2, 1, 7);
        let exact = madani(&inst.graph, 0.5).unwrap();
        let g_max = crate::model::stage_cost_bound(&inst.cost);
        for t in [1u32, 5, 10, 30] {
            let v = truncated_dp(&inst.assr, &inst.cost, &inst.region, 0.5, t).unwrap();
            let bound = 0.5f64.powi(t as i32) * g_max / 0.5;
            for p in 0..inst.graph.len() {
                assert!(
                    (v.get(p) - exact.get(p)).abs() <= bound + 1e-9,
                    "t={t}, p={p}"
                );
            }
        }
    }

    #[test]
    fn random_cross_check_enumeration_vs_exact_solver() {
        for seed in 0..10u64 {
            let inst = random_instance(2, 1, seed);
            let (v_opt, _) = enumerate_optimal(
                &inst.assr,
                &inst.cost,
                &inst.region,
                &inst.graph,
                0.6,
                &OracleBudget::default(),
            )
            .unwrap();
            let v = madani(&inst.graph, 0.6).unwrap();
            for p in 0..inst.graph.len() {
                let tol = 1e-9 * (1.0 + v.get(p).abs());
                assert!((v_opt.get(p) - v.get(p)).abs() <= tol, "seed {seed}, p {p}");
            }
        }
    }

    #[test]
    fn generators_are_reproducible() {
        let a = random_instance(3, 2, 42);
        let b = random_instance(3, 2, 42);
        assert_eq!(a.assr, b.assr);
        assert_eq!(a.cost, b.cost);
        let c = random_feasible_instance(3, 2, 42);
        let d = random_feasible_instance(3, 2, 42);
        assert_eq!(c.assr, d.assr);
        assert_eq!(c.constraints, d.constraints);
    }

    #[test]
    fn constrained_instances_are_feasible() {
        for seed in 0..20u64 {
            let inst = random_feasible_instance(2, 2, seed);
            assert!(!inst.region.is_empty());
            for (p, &x) in inst.region.states().iter().enumerate() {
                for &u in inst.region.inputs_at(p) {
                    assert!(inst.region.contains(inst.assr.next(x, u)));
                }
            }
        }
    }
}
