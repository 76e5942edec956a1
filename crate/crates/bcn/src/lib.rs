//! Optimal control of Boolean control networks as discounted deterministic
//! decision processes.
//!
//! The pipeline: Boolean update functions are compiled to the algebraic
//! state-space representation ([`model::build_assr`]), constraints are
//! pruned to the feasible region ([`model::feasible_region`]), a weighted
//! state transition graph is built over it ([`stg::build_stg`]), and
//! optimal values/policies come from either Gauss-Seidel value iteration
//! ([`solver::value_iteration`]) or the exact polynomial-time path-cost
//! method ([`solver::madani`]). Policies export as logical feedback
//! matrices u = Kx ([`solver::feedback_matrix`]) and can be simulated in
//! closed loop ([`solver::rollout`]).
//!
//! State/input encoding: a Boolean vector maps to the canonical vector
//! δ_{2^n}^i with i = 1 + Σ bⱼ·2^{n−j} — bit values read off the index
//! directly (0 ↔ δ₂¹, 1 ↔ δ₂²), variable 1 most significant.
//!
//! The [`oracle`] module holds deliberately naive reference solvers used
//! by the test suite; they are not part of the supported API surface.

pub mod fmt;
pub mod logic;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod stg;

pub use logic::{
    decode_state, encode_state, parse_expr, stp_canonical, stp_logical, structure_matrix,
    BoolExpr, CanonicalVector, LogicError, LogicalMatrix, ParseError,
};
pub use model::{
    build_assr, feasible_region, load_network, network_from_json, network_to_json, save_network,
    stage_cost, stage_cost_bound, Assr, BooleanNetwork, ConstraintSpec, FeasibleRegion,
    ModelError, StageCostSpec,
};
pub use solver::{
    evaluate_policy_exact, extract_policy, feedback_matrix, madani, madani_with_workspace,
    rollout, value_iteration, value_iteration_with, FeedbackMatrix, MadaniWorkspace, Policy,
    RolloutMode, RolloutResult, SolverConfig, SolverError, Sweep, ValueTable, ViResult,
};
pub use stg::{admissible_inputs, build_stg, build_stg_instrumented, Edge, TransitionGraph};
