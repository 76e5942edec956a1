//! State transition graph of the constrained network.
//!
//! Vertices are the feasible states (ascending); there is at most one edge
//! per ordered state pair (x, x′), carrying the minimal stage cost over all
//! admissible inputs that realize the transition and the smallest input
//! index attaining that minimum. Solvers run on this graph, never on the
//! raw (state, input) table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::fmt::sig9;
use crate::model::{stage_cost, Assr, FeasibleRegion, ModelError, StageCostSpec};

/// One outgoing edge x → succ_state.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub succ_state: usize,
    /// Position of the successor in `vertices()`, precomputed for solvers.
    pub succ_pos: usize,
    /// w(x, x′): minimal stage cost over inputs realizing this transition.
    pub weight: f64,
    /// Smallest input index attaining `weight`.
    pub best_input: usize,
}

/// G = (V, E) with per-edge minimal weights and best enabling inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    vertices: Vec<usize>,
    pos: Vec<Option<u32>>,
    out_edges: Vec<Vec<Edge>>,
    edge_count: usize,
}

impl TransitionGraph {
    /// Vertex state indices, ascending. Solver sweeps follow this order.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Position of a state in `vertices()`, if it is a vertex.
    pub fn position(&self, state: usize) -> Option<usize> {
        self.pos.get(state).copied().flatten().map(|p| p as usize)
    }

    /// Outgoing edges of the vertex at `position`, sorted by successor.
    pub fn edges_at(&self, position: usize) -> &[Edge] {
        &self.out_edges[position]
    }

    /// Outgoing edges of a state index.
    pub fn edges_for_state(&self, state: usize) -> Option<&[Edge]> {
        self.position(state).map(|p| self.out_edges[p].as_slice())
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// DOT-format rendering: nodes named by state index, edges labeled
    /// "weight/best_input".
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph stg {\n");
        for &x in &self.vertices {
            let _ = writeln!(out, "  {x};");
        }
        for (p, edges) in self.out_edges.iter().enumerate() {
            let x = self.vertices[p];
            for e in edges {
                let label = dot_escape(&format!("{}/{}", sig9(e.weight), e.best_input));
                let _ = writeln!(out, "  {x} -> {} [label=\"{label}\"];", e.succ_state);
            }
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Build the transition graph over the feasible region. Parallel (x, x′)
/// transitions collapse to one edge with the minimal weight; ties pick the
/// smallest input. Touches each admissible (x, u) pair exactly once.
pub fn build_stg(
    assr: &Assr,
    cost: &StageCostSpec,
    region: &FeasibleRegion,
) -> Result<TransitionGraph, ModelError> {
    build_stg_instrumented(assr, cost, region).map(|(g, _)| g)
}

/// `build_stg` plus the number of (state, input) pairs examined, for
/// complexity diagnostics.
pub fn build_stg_instrumented(
    assr: &Assr,
    cost: &StageCostSpec,
    region: &FeasibleRegion,
) -> Result<(TransitionGraph, usize), ModelError> {
    if region.is_empty() {
        return Err(ModelError::Infeasible);
    }
    let n = assr.n();
    let m = assr.m();
    let big_n = assr.big_n();
    let mut pairs = 0usize;
    let mut out_edges = Vec::with_capacity(region.len());
    let mut edge_count = 0usize;
    // (weight, input) per successor; BTreeMap keeps successors ascending.
    let mut best: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (p, &x) in region.states().iter().enumerate() {
        best.clear();
        for &u in region.inputs_at(p) {
            pairs += 1;
            let succ = assr.next(x, u);
            let g = stage_cost(cost, x, u, n, m)?;
            match best.get_mut(&succ) {
                // Strict improvement only: ascending input order makes the
                // retained input the smallest minimizer.
                Some(entry) if g < entry.0 => *entry = (g, u),
                Some(_) => {}
                None => {
                    best.insert(succ, (g, u));
                }
            }
        }
        let edges: Vec<Edge> = best
            .iter()
            .map(|(&succ, &(weight, best_input))| Edge {
                succ_state: succ,
                // Successors stay inside the region by construction.
                succ_pos: region.position(succ).unwrap(),
                weight,
                best_input,
            })
            .collect();
        edge_count += edges.len();
        out_edges.push(edges);
    }
    let mut pos = vec![None; big_n + 1];
    for (p, &x) in region.states().iter().enumerate() {
        pos[x] = Some(p as u32);
    }
    Ok((
        TransitionGraph { vertices: region.states().to_vec(), pos, out_edges, edge_count },
        pairs,
    ))
}

/// U_{xx′}: every admissible input at x whose successor is x′, ascending.
/// Empty exactly when (x, x′) is not an edge.
pub fn admissible_inputs(
    assr: &Assr,
    region: &FeasibleRegion,
    x: usize,
    x_prime: usize,
) -> Vec<usize> {
    match region.inputs_for_state(x) {
        Some(inputs) => inputs.iter().copied().filter(|&u| assr.next(x, u) == x_prime).collect(),
        None => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{feasible_region, ConstraintSpec};

    /// n=1, m=1 network with L = δ_2[1,1,1,2] and g(x,u) = bit(u):
    /// the worked example used across the graph tests.
    fn tiny() -> (Assr, StageCostSpec, FeasibleRegion) {
        let assr = Assr::from_table(1, 1, vec![1, 1, 1, 2]).unwrap();
        let cost = StageCostSpec::Linear { a: vec![0.0], b: vec![1.0] };
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        (assr, cost, region)
    }

    #[test]
    fn collapses_parallel_edges_to_minimum() {
        let (assr, cost, region) = tiny();
        let g = build_stg(&assr, &cost, &region).unwrap();
        assert_eq!(g.vertices(), &[1, 2]);
        // State 1 reaches only 1, via u ∈ {1, 2} with costs {0, 1}.
        let e1 = g.edges_at(0);
        assert_eq!(e1.len(), 1);
        assert_eq!(e1[0].succ_state, 1);
        assert_eq!(e1[0].weight, 0.0);
        assert_eq!(e1[0].best_input, 1);
        // State 2 reaches 1 (u=1, cost 0) and 2 (u=2, cost 1).
        let e2 = g.edges_at(1);
        assert_eq!(e2.len(), 2);
        assert_eq!((e2[0].succ_state, e2[0].weight, e2[0].best_input), (1, 0.0, 1));
        assert_eq!((e2[1].succ_state, e2[1].weight, e2[1].best_input), (2, 1.0, 2));
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn tie_break_prefers_smallest_input() {
        // Both inputs reach state 1 from everywhere at equal cost 0.
        let assr = Assr::from_table(1, 1, vec![1, 1, 1, 1]).unwrap();
        let cost = StageCostSpec::Linear { a: vec![0.0], b: vec![0.0] };
        let region = feasible_region(&assr, &ConstraintSpec::unconstrained()).unwrap();
        let g = build_stg(&assr, &cost, &region).unwrap();
        for p in 0..g.len() {
            assert_eq!(g.edges_at(p).len(), 1);
            assert_eq!(g.edges_at(p)[0].best_input, 1);
        }
    }

    #[test]
    fn singleton_input_sets_give_one_edge_each() {
        let assr = Assr::from_table(2, 1, vec![2, 3, 4, 1, 1, 2, 3, 4]).unwrap();
        let cons = ConstraintSpec::new(
            None,
            (1..=4).map(|x| (x, [2usize].into())).collect(),
        );
        let region = feasible_region(&assr, &cons).unwrap();
        let cost = StageCostSpec::Linear { a: vec![0.0, 0.0], b: vec![1.0] };
        let g = build_stg(&assr, &cost, &region).unwrap();
        for p in 0..g.len() {
            assert_eq!(g.edges_at(p).len(), 1);
            assert_eq!(g.edges_at(p)[0].best_input, 2);
        }
    }

    #[test]
    fn admissible_inputs_enumerates_u_sets() {
        let (assr, _, region) = tiny();
        assert_eq!(admissible_inputs(&assr, &region, 1, 1), vec![1, 2]);
        assert_eq!(admissible_inputs(&assr, &region, 1, 2), Vec::<usize>::new());
        assert_eq!(admissible_inputs(&assr, &region, 2, 1), vec![1]);
        assert_eq!(admissible_inputs(&assr, &region, 2, 2), vec![2]);
        // Not a vertex (out of region) → empty.
        assert_eq!(admissible_inputs(&assr, &region, 3, 1), Vec::<usize>::new());
    }

    #[test]
    fn touches_each_pair_exactly_once() {
        let (assr, cost, region) = tiny();
        let (_, pairs) = build_stg_instrumented(&assr, &cost, &region).unwrap();
        let expected: usize = (0..region.len()).map(|p| region.inputs_at(p).len()).sum();
        assert_eq!(pairs, expected);
        assert_eq!(pairs, 4);
    }

    #[test]
    fn successors_stay_inside_the_region() {
        let assr = Assr::from_table(2, 1, vec![2, 4, 1, 4, 1, 2, 3, 3]).unwrap();
        let cons = ConstraintSpec::new(Some([1, 2, 4].into()), BTreeMap::new());
        let region = feasible_region(&assr, &cons).unwrap();
        let cost = StageCostSpec::Linear { a: vec![1.0, 2.0], b: vec![4.0] };
        let g = build_stg(&assr, &cost, &region).unwrap();
        for p in 0..g.len() {
            assert!(!g.edges_at(p).is_empty());
            for e in g.edges_at(p) {
                assert!(g.position(e.succ_state).is_some());
                assert_eq!(g.position(e.succ_state).unwrap(), e.succ_pos);
            }
        }
    }

    #[test]
    fn dot_export_shape() {
        let (assr, cost, region) = tiny();
        let g = build_stg(&assr, &cost, &region).unwrap();
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph stg {"));
        assert!(dot.contains("  1;\n"));
        assert!(dot.contains("  2 -> 1 [label=\"0/1\"];"));
        assert!(dot.contains("  2 -> 2 [label=\"1/2\"];"));
        assert!(dot.ends_with("}\n"));
    }
}
