//! Scalar linear dynamics with quadratic costs.
//!
//! With `x_{k+1} = f_k^{α_{k+1}} x_k` and every cost proportional to `x²`,
//! the saddle-point value is `V_k^α(x) = p_k^α x²` and the equilibrium
//! policies do not depend on `x`. The recursion runs on the coefficients
//! alone: each `(k, α)` solves one scaled cost-to-go matrix game.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, Topology};
use crate::matrix_game::{solve_zero_sum, GameMatrix, MatrixGameSolution};
use crate::policy::PolicyTable;

/// Time-indexed per-node coefficient arrays. `f`, `d`, `a` cover
/// `k = 1..=L`; `g` covers `k = 1..=L+1`. Stored as `[k-1][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarCoefficients {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl ScalarCoefficients {
    /// Broadcasts time-invariant per-node values over the horizon.
    pub fn constant(horizon: usize, f: &[f64], g: &[f64], d: &[f64], a: &[f64]) -> Self {
        Self {
            f: vec![f.to_vec(); horizon],
            g: vec![g.to_vec(); horizon + 1],
            d: vec![d.to_vec(); horizon],
            a: vec![a.to_vec(); horizon],
        }
    }

    pub(crate) fn validate(&self, horizon: usize, nodes: usize) -> Result<()> {
        let check = |name: &str, table: &[Vec<f64>], steps: usize, nonneg: bool| -> Result<()> {
            if table.len() != steps {
                return Err(Error::Spec(format!("{name} needs {steps} time steps, got {}", table.len())));
            }
            for (t, row) in table.iter().enumerate() {
                if row.len() != nodes {
                    return Err(Error::Spec(format!(
                        "{name}[k={}] needs {nodes} node entries, got {}",
                        t + 1,
                        row.len()
                    )));
                }
                for (node, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::Spec(format!("{name}[k={}][{node}] is not finite", t + 1)));
                    }
                    if nonneg && v < 0.0 {
                        return Err(Error::Spec(format!(
                            "{name}[k={}][{node}] = {v} violates the non-negative cost assumption",
                            t + 1
                        )));
                    }
                }
            }
            Ok(())
        };
        check("f", &self.f, horizon, false)?;
        check("g", &self.g, horizon + 1, true)?;
        check("d", &self.d, horizon, true)?;
        check("a", &self.a, horizon, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarLQSpec {
    topology: Topology,
    horizon: usize,
    coefficients: ScalarCoefficients,
}

impl ScalarLQSpec {
    pub fn new(topology: impl Into<Topology>, horizon: usize, coefficients: ScalarCoefficients) -> Result<Self> {
        let topology = topology.into();
        if horizon == 0 {
            return Err(Error::Spec("horizon must be at least 1".into()));
        }
        coefficients.validate(horizon, topology.node_count())?;
        Ok(Self {
            topology,
            horizon,
            coefficients,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn coefficients(&self) -> &ScalarCoefficients {
        &self.coefficients
    }

    /// Dynamics coefficient applied when the chain lands on `node` after step `k`.
    pub fn f(&self, k: usize, node: NodeId) -> f64 {
        self.coefficients.f[k - 1][node]
    }

    pub fn g(&self, k: usize, node: NodeId) -> f64 {
        self.coefficients.g[k - 1][node]
    }

    pub fn d(&self, k: usize, node: NodeId) -> f64 {
        self.coefficients.d[k - 1][node]
    }

    pub fn a(&self, k: usize, node: NodeId) -> f64 {
        self.coefficients.a[k - 1][node]
    }

    pub(crate) fn check_step(&self, k: usize) -> Result<()> {
        if (1..=self.horizon).contains(&k) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                k,
                lo: 1,
                hi: self.horizon,
            })
        }
    }
}

/// `Ξ̂` at `(k, node)`: entry `(u, w)` is
/// `(f_k^{α'})² p_{k+1}^{α'} + d-cost(u) − a-cost(w)` with `α'` the node
/// reached under `(u, w)`.
pub fn build_scaled_cost_to_go(spec: &ScalarLQSpec, k: usize, node: NodeId, p_next: &[f64]) -> Result<GameMatrix> {
    spec.check_step(k)?;
    let topo = spec.topology();
    topo.check_node(node)?;
    if p_next.len() != topo.node_count() {
        return Err(Error::Precondition(format!(
            "p_next has {} entries for {} nodes",
            p_next.len(),
            topo.node_count()
        )));
    }
    let rows = topo.defender_actions(node);
    let cols = topo.adversary_actions(node);
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for &u in rows {
        let defender_cost = topo.cost_node(node, u).map_or(0.0, |c| spec.d(k, c));
        for &w in cols {
            let adversary_cost = topo.cost_node(node, w).map_or(0.0, |c| spec.a(k, c));
            let next = topo.transition(node, u, w)?;
            let f = spec.f(k, next);
            entries.push(f * f * p_next[next] + defender_cost - adversary_cost);
        }
    }
    GameMatrix::new(rows.len(), cols.len(), entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarValueTable {
    horizon: usize,
    /// `p[k-1][node]` for `k = 1..=L+1`.
    coefficients: Vec<Vec<f64>>,
    defender: PolicyTable,
    adversary: PolicyTable,
}

impl ScalarValueTable {
    pub(crate) fn from_parts(
        horizon: usize,
        coefficients: Vec<Vec<f64>>,
        defender: PolicyTable,
        adversary: PolicyTable,
    ) -> Self {
        Self {
            horizon,
            coefficients,
            defender,
            adversary,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn coefficient(&self, k: usize, node: NodeId) -> Result<f64> {
        if k == 0 || k > self.horizon + 1 {
            return Err(Error::TimeOutOfRange {
                k,
                lo: 1,
                hi: self.horizon + 1,
            });
        }
        let row = &self.coefficients[k - 1];
        row.get(node).copied().ok_or(Error::NodeOutOfRange {
            node,
            node_count: row.len(),
        })
    }

    /// `V_k^α(x) = p_k^α x²`.
    pub fn evaluate_value(&self, k: usize, node: NodeId, x: f64) -> Result<f64> {
        Ok(self.coefficient(k, node)? * x * x)
    }

    /// All coefficients, `[k-1][node]`.
    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn defender_policy(&self) -> &PolicyTable {
        &self.defender
    }

    pub fn adversary_policy(&self) -> &PolicyTable {
        &self.adversary
    }

    /// Cells where a coefficient came out negative, which non-negative costs
    /// should never produce.
    pub fn negative_coefficients(&self) -> Vec<(usize, NodeId)> {
        self.coefficients
            .iter()
            .enumerate()
            .flat_map(|(t, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p < 0.0)
                    .map(move |(node, _)| (t + 1, node))
            })
            .collect()
    }
}

/// Equilibrium at one `(k, node)` of the coefficient recursion.
pub(crate) fn solve_cell(spec: &ScalarLQSpec, k: usize, node: NodeId, p_next: &[f64]) -> Result<(GameMatrix, MatrixGameSolution)> {
    let matrix = build_scaled_cost_to_go(spec, k, node, p_next)?;
    let sol = solve_zero_sum(&matrix).map_err(|e| e.in_context(|| format!("k={k}, node={node}")))?;
    Ok((matrix, sol))
}

/// Backward coefficient recursion from `p_{L+1} = g_{L+1}`.
pub fn solve_scalar_lq(spec: &ScalarLQSpec) -> Result<ScalarValueTable> {
    let horizon = spec.horizon();
    let nodes = spec.node_count();
    let mut coefficients = vec![Vec::new(); horizon + 1];
    coefficients[horizon] = spec.coefficients().g[horizon].clone();
    let mut defender = vec![Vec::with_capacity(nodes); horizon];
    let mut adversary = vec![Vec::with_capacity(nodes); horizon];

    for k in (1..=horizon).rev() {
        let mut row = Vec::with_capacity(nodes);
        for node in 0..nodes {
            let (matrix, sol) = solve_cell(spec, k, node, &coefficients[k])?;
            let p = spec.g(k, node) + matrix.bilinear(&sol.row_strategy, &sol.col_strategy);
            if p < 0.0 {
                log::warn!("negative value coefficient {p} at k={k}, node={node}");
            }
            row.push(p);
            defender[k - 1].push(sol.row_strategy);
            adversary[k - 1].push(sol.col_strategy);
        }
        coefficients[k - 1] = row;
    }

    Ok(ScalarValueTable::from_parts(
        horizon,
        coefficients,
        PolicyTable::new(defender),
        PolicyTable::new(adversary),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DualDeterTopology, GameGraph};
    use crate::matrix_game::verify_solution;

    fn two_node_chain() -> GameGraph {
        GameGraph::new(2, vec![(0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn constant_matrix_when_costs_vanish() {
        let g = GameGraph::new(3, vec![(0, 1), (0, 2)]).unwrap();
        let spec = ScalarLQSpec::new(g, 1, ScalarCoefficients::constant(1, &[1.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 3])).unwrap();
        let m = build_scaled_cost_to_go(&spec, 1, 0, &[2.5, 2.5, 2.5]).unwrap();
        assert_eq!(m.rows(), 3);
        assert!(m.to_rows().iter().flatten().all(|&v| v == 2.5));
    }

    #[test]
    fn single_node_matrix_is_scaled_value() {
        let g = GameGraph::new(1, vec![]).unwrap();
        let spec = ScalarLQSpec::new(g, 1, ScalarCoefficients::constant(1, &[-3.0], &[0.0], &[1.0], &[1.0])).unwrap();
        let m = build_scaled_cost_to_go(&spec, 1, 0, &[2.0]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![18.0]]);
    }

    #[test]
    fn dual_deter_start_node_matrix() {
        // Matrix (13) layout at node 0 with f=1, p_next=(1,3), d=a=1.
        let topo = DualDeterTopology::new(1).unwrap();
        let spec = ScalarLQSpec::new(topo, 1, ScalarCoefficients::constant(1, &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0])).unwrap();
        let m = build_scaled_cost_to_go(&spec, 1, 0, &[1.0, 3.0]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
    }

    #[test]
    fn graph_two_node_matrix_uses_target_costs() {
        // Node 0 of a 2-node graph: rows (0, 1), cols (0, 1); both picking 1 moves to 1.
        let spec = ScalarLQSpec::new(
            two_node_chain(),
            1,
            ScalarCoefficients::constant(1, &[1.0, 1.0], &[0.0, 0.0], &[0.3, 0.7], &[0.2, 0.9]),
        )
        .unwrap();
        let m = build_scaled_cost_to_go(&spec, 1, 0, &[1.0, 3.0]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 3.0 - 0.9], vec![3.0 + 0.7, 3.0 + 0.7 - 0.9]]);
    }

    #[test]
    fn one_step_single_node() {
        let g = GameGraph::new(1, vec![]).unwrap();
        let spec = ScalarLQSpec::new(g, 1, ScalarCoefficients::constant(1, &[1.0], &[1.0], &[0.0], &[0.0])).unwrap();
        let table = solve_scalar_lq(&spec).unwrap();
        assert_eq!(table.coefficient(1, 0).unwrap(), 2.0);
        assert_eq!(table.coefficient(2, 0).unwrap(), 1.0);
        assert_eq!(table.evaluate_value(1, 0, 3.0).unwrap(), 18.0);
        assert_eq!(table.evaluate_value(1, 0, 0.0).unwrap(), 0.0);
        assert!(table.coefficient(3, 0).is_err());
        assert!(table.coefficient(0, 0).is_err());
        assert!(table.coefficient(1, 1).is_err());
    }

    #[test]
    fn boundary_and_policies_certified() {
        let g = GameGraph::new(3, vec![(0, 1), (1, 0), (1, 2), (2, 0), (0, 2)]).unwrap();
        let mut coef = ScalarCoefficients::constant(6, &[1.1, 0.9, -1.2], &[1.0, 2.0, 0.5], &[0.4, 0.8, 0.3], &[0.6, 0.2, 0.9]);
        coef.g[6] = vec![3.0, 0.25, 1.75];
        let spec = ScalarLQSpec::new(g, 6, coef).unwrap();
        let table = solve_scalar_lq(&spec).unwrap();
        assert_eq!(table.coefficients()[6], vec![3.0, 0.25, 1.75]);
        assert!(table.negative_coefficients().is_empty());
        for k in 1..=6 {
            for node in 0..3 {
                let p_next = &table.coefficients()[k];
                let m = build_scaled_cost_to_go(&spec, k, node, p_next).unwrap();
                let sol = MatrixGameSolution {
                    value: table.coefficient(k, node).unwrap() - spec.g(k, node),
                    row_strategy: table.defender_policy().get(k, node).unwrap().to_vec(),
                    col_strategy: table.adversary_policy().get(k, node).unwrap().to_vec(),
                    kind: crate::matrix_game::SolutionKind::Mixed,
                    duality_gap: 0.0,
                };
                assert!(verify_solution(&m, &sol, 1e-8).passed);
            }
        }
    }

    #[test]
    fn negating_f_changes_nothing() {
        let g = GameGraph::new(3, vec![(0, 1), (1, 2), (2, 0), (1, 0)]).unwrap();
        let coef = ScalarCoefficients::constant(5, &[1.1, 0.9, 1.3], &[1.0, 2.0, 0.5], &[0.4, 0.8, 0.3], &[0.6, 0.2, 0.9]);
        let mut flipped = coef.clone();
        for row in &mut flipped.f {
            row[1] = -row[1];
        }
        let a = solve_scalar_lq(&ScalarLQSpec::new(g.clone(), 5, coef).unwrap()).unwrap();
        let b = solve_scalar_lq(&ScalarLQSpec::new(g, 5, flipped).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_negative_costs_and_bad_shapes() {
        let g = GameGraph::new(2, vec![(0, 1)]).unwrap();
        let bad = ScalarCoefficients::constant(2, &[1.0, 1.0], &[1.0, -0.1], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(ScalarLQSpec::new(g.clone(), 2, bad), Err(Error::Spec(_))));
        let short = ScalarCoefficients::constant(1, &[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(ScalarLQSpec::new(g.clone(), 2, short).is_err());
        let zero = ScalarCoefficients::constant(0, &[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(ScalarLQSpec::new(g, 0, zero).is_err());
    }
}
