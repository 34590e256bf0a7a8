//! Tabular backward induction over a finite state grid.
//!
//! Every `(k, α, x)` cell builds the cost-to-go matrix from the values at
//! `k+1` and solves it as a zero-sum game. The recursion is exact when the
//! dynamics map grid points onto grid points; [`SnapMode::Nearest`] offers
//! an approximate discretization for dynamics that do not.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, Topology};
use crate::matrix_game::{solve_zero_sum, GameMatrix, MatrixGameSolution};
use crate::policy::GridPolicyTable;
use crate::scalar_lq::ScalarLQSpec;

/// How off-grid successor states are handled when building dynamics tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapMode {
    /// Successors must coincide with a grid point (relative tolerance 1e-12).
    Exact,
    /// Successors snap to the nearest grid point in Euclidean distance.
    /// Approximate.
    Nearest,
}

/// Ordered list of fixed-dimension state points.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    points: Vec<Vec<f64>>,
}

impl StateGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| Error::Spec("state grid is empty".into()))?;
        if dim == 0 {
            return Err(Error::Spec("state points need at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Spec(format!("grid point {i} has dimension {} (expected {dim})", p.len())));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Spec(format!("grid point {i} is not finite")));
            }
        }
        Ok(Self { points })
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Grid index of `point` under `mode`.
    pub fn locate(&self, point: &[f64], mode: SnapMode) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::Spec(format!(
                "state of dimension {} does not match grid dimension {}",
                point.len(),
                self.dim()
            )));
        }
        let dist2 = |p: &[f64]| p.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let (best, d2) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("grid is non-empty");
        match mode {
            SnapMode::Nearest => Ok(best),
            SnapMode::Exact => {
                let scale = 1.0 + point.iter().map(|v| v * v).sum::<f64>();
                if d2 <= 1e-24 * scale {
                    Ok(best)
                } else {
                    Err(Error::Spec(format!("state {point:?} is not on the grid")))
                }
            }
        }
    }
}

/// Game with arbitrary node dynamics tabulated on a grid.
///
/// Tables are `[k-1][node][x]`; `stage_costs` spans `k = 1..=L+1`, the rest
/// `k = 1..=L`. `dynamics[k-1][node][x]` is the grid index reached from `x`
/// when the chain lands on `node` after step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralGameSpec {
    topology: Topology,
    horizon: usize,
    grid: StateGrid,
    dynamics: Vec<Vec<Vec<usize>>>,
    stage_costs: Vec<Vec<Vec<f64>>>,
    defender_costs: Vec<Vec<Vec<f64>>>,
    adversary_costs: Vec<Vec<Vec<f64>>>,
}

impl GeneralGameSpec {
    pub fn new(
        topology: impl Into<Topology>,
        horizon: usize,
        grid: StateGrid,
        dynamics: Vec<Vec<Vec<usize>>>,
        stage_costs: Vec<Vec<Vec<f64>>>,
        defender_costs: Vec<Vec<Vec<f64>>>,
        adversary_costs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let topology = topology.into();
        if horizon == 0 {
            return Err(Error::Spec("horizon must be at least 1".into()));
        }
        let nodes = topology.node_count();
        let len = grid.len();

        let shape = |name: &str, steps: usize, t_len: usize, node_lens: &dyn Fn(usize, usize) -> usize| -> Result<()> {
            if t_len != steps {
                return Err(Error::Spec(format!("{name} needs {steps} time steps, got {t_len}")));
            }
            for t in 0..steps {
                for node in 0..nodes {
                    let got = node_lens(t, node);
                    if got != len {
                        return Err(Error::Spec(format!(
                            "{name}[k={}][{node}] needs {len} grid entries, got {got}",
                            t + 1
                        )));
                    }
                }
            }
            Ok(())
        };
        let node_count_ok = |name: &str, rows: &[usize]| -> Result<()> {
            match rows.iter().position(|&n| n != nodes) {
                Some(t) => Err(Error::Spec(format!("{name}[k={}] needs {nodes} node entries", t + 1))),
                None => Ok(()),
            }
        };

        node_count_ok("dynamics", &dynamics.iter().map(Vec::len).collect::<Vec<_>>())?;
        node_count_ok("stage_costs", &stage_costs.iter().map(Vec::len).collect::<Vec<_>>())?;
        node_count_ok("defender_costs", &defender_costs.iter().map(Vec::len).collect::<Vec<_>>())?;
        node_count_ok("adversary_costs", &adversary_costs.iter().map(Vec::len).collect::<Vec<_>>())?;
        shape("dynamics", horizon, dynamics.len(), &|t, n| dynamics[t][n].len())?;
        shape("stage_costs", horizon + 1, stage_costs.len(), &|t, n| stage_costs[t][n].len())?;
        shape("defender_costs", horizon, defender_costs.len(), &|t, n| defender_costs[t][n].len())?;
        shape("adversary_costs", horizon, adversary_costs.len(), &|t, n| adversary_costs[t][n].len())?;

        for (t, per_node) in dynamics.iter().enumerate() {
            for (node, map) in per_node.iter().enumerate() {
                if let Some(&bad) = map.iter().find(|&&i| i >= len) {
                    return Err(Error::Spec(format!(
                        "dynamics[k={}][{node}] maps to grid index {bad} outside 0..{len}",
                        t + 1
                    )));
                }
            }
        }
        for (name, table) in [
            ("stage_costs", &stage_costs),
            ("defender_costs", &defender_costs),
            ("adversary_costs", &adversary_costs),
        ] {
            for (t, per_node) in table.iter().enumerate() {
                for (node, vals) in per_node.iter().enumerate() {
                    if let Some((x, v)) = vals.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
                        return Err(Error::Spec(format!(
                            "{name}[k={}][{node}][{x}] = {v} violates the non-negative cost assumption",
                            t + 1
                        )));
                    }
                }
            }
        }

        Ok(Self {
            topology,
            horizon,
            grid,
            dynamics,
            stage_costs,
            defender_costs,
            adversary_costs,
        })
    }

    /// Tabulates a scalar-LQ game on a scalar grid: costs become
    /// `coefficient · x²` and `x ↦ f·x` is located on the grid under `snap`.
    pub fn from_scalar_lq(spec: &ScalarLQSpec, grid: &[f64], snap: SnapMode) -> Result<Self> {
        let grid = StateGrid::scalar(grid)?;
        let horizon = spec.horizon();
        let nodes = spec.node_count();
        let xs: Vec<f64> = grid.points().iter().map(|p| p[0]).collect();
        let quad = |table: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
            table
                .iter()
                .map(|row| row.iter().map(|&c| xs.iter().map(|x| c * x * x).collect()).collect())
                .collect()
        };
        let mut dynamics = Vec::with_capacity(horizon);
        for k in 1..=horizon {
            let mut per_node = Vec::with_capacity(nodes);
            for node in 0..nodes {
                let f = spec.f(k, node);
                per_node.push(
                    xs.iter()
                        .map(|x| grid.locate(&[f * x], snap))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            dynamics.push(per_node);
        }
        let c = spec.coefficients();
        Self::new(
            spec.topology().clone(),
            horizon,
            grid.clone(),
            dynamics,
            quad(&c.g),
            quad(&c.d),
            quad(&c.a),
        )
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn stage_cost(&self, k: usize, node: NodeId, x: usize) -> f64 {
        self.stage_costs[k - 1][node][x]
    }

    pub fn defender_cost(&self, k: usize, node: NodeId, x: usize) -> f64 {
        self.defender_costs[k - 1][node][x]
    }

    pub fn adversary_cost(&self, k: usize, node: NodeId, x: usize) -> f64 {
        self.adversary_costs[k - 1][node][x]
    }

    /// Grid index after step `k` when the chain lands on `next`.
    pub fn successor(&self, k: usize, next: NodeId, x: usize) -> Result<usize> {
        self.dynamics
            .get(k.wrapping_sub(1))
            .and_then(|t| t.get(next))
            .and_then(|m| m.get(x))
            .copied()
            .ok_or_else(|| Error::Spec(format!("no grid mapping for k={k}, node={next}, x={x}")))
    }

    /// Returns a copy with every stage cost transformed by `f(k, node, x, g)`.
    pub fn map_stage_costs(&self, f: impl Fn(usize, NodeId, usize, f64) -> f64) -> Result<Self> {
        let stage_costs = self
            .stage_costs
            .iter()
            .enumerate()
            .map(|(t, per_node)| {
                per_node
                    .iter()
                    .enumerate()
                    .map(|(node, vals)| vals.iter().enumerate().map(|(x, &g)| f(t + 1, node, x, g)).collect())
                    .collect()
            })
            .collect();
        Self::new(
            self.topology.clone(),
            self.horizon,
            self.grid.clone(),
            self.dynamics.clone(),
            stage_costs,
            self.defender_costs.clone(),
            self.adversary_costs.clone(),
        )
    }
}

/// `Ξ` at `(k, node, x)` from the values at `k+1` (`next_values[node][x]`).
pub fn build_cost_to_go(
    spec: &GeneralGameSpec,
    k: usize,
    node: NodeId,
    x: usize,
    next_values: &[Vec<f64>],
) -> Result<GameMatrix> {
    if !(1..=spec.horizon).contains(&k) {
        return Err(Error::TimeOutOfRange {
            k,
            lo: 1,
            hi: spec.horizon,
        });
    }
    let topo = spec.topology();
    topo.check_node(node)?;
    if x >= spec.grid.len() {
        return Err(Error::GridIndexOutOfRange {
            index: x,
            len: spec.grid.len(),
        });
    }
    let rows = topo.defender_actions(node);
    let cols = topo.adversary_actions(node);
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for &u in rows {
        let defender_cost = topo.cost_node(node, u).map_or(0.0, |c| spec.defender_cost(k, c, x));
        for &w in cols {
            let adversary_cost = topo.cost_node(node, w).map_or(0.0, |c| spec.adversary_cost(k, c, x));
            let next = topo.transition(node, u, w)?;
            let x_next = spec.successor(k, next, x)?;
            let v = next_values
                .get(next)
                .and_then(|row| row.get(x_next))
                .copied()
                .ok_or_else(|| Error::Precondition(format!("missing next value for node {next}, x={x_next}")))?;
            entries.push(v + defender_cost - adversary_cost);
        }
    }
    GameMatrix::new(rows.len(), cols.len(), entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralValueTable {
    horizon: usize,
    /// `values[k-1][node][x]` for `k = 1..=L+1`.
    values: Vec<Vec<Vec<f64>>>,
    defender: GridPolicyTable,
    adversary: GridPolicyTable,
}

impl GeneralValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn value_at(&self, k: usize, node: NodeId, x: usize) -> Result<f64> {
        if k == 0 || k > self.horizon + 1 {
            return Err(Error::TimeOutOfRange {
                k,
                lo: 1,
                hi: self.horizon + 1,
            });
        }
        let per_node = &self.values[k - 1];
        let row = per_node.get(node).ok_or(Error::NodeOutOfRange {
            node,
            node_count: per_node.len(),
        })?;
        row.get(x).copied().ok_or(Error::GridIndexOutOfRange { index: x, len: row.len() })
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    pub fn defender_policy(&self) -> &GridPolicyTable {
        &self.defender
    }

    pub fn adversary_policy(&self) -> &GridPolicyTable {
        &self.adversary
    }
}

/// Backward induction from `V_{L+1} = g_{L+1}`. Cells within a time step
/// are solved in parallel.
pub fn solve_general(spec: &GeneralGameSpec) -> Result<GeneralValueTable> {
    let horizon = spec.horizon;
    let nodes = spec.node_count();
    let len = spec.grid.len();

    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = spec.stage_costs[horizon].clone();
    let mut defender = vec![Vec::new(); horizon];
    let mut adversary = vec![Vec::new(); horizon];

    for k in (1..=horizon).rev() {
        let next = &values[k];
        let cells: Vec<(f64, MatrixGameSolution)> = (0..nodes * len)
            .into_par_iter()
            .map(|cell| {
                let (node, x) = (cell / len, cell % len);
                let matrix = build_cost_to_go(spec, k, node, x, next)?;
                let sol = solve_zero_sum(&matrix)
                    .map_err(|e| e.in_context(|| format!("k={k}, node={node}, x={x}")))?;
                let v = spec.stage_cost(k, node, x) + matrix.bilinear(&sol.row_strategy, &sol.col_strategy);
                Ok((v, sol))
            })
            .collect::<Result<_>>()?;

        let mut step_values = vec![Vec::with_capacity(len); nodes];
        let mut step_def = vec![Vec::with_capacity(len); nodes];
        let mut step_adv = vec![Vec::with_capacity(len); nodes];
        for (cell, (v, sol)) in cells.into_iter().enumerate() {
            let node = cell / len;
            step_values[node].push(v);
            step_def[node].push(sol.row_strategy);
            step_adv[node].push(sol.col_strategy);
        }
        values[k - 1] = step_values;
        defender[k - 1] = step_def;
        adversary[k - 1] = step_adv;
    }

    Ok(GeneralValueTable {
        horizon,
        values,
        defender: GridPolicyTable::new(defender),
        adversary: GridPolicyTable::new(adversary),
    })
}
