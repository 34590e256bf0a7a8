//! Closed-form equilibria on the birth-death chain.
//!
//! Each `(k, α)` cell evaluates the threshold formulas for its node class
//! (start, interior, end) and checks them against the LP solution of the
//! same 2×2 matrix. The LP is authoritative: when the closed form gives a
//! different value, strategies that fail certification, or a threshold
//! comparison sits on a tie, the LP result is returned and the cell's
//! diagnostic records why.
//!
//! The closed forms here are worked out from the stage matrices below. An
//! older reference set of interior and end-node formulas is also evaluated
//! and reported per cell, since several of its branches are in error.
//!
//! With `P, R, Q` the `f²p` terms of `α, α̲, ᾱ` at `k+1`, the interior
//! matrix is `[[P, Q − a], [R + d, P + d − a]]`; the start node uses
//! `[[A, B − a], [A + d, A + d − a]]` (nodes 0, 1) and the end node
//! `[[C, C − a], [E + d, C + d − a]]` (nodes N, N−1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DualDeterTopology, NodeId, Topology};
use crate::matrix_game::{verify_solution, MatrixGameSolution, SolutionKind};
use crate::policy::PolicyTable;
use crate::scalar_lq::{solve_cell, ScalarCoefficients, ScalarLQSpec, ScalarValueTable};

/// Value disagreement above which the LP overrides the closed form.
pub const AGREEMENT_TOL: f64 = 1e-8;
/// Threshold comparisons closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DualDeterSpec {
    chain: DualDeterTopology,
    lq: ScalarLQSpec,
}

impl DualDeterSpec {
    pub fn new(chain: DualDeterTopology, horizon: usize, coefficients: ScalarCoefficients) -> Result<Self> {
        let lq = ScalarLQSpec::new(chain.clone(), horizon, coefficients)?;
        Ok(Self { chain, lq })
    }

    pub fn chain(&self) -> &DualDeterTopology {
        &self.chain
    }

    pub fn chain_length(&self) -> usize {
        self.chain.chain_length()
    }

    pub fn horizon(&self) -> usize {
        self.lq.horizon()
    }

    /// The same game as a scalar-LQ spec over the dual-deter action sets,
    /// solved by the generic LP recursion.
    pub fn to_scalar_lq(&self) -> ScalarLQSpec {
        self.lq.clone()
    }

    pub fn as_scalar_lq(&self) -> &ScalarLQSpec {
        &self.lq
    }
}

/// Threshold differences of `f²p` terms at `k+1`, seen from one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node_class", rename_all = "snake_case")]
pub enum ThresholdQuantities {
    /// `p̂ = (f¹)²p¹ − (f⁰)²p⁰`.
    Start { p_hat: f64 },
    /// `p̃ = (f^α)²p^α − (f^α̲)²p^α̲`, `p̌ = (f^α)²p^α − (f^ᾱ)²p^ᾱ`.
    Interior { p_tilde: f64, p_check: f64 },
    /// `p̄ = (f^N)²p^N − (f^{N−1})²p^{N−1}`.
    End { p_bar: f64 },
}

impl ThresholdQuantities {
    pub fn compute(spec: &DualDeterSpec, k: usize, node: NodeId, p_next: &[f64]) -> Result<Self> {
        spec.lq.check_step(k)?;
        let chain = &spec.chain;
        let n = chain.chain_length();
        if node > n {
            return Err(Error::NodeOutOfRange {
                node,
                node_count: n + 1,
            });
        }
        if p_next.len() != n + 1 {
            return Err(Error::Precondition(format!("p_next has {} entries for {} nodes", p_next.len(), n + 1)));
        }
        let w = |m: NodeId| {
            let f = spec.lq.f(k, m);
            f * f * p_next[m]
        };
        Ok(if node == 0 {
            ThresholdQuantities::Start { p_hat: w(1) - w(0) }
        } else if node == n {
            ThresholdQuantities::End { p_bar: w(n) - w(n - 1) }
        } else {
            ThresholdQuantities::Interior {
                p_tilde: w(node) - w(chain.down_target(node)),
                p_check: w(node) - w(chain.up_target(node)),
            }
        })
    }
}

/// Which equilibrium branch the closed form selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Idle,
    DefenderTakeover,
    AdversaryTakeover,
    BothTakeover,
    Mixed,
}

/// Where a cell's returned value and policies came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Closed form agreed with the LP and its strategies certified.
    ClosedForm,
    /// Closed-form value differed from the LP value.
    ValueMismatch,
    /// Values agreed but the closed-form strategies failed certification.
    StrategyMismatch,
    /// A threshold comparison was a tie.
    Tie,
    /// A closed-form denominator vanished.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostic {
    pub k: usize,
    pub node: NodeId,
    pub thresholds: ThresholdQuantities,
    pub branch: Branch,
    /// Closed-form `Ξ̂` value, absent when the formula could not be applied.
    pub closed_form_value: Option<f64>,
    pub lp_value: f64,
    pub agreed: bool,
    pub resolution: Resolution,
    pub reference: ReferenceCheck,
}

/// The reference value formula for the cell, checked against the LP.
/// Several of its interior and end-node branches are in error, so it is
/// reported but never used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub branch: Branch,
    pub value: Option<f64>,
    pub agrees: bool,
}

/// Result of one node solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// `p_k^α`.
    pub coefficient: f64,
    pub defender: Vec<f64>,
    pub adversary: Vec<f64>,
    pub diagnostic: CellDiagnostic,
}

struct ClosedForm {
    branch: Branch,
    value: Option<f64>,
    y: Option<[f64; 2]>,
    z: Option<[f64; 2]>,
    tie: bool,
}

/// Threshold comparisons that remember whether any of them was a tie.
#[derive(Default)]
struct Comparisons {
    tie: bool,
}

impl Comparisons {
    fn gt(&mut self, x: f64, t: f64) -> bool {
        if (x - t).abs() <= TIE_TOL * (1.0 + x.abs().max(t.abs())) {
            self.tie = true;
        }
        x > t
    }

    fn lt(&mut self, x: f64, t: f64) -> bool {
        self.gt(t, x)
    }
}

fn start_closed_form(p_hat: f64, big_a: f64, big_b: f64, d: f64, a: f64) -> ClosedForm {
    let mut c = Comparisons::default();
    let above_a = c.gt(p_hat, a);
    let above_d = c.gt(p_hat, d);
    let (branch, value, y, z) = if above_a && above_d {
        (
            Branch::Mixed,
            big_a + d - a * d / p_hat,
            [a / p_hat, 1.0 - a / p_hat],
            [1.0 - d / p_hat, d / p_hat],
        )
    } else if above_a {
        (Branch::AdversaryTakeover, big_b - a, [1.0, 0.0], [0.0, 1.0])
    } else {
        (Branch::Idle, big_a, [1.0, 0.0], [1.0, 0.0])
    };
    ClosedForm {
        branch,
        value: Some(value),
        y: Some(y),
        z: Some(z),
        tie: c.tie,
    }
}

/// Equilibrium of `[[P, Q − a], [R + d, P + d − a]]` with `p̃ = P − R`,
/// `p̌ = P − Q`.
fn interior_closed_form(p_tilde: f64, p_check: f64, p: f64, r: f64, q: f64, d: f64, a: f64) -> ClosedForm {
    let mut c = Comparisons::default();
    // Gain of moving up, as seen by the adversary.
    let up = -p_check;
    let sum = p_tilde + p_check;
    let pure = |branch, y, z, value| ClosedForm {
        branch,
        value: Some(value),
        y: Some(y),
        z: Some(z),
        tie: false,
    };
    let mut cf = if !c.gt(p_tilde, d) && !c.gt(up, a) {
        pure(Branch::Idle, [1.0, 0.0], [1.0, 0.0], p)
    } else if !c.lt(p_tilde, d) && !c.gt(p_tilde, a) {
        pure(Branch::DefenderTakeover, [0.0, 1.0], [1.0, 0.0], r + d)
    } else if !c.lt(up, a) && !c.gt(up, d) {
        pure(Branch::AdversaryTakeover, [1.0, 0.0], [0.0, 1.0], q - a)
    } else if !c.lt(p_tilde, a) && !c.lt(up, d) {
        pure(Branch::BothTakeover, [0.0, 1.0], [0.0, 1.0], p + d - a)
    } else if sum.abs() <= TIE_TOL * (1.0 + p.abs()) {
        ClosedForm {
            branch: Branch::Mixed,
            value: None,
            y: None,
            z: None,
            tie: false,
        }
    } else {
        ClosedForm {
            branch: Branch::Mixed,
            value: Some((p * (p + d - a) - (q - a) * (r + d)) / sum),
            y: Some([(p_tilde - a) / sum, (p_check + a) / sum]),
            z: Some([(p_check + d) / sum, (p_tilde - d) / sum]),
            tie: false,
        }
    };
    cf.tie = c.tie;
    cf
}

/// Equilibrium of `[[C, C − a], [E + d, C + d − a]]` with `p̄ = C − E`.
fn end_closed_form(p_bar: f64, big_c: f64, big_e: f64, d: f64, a: f64) -> ClosedForm {
    let mut c = Comparisons::default();
    let (branch, value, y, z) = if !c.gt(p_bar, d) {
        (Branch::Idle, big_c, [1.0, 0.0], [1.0, 0.0])
    } else if !c.gt(p_bar, a) {
        (Branch::DefenderTakeover, big_e + d, [0.0, 1.0], [1.0, 0.0])
    } else {
        (
            Branch::Mixed,
            big_c - a + a * d / p_bar,
            [1.0 - a / p_bar, a / p_bar],
            [d / p_bar, 1.0 - d / p_bar],
        )
    };
    ClosedForm {
        branch,
        value: Some(value),
        y: Some(y),
        z: Some(z),
        tie: c.tie,
    }
}

/// The reference interior value branches, verbatim. Kept only to report
/// where they disagree with the LP.
fn reference_interior_value(p_tilde: f64, p_check: f64, p: f64, r: f64, q: f64, d: f64, a: f64) -> (Branch, Option<f64>) {
    let sum = p_tilde + p_check;
    let low = -p_tilde < a && p_check < a;
    let high = -p_tilde > a && p_check > a;
    if low && p_check < d {
        (Branch::Idle, Some(p))
    } else if low && p_check > d {
        (Branch::DefenderTakeover, Some(r + d))
    } else if high && -p_tilde < d {
        (Branch::AdversaryTakeover, Some(q - a))
    } else if high && -p_tilde > d {
        (Branch::BothTakeover, Some(p - a + d))
    } else if sum.abs() <= TIE_TOL * (1.0 + p.abs()) {
        (Branch::Mixed, None)
    } else {
        (Branch::Mixed, Some((p * p + a * d + p_tilde * d - p_check * a - r * q) / sum))
    }
}

/// The reference end-node value branches, verbatim.
fn reference_end_value(p_bar: f64, big_c: f64, big_e: f64, d: f64, a: f64) -> (Branch, Option<f64>) {
    if p_bar > a && p_bar > d {
        (Branch::Mixed, Some(big_c - d + a * d / p_bar))
    } else if p_bar > a {
        (Branch::DefenderTakeover, Some(big_e + d))
    } else {
        (Branch::Idle, Some(big_c))
    }
}

fn resolve(
    spec: &DualDeterSpec,
    k: usize,
    node: NodeId,
    p_next: &[f64],
    thresholds: ThresholdQuantities,
    cf: ClosedForm,
    reference: (Branch, Option<f64>),
) -> Result<CellSolution> {
    let (matrix, lp) = solve_cell(&spec.lq, k, node, p_next)?;
    let lp_value = matrix.bilinear(&lp.row_strategy, &lp.col_strategy);
    let g = spec.lq.g(k, node);

    let agrees = |v: Option<f64>| v.is_some_and(|v| (v - lp_value).abs() <= AGREEMENT_TOL * lp_value.abs().max(1.0));
    let agreed = agrees(cf.value);
    let reference = ReferenceCheck {
        branch: reference.0,
        value: reference.1,
        agrees: agrees(reference.1),
    };
    if !reference.agrees {
        log::debug!(
            "k={k} node={node}: reference {:?} branch gives {:?}, LP {lp_value}",
            reference.branch,
            reference.value
        );
    }
    let resolution = match (cf.tie, cf.value, cf.y, cf.z) {
        (true, _, _, _) => Resolution::Tie,
        (_, None, _, _) | (_, _, None, _) | (_, _, _, None) => Resolution::Degenerate,
        _ if !agreed => Resolution::ValueMismatch,
        (_, Some(v), Some(y), Some(z)) => {
            let candidate = MatrixGameSolution {
                value: v,
                row_strategy: y.to_vec(),
                col_strategy: z.to_vec(),
                kind: SolutionKind::Mixed,
                duality_gap: 0.0,
            };
            if verify_solution(&matrix, &candidate, AGREEMENT_TOL * (1.0 + v.abs())).passed {
                Resolution::ClosedForm
            } else {
                Resolution::StrategyMismatch
            }
        }
    };

    if resolution != Resolution::ClosedForm {
        log::debug!(
            "k={k} node={node}: {:?} branch resolved by LP ({:?}); closed form {:?}, LP {lp_value}",
            cf.branch,
            resolution,
            cf.value
        );
    }
    let diagnostic = CellDiagnostic {
        k,
        node,
        thresholds,
        branch: cf.branch,
        closed_form_value: cf.value,
        lp_value,
        agreed,
        resolution,
        reference,
    };
    Ok(match (resolution, cf.value, cf.y, cf.z) {
        (Resolution::ClosedForm, Some(v), Some(y), Some(z)) => CellSolution {
            coefficient: g + v,
            defender: y.to_vec(),
            adversary: z.to_vec(),
            diagnostic,
        },
        _ => CellSolution {
            coefficient: g + lp_value,
            defender: lp.row_strategy,
            adversary: lp.col_strategy,
            diagnostic,
        },
    })
}

fn weighted(spec: &DualDeterSpec, k: usize, node: NodeId, p_next: &[f64]) -> f64 {
    let f = spec.lq.f(k, node);
    f * f * p_next[node]
}

/// Node 0.
pub fn solve_start_node(spec: &DualDeterSpec, k: usize, p_next: &[f64]) -> Result<CellSolution> {
    let thresholds = ThresholdQuantities::compute(spec, k, 0, p_next)?;
    let ThresholdQuantities::Start { p_hat } = thresholds else {
        unreachable!("node 0 is the start node")
    };
    let cf = start_closed_form(
        p_hat,
        weighted(spec, k, 0, p_next),
        weighted(spec, k, 1, p_next),
        spec.lq.d(k, 0),
        spec.lq.a(k, 0),
    );
    // The reference start-node formulas are the closed forms above.
    let reference = (cf.branch, cf.value);
    resolve(spec, k, 0, p_next, thresholds, cf, reference)
}

/// Node `1 ≤ α ≤ N−1`.
pub fn solve_interior_node(spec: &DualDeterSpec, k: usize, node: NodeId, p_next: &[f64]) -> Result<CellSolution> {
    if !spec.chain.is_interior(node) {
        return Err(Error::Precondition(format!("node {node} is not an interior node")));
    }
    let thresholds = ThresholdQuantities::compute(spec, k, node, p_next)?;
    let ThresholdQuantities::Interior { p_tilde, p_check } = thresholds else {
        unreachable!("checked interior")
    };
    let p = weighted(spec, k, node, p_next);
    let r = weighted(spec, k, spec.chain.down_target(node), p_next);
    let q = weighted(spec, k, spec.chain.up_target(node), p_next);
    let (d, a) = (spec.lq.d(k, node), spec.lq.a(k, node));
    let cf = interior_closed_form(p_tilde, p_check, p, r, q, d, a);
    let reference = reference_interior_value(p_tilde, p_check, p, r, q, d, a);
    resolve(spec, k, node, p_next, thresholds, cf, reference)
}

/// Node `N`.
pub fn solve_end_node(spec: &DualDeterSpec, k: usize, p_next: &[f64]) -> Result<CellSolution> {
    let n = spec.chain_length();
    let thresholds = ThresholdQuantities::compute(spec, k, n, p_next)?;
    let ThresholdQuantities::End { p_bar } = thresholds else {
        unreachable!("node N is the end node")
    };
    let big_c = weighted(spec, k, n, p_next);
    let big_e = weighted(spec, k, n - 1, p_next);
    let (d, a) = (spec.lq.d(k, n), spec.lq.a(k, n));
    let cf = end_closed_form(p_bar, big_c, big_e, d, a);
    let reference = reference_end_value(p_bar, big_c, big_e, d, a);
    resolve(spec, k, n, p_next, thresholds, cf, reference)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualDeterSolution {
    pub table: ScalarValueTable,
    /// One entry per `(k, α)`, ordered by decreasing `k` then node.
    pub diagnostics: Vec<CellDiagnostic>,
}

impl DualDeterSolution {
    /// Cells where the LP overrode the closed form.
    pub fn overridden(&self) -> impl Iterator<Item = &CellDiagnostic> {
        self.diagnostics.iter().filter(|d| d.resolution != Resolution::ClosedForm)
    }
}

/// Backward recursion from `p_{L+1} = g_{L+1}`.
pub fn solve_dual_deter(spec: &DualDeterSpec) -> Result<DualDeterSolution> {
    let horizon = spec.horizon();
    let n = spec.chain_length();
    let mut coefficients = vec![Vec::new(); horizon + 1];
    coefficients[horizon] = spec.lq.coefficients().g[horizon].clone();
    let mut defender = vec![Vec::with_capacity(n + 1); horizon];
    let mut adversary = vec![Vec::with_capacity(n + 1); horizon];
    let mut diagnostics = Vec::with_capacity(horizon * (n + 1));

    for k in (1..=horizon).rev() {
        let p_next = &coefficients[k];
        let mut row = Vec::with_capacity(n + 1);
        for node in 0..=n {
            let cell = if node == 0 {
                solve_start_node(spec, k, p_next)?
            } else if node == n {
                solve_end_node(spec, k, p_next)?
            } else {
                solve_interior_node(spec, k, node, p_next)?
            };
            row.push(cell.coefficient);
            defender[k - 1].push(cell.defender);
            adversary[k - 1].push(cell.adversary);
            diagnostics.push(cell.diagnostic);
        }
        coefficients[k - 1] = row;
    }

    Ok(DualDeterSolution {
        table: ScalarValueTable::from_parts(horizon, coefficients, PolicyTable::new(defender), PolicyTable::new(adversary)),
        diagnostics,
    })
}

impl From<DualDeterSpec> for ScalarLQSpec {
    fn from(spec: DualDeterSpec) -> Self {
        spec.lq
    }
}

impl TryFrom<ScalarLQSpec> for DualDeterSpec {
    type Error = Error;

    fn try_from(lq: ScalarLQSpec) -> Result<Self> {
        match lq.topology() {
            Topology::DualDeter(chain) => Ok(Self { chain: chain.clone(), lq }),
            Topology::Graph(_) => Err(Error::Spec("scalar-LQ spec is not on a dual-deter chain".into())),
        }
    }
}
