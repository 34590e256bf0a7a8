//! Monte Carlo rollouts under behavioral policies, exact best responses and
//! saddle-point certification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::general::{build_cost_to_go, GeneralGameSpec};
use crate::graph::{Action, NodeId, Player, Topology};
use crate::matrix_game::GameMatrix;
use crate::policy::{checked_mix, BehavioralPolicy};
use crate::rng::{RngSeed, SplitMix64};
use crate::scalar_lq::{build_scaled_cost_to_go, ScalarLQSpec};

/// A game the simulator can roll out and best-respond in.
pub trait SimulatedGame: Sync {
    type State: Clone + std::fmt::Debug + Send + Sync;

    fn topology(&self) -> &Topology;
    fn horizon(&self) -> usize;
    /// `g_k^α(x)` for `k = 1..=L+1`.
    fn stage_cost(&self, k: usize, node: NodeId, state: &Self::State) -> f64;
    fn defender_cost(&self, k: usize, node: NodeId, state: &Self::State) -> f64;
    fn adversary_cost(&self, k: usize, node: NodeId, state: &Self::State) -> f64;
    /// State after step `k` when the chain lands on `next`.
    fn advance(&self, k: usize, next: NodeId, state: &Self::State) -> Result<Self::State>;

    /// Exact value from `(1, α1, x1)` when `responder` plays optimally
    /// against the fixed `opponent` policy.
    fn best_response_value(
        &self,
        opponent: &dyn BehavioralPolicy<Self::State>,
        responder: Player,
        x1: &Self::State,
        alpha1: NodeId,
    ) -> Result<f64>;
}

impl SimulatedGame for ScalarLQSpec {
    type State = f64;

    fn topology(&self) -> &Topology {
        ScalarLQSpec::topology(self)
    }

    fn horizon(&self) -> usize {
        ScalarLQSpec::horizon(self)
    }

    fn stage_cost(&self, k: usize, node: NodeId, x: &f64) -> f64 {
        self.g(k, node) * x * x
    }

    fn defender_cost(&self, k: usize, node: NodeId, x: &f64) -> f64 {
        self.d(k, node) * x * x
    }

    fn adversary_cost(&self, k: usize, node: NodeId, x: &f64) -> f64 {
        self.a(k, node) * x * x
    }

    fn advance(&self, k: usize, next: NodeId, x: &f64) -> Result<f64> {
        Ok(self.f(k, next) * x)
    }

    /// Runs on the coefficient recursion, so `opponent` must not depend on
    /// the state; it is queried at `x = 1`.
    fn best_response_value(&self, opponent: &dyn BehavioralPolicy<f64>, responder: Player, x1: &f64, alpha1: NodeId) -> Result<f64> {
        self.topology().check_node(alpha1)?;
        let horizon = ScalarLQSpec::horizon(self);
        let mut p = self.coefficients().g[horizon].clone();
        for k in (1..=horizon).rev() {
            let mut row = Vec::with_capacity(p.len());
            for node in 0..p.len() {
                let m = build_scaled_cost_to_go(self, k, node, &p)?;
                row.push(self.g(k, node) + respond(&m, opponent, responder, k, node, &1.0)?);
            }
            p = row;
        }
        Ok(p[alpha1] * x1 * x1)
    }
}

impl SimulatedGame for GeneralGameSpec {
    type State = usize;

    fn topology(&self) -> &Topology {
        GeneralGameSpec::topology(self)
    }

    fn horizon(&self) -> usize {
        GeneralGameSpec::horizon(self)
    }

    fn stage_cost(&self, k: usize, node: NodeId, x: &usize) -> f64 {
        GeneralGameSpec::stage_cost(self, k, node, *x)
    }

    fn defender_cost(&self, k: usize, node: NodeId, x: &usize) -> f64 {
        GeneralGameSpec::defender_cost(self, k, node, *x)
    }

    fn adversary_cost(&self, k: usize, node: NodeId, x: &usize) -> f64 {
        GeneralGameSpec::adversary_cost(self, k, node, *x)
    }

    fn advance(&self, k: usize, next: NodeId, x: &usize) -> Result<usize> {
        self.successor(k, next, *x)
    }

    fn best_response_value(&self, opponent: &dyn BehavioralPolicy<usize>, responder: Player, x1: &usize, alpha1: NodeId) -> Result<f64> {
        self.topology().check_node(alpha1)?;
        let len = self.grid().len();
        if *x1 >= len {
            return Err(Error::GridIndexOutOfRange { index: *x1, len });
        }
        let horizon = GeneralGameSpec::horizon(self);
        let nodes = self.node_count();
        let mut v: Vec<Vec<f64>> = (0..nodes)
            .map(|n| (0..len).map(|x| GeneralGameSpec::stage_cost(self, horizon + 1, n, x)).collect())
            .collect();
        for k in (1..=horizon).rev() {
            let mut next = Vec::with_capacity(nodes);
            for node in 0..nodes {
                let row = (0..len)
                    .map(|x| {
                        let m = build_cost_to_go(self, k, node, x, &v)?;
                        Ok(GeneralGameSpec::stage_cost(self, k, node, x) + respond(&m, opponent, responder, k, node, &x)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                next.push(row);
            }
            v = next;
        }
        Ok(v[alpha1][*x1])
    }
}

/// Best pure reply to the opponent's mixture at one cell.
fn respond<S>(m: &GameMatrix, opponent: &dyn BehavioralPolicy<S>, responder: Player, k: usize, node: NodeId, state: &S) -> Result<f64> {
    Ok(match responder {
        Player::Defender => {
            let z = checked_mix(opponent, k, node, state, m.cols())?;
            m.col_mix_payoffs(z).into_iter().fold(f64::INFINITY, f64::min)
        }
        Player::Adversary => {
            let y = checked_mix(opponent, k, node, state, m.rows())?;
            m.row_mix_payoffs(y).into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step<S> {
    pub k: usize,
    pub node: NodeId,
    pub state: S,
    pub defender: Action,
    pub adversary: Action,
    /// `g_k(x_k) + 1̄(π^d) d_k(x_k) − 1̄(π^a) a_k(x_k)`.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub steps: Vec<Step<S>>,
    pub final_node: NodeId,
    pub final_state: S,
    /// `g_{L+1}` at the final node and state.
    pub terminal_cost: f64,
    pub total_cost: f64,
}

/// Cost of playing `(defender, adversary)` at `(k, node, state)`.
pub fn step_cost<G: SimulatedGame + ?Sized>(game: &G, k: usize, node: NodeId, state: &G::State, defender: Action, adversary: Action) -> f64 {
    let topo = game.topology();
    let d = topo.cost_node(node, defender).map_or(0.0, |c| game.defender_cost(k, c, state));
    let a = topo.cost_node(node, adversary).map_or(0.0, |c| game.adversary_cost(k, c, state));
    game.stage_cost(k, node, state) + d - a
}

/// One sampled play from `(1, α1, x1)`. Both players sample independently
/// at every step.
pub fn rollout<G: SimulatedGame + ?Sized>(
    game: &G,
    defender: &dyn BehavioralPolicy<G::State>,
    adversary: &dyn BehavioralPolicy<G::State>,
    x1: G::State,
    alpha1: NodeId,
    seed: RngSeed,
) -> Result<Trajectory<G::State>> {
    let topo = game.topology();
    topo.check_node(alpha1)?;
    let horizon = game.horizon();
    let mut rng = SplitMix64::new(seed);
    let mut node = alpha1;
    let mut state = x1;
    let mut steps = Vec::with_capacity(horizon);
    let mut total = 0.0;
    for k in 1..=horizon {
        let rows = topo.defender_actions(node);
        let cols = topo.adversary_actions(node);
        let y = checked_mix(defender, k, node, &state, rows.len())?;
        let z = checked_mix(adversary, k, node, &state, cols.len())?;
        let u = rows[rng.sample_index(y)];
        let w = cols[rng.sample_index(z)];
        let cost = step_cost(game, k, node, &state, u, w);
        total += cost;
        let next = topo.transition(node, u, w)?;
        let next_state = game.advance(k, next, &state)?;
        steps.push(Step {
            k,
            node,
            state,
            defender: u,
            adversary: w,
            cost,
        });
        node = next;
        state = next_state;
    }
    let terminal_cost = game.stage_cost(horizon + 1, node, &state);
    Ok(Trajectory {
        steps,
        final_node: node,
        final_state: state,
        terminal_cost,
        total_cost: total + terminal_cost,
    })
}

/// Recomputes a trajectory's total from its recorded actions.
pub fn replay_cost<G: SimulatedGame + ?Sized>(game: &G, trajectory: &Trajectory<G::State>) -> Result<f64> {
    let topo = game.topology();
    let mut total = 0.0;
    let mut expected: Option<(NodeId, G::State)> = None;
    for s in &trajectory.steps {
        if let Some((node, _)) = &expected {
            if *node != s.node {
                return Err(Error::Precondition(format!("step k={} starts at node {} but the chain reached {node}", s.k, s.node)));
            }
        }
        total += step_cost(game, s.k, s.node, &s.state, s.defender, s.adversary);
        let next = topo.transition(s.node, s.defender, s.adversary)?;
        expected = Some((next, game.advance(s.k, next, &s.state)?));
    }
    let horizon = game.horizon();
    Ok(total + game.stage_cost(horizon + 1, trajectory.final_node, &trajectory.final_state))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    /// Standard error of the mean; 0 when `degenerate`.
    pub std_error: f64,
    pub samples: usize,
    /// Set for a single sample, where no spread can be estimated.
    pub degenerate: bool,
}

/// Sample mean and standard error of the total cost over `n_samples`
/// rollouts. Rollout `i` uses the `i`-th output of a SplitMix64 stream
/// seeded with `seed`, so results do not depend on thread scheduling.
pub fn estimate_expected_cost<G: SimulatedGame + ?Sized>(
    game: &G,
    defender: &(dyn BehavioralPolicy<G::State> + Sync),
    adversary: &(dyn BehavioralPolicy<G::State> + Sync),
    x1: G::State,
    alpha1: NodeId,
    n_samples: usize,
    seed: RngSeed,
) -> Result<CostEstimate> {
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    let mut master = SplitMix64::new(seed);
    let seeds: Vec<u64> = (0..n_samples).map(|_| master.next_u64()).collect();
    let costs: Vec<f64> = seeds
        .par_iter()
        .map(|&s| rollout(game, defender, adversary, x1.clone(), alpha1, RngSeed(s)).map(|t| t.total_cost))
        .collect::<Result<_>>()?;
    let n = costs.len() as f64;
    // Shifted by the first sample so that identical costs average exactly.
    let shift = costs[0];
    let mean = shift + costs.iter().map(|c| c - shift).sum::<f64>() / n;
    if n_samples == 1 {
        return Ok(CostEstimate {
            mean,
            std_error: 0.0,
            samples: 1,
            degenerate: true,
        });
    }
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    Ok(CostEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: n_samples,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub value: f64,
    /// Defender's best response against the adversary policy.
    pub defender_best_response: f64,
    /// Adversary's best response against the defender policy.
    pub adversary_best_response: f64,
    pub defender_gap: f64,
    pub adversary_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Certifies `(defender, adversary)` as a saddle point with value `value`:
/// neither player can move the outcome by more than `tol` by deviating.
pub fn saddle_check<G: SimulatedGame + ?Sized>(
    game: &G,
    defender: &dyn BehavioralPolicy<G::State>,
    adversary: &dyn BehavioralPolicy<G::State>,
    x1: &G::State,
    alpha1: NodeId,
    value: f64,
    tol: f64,
) -> Result<SaddleReport> {
    let br_d = game.best_response_value(adversary, Player::Defender, x1, alpha1)?;
    let br_a = game.best_response_value(defender, Player::Adversary, x1, alpha1)?;
    let defender_gap = (br_d - value).abs();
    let adversary_gap = (br_a - value).abs();
    Ok(SaddleReport {
        value,
        defender_best_response: br_d,
        adversary_best_response: br_a,
        defender_gap,
        adversary_gap,
        tol,
        passed: defender_gap <= tol && adversary_gap <= tol,
    })
}
