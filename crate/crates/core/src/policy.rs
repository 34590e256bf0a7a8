//! Behavioral policy tables: per `(k, node)` (and optionally per grid
//! state) probability vectors over a player's ordered action list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, Player, Topology};

/// Simplex tolerance for user-supplied or sampled-from policies.
pub const POLICY_TOL: f64 = 1e-9;

/// Anything that yields a mixture at `(k, node, state)`; `k` is 1-based.
pub trait BehavioralPolicy<S> {
    fn mix(&self, k: usize, node: NodeId, state: &S) -> Option<&[f64]>;
}

/// State-independent policy, `mixes[k-1][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    mixes: Vec<Vec<Vec<f64>>>,
}

impl PolicyTable {
    pub fn new(mixes: Vec<Vec<Vec<f64>>>) -> Self {
        Self { mixes }
    }

    /// Deterministic "always stay" policy.
    pub fn idle(topology: &Topology, horizon: usize, player: Player) -> Self {
        let per_step: Vec<Vec<f64>> = (0..topology.node_count())
            .map(|node| {
                let mut p = vec![0.0; topology.actions(player, node).len()];
                p[0] = 1.0;
                p
            })
            .collect();
        Self {
            mixes: vec![per_step; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.mixes.len()
    }

    pub fn get(&self, k: usize, node: NodeId) -> Option<&[f64]> {
        self.mixes.get(k.checked_sub(1)?)?.get(node).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, k: usize, node: NodeId) -> Option<&mut Vec<f64>> {
        self.mixes.get_mut(k.checked_sub(1)?)?.get_mut(node)
    }

    pub fn steps(&self) -> &[Vec<Vec<f64>>] {
        &self.mixes
    }
}

impl<S> BehavioralPolicy<S> for PolicyTable {
    fn mix(&self, k: usize, node: NodeId, _state: &S) -> Option<&[f64]> {
        self.get(k, node)
    }
}

/// Grid-state-dependent policy, `mixes[k-1][node][x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPolicyTable {
    mixes: Vec<Vec<Vec<Vec<f64>>>>,
}

impl GridPolicyTable {
    pub fn new(mixes: Vec<Vec<Vec<Vec<f64>>>>) -> Self {
        Self { mixes }
    }

    pub fn horizon(&self) -> usize {
        self.mixes.len()
    }

    pub fn get(&self, k: usize, node: NodeId, x: usize) -> Option<&[f64]> {
        self.mixes
            .get(k.checked_sub(1)?)?
            .get(node)?
            .get(x)
            .map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, k: usize, node: NodeId, x: usize) -> Option<&mut Vec<f64>> {
        self.mixes.get_mut(k.checked_sub(1)?)?.get_mut(node)?.get_mut(x)
    }

    pub fn steps(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.mixes
    }
}

impl BehavioralPolicy<usize> for GridPolicyTable {
    fn mix(&self, k: usize, node: NodeId, state: &usize) -> Option<&[f64]> {
        self.get(k, node, *state)
    }
}

/// Fetches and validates a mixture of the expected length.
pub(crate) fn checked_mix<'p, S, P: BehavioralPolicy<S> + ?Sized>(
    policy: &'p P,
    k: usize,
    node: NodeId,
    state: &S,
    expected_len: usize,
) -> Result<&'p [f64]> {
    let mix = policy.mix(k, node, state).ok_or_else(|| Error::Policy {
        k,
        node,
        message: "no policy row".into(),
    })?;
    if mix.len() != expected_len {
        return Err(Error::Policy {
            k,
            node,
            message: format!("expected {expected_len} probabilities, got {}", mix.len()),
        });
    }
    let total: f64 = mix.iter().sum();
    if mix.iter().any(|&p| !(p >= -POLICY_TOL) || !p.is_finite()) || (total - 1.0).abs() > POLICY_TOL {
        return Err(Error::Policy {
            k,
            node,
            message: format!("not a probability vector: {mix:?}"),
        });
    }
    Ok(mix)
}
