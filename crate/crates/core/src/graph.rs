//! Game topologies and the discrete-state transition rules.
//!
//! A topology fixes, for every node, the ordered action lists of both
//! players, the node reached for each action pair, and which node's
//! takeover cost an action pays. Two topologies are provided: a general
//! directed multigraph, where every action names a target node, and the
//! dual-deter birth-death chain, whose boundary nodes carry a special
//! in-place takeover action `τ`.
//!
//! Action lists always place the idle action (the current node) first, so
//! row and column 0 of every cost-to-go matrix is "stay".

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// A player's move at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Target a node; targeting the current node is the idle action.
    Node(NodeId),
    /// In-place takeover at a dual-deter boundary node.
    Tau,
}

impl Action {
    pub fn is_idle_at(self, node: NodeId) -> bool {
        self == Action::Node(node)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Node(n) => write!(f, "{n}"),
            Action::Tau => f.write_str("tau"),
        }
    }
}

/// The two players. The defender minimizes, the adversary maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Defender,
    Adversary,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Defender => Player::Adversary,
            Player::Adversary => Player::Defender,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Defender => f.write_str("defender"),
            Player::Adversary => f.write_str("adversary"),
        }
    }
}

/// Position of the game: the held node and the time step `k ∈ 1..=L+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlipState {
    node: NodeId,
    time: usize,
}

impl FlipState {
    pub fn new(node: NodeId, time: usize, node_count: usize, horizon: usize) -> Result<Self> {
        if node >= node_count {
            return Err(Error::NodeOutOfRange { node, node_count });
        }
        if time == 0 || time > horizon + 1 {
            return Err(Error::TimeOutOfRange {
                k: time,
                lo: 1,
                hi: horizon + 1,
            });
        }
        Ok(Self { node, time })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn time(&self) -> usize {
        self.time
    }
}

/// Directed multigraph with the per-node action neighborhoods `ε(α)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameGraph {
    node_count: usize,
    edges: Vec<(NodeId, NodeId)>,
    neighborhoods: Vec<Vec<NodeId>>,
    actions: Vec<Vec<Action>>,
}

impl GameGraph {
    /// Builds the graph and its neighborhoods. Self-loops are implied for
    /// every node; duplicate edges collapse.
    pub fn new(node_count: usize, edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Spec("a graph needs at least one node".into()));
        }
        if let Some(&(from, to)) = edges
            .iter()
            .find(|&&(from, to)| from >= node_count || to >= node_count)
        {
            return Err(Error::EdgeOutOfRange {
                from,
                to,
                node_count,
            });
        }

        let mut neighborhoods: Vec<Vec<NodeId>> = (0..node_count).map(|n| vec![n]).collect();
        let mut targets = vec![Vec::new(); node_count];
        for &(from, to) in &edges {
            if from != to {
                targets[from].push(to);
            }
        }
        for (node, mut t) in targets.into_iter().enumerate() {
            t.sort_unstable();
            t.dedup();
            neighborhoods[node].extend(t);
        }
        let actions = neighborhoods
            .iter()
            .map(|nbhd| nbhd.iter().map(|&n| Action::Node(n)).collect())
            .collect();

        Ok(Self {
            node_count,
            edges,
            neighborhoods,
            actions,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// `ε(α)`: the current node first, then reachable targets ascending.
    pub fn neighborhood(&self, node: NodeId) -> &[NodeId] {
        &self.neighborhoods[node]
    }

    /// FlipDyn update on the graph.
    ///
    /// Identical actions move to the common choice; a lone mover gets its
    /// target; two distinct movers cancel and the state stays put.
    pub fn transition(&self, current: NodeId, defender: NodeId, adversary: NodeId) -> Result<NodeId> {
        if current >= self.node_count {
            return Err(Error::NodeOutOfRange {
                node: current,
                node_count: self.node_count,
            });
        }
        let nbhd = &self.neighborhoods[current];
        for action in [defender, adversary] {
            if !nbhd.contains(&action) {
                return Err(Error::InvalidAction {
                    node: current,
                    action: Action::Node(action),
                });
            }
        }
        Ok(if defender == adversary || adversary == current {
            defender
        } else if defender == current {
            adversary
        } else {
            current
        })
    }
}

/// Birth-death chain `0..=N` where the adversary escalates up-chain and the
/// defender de-escalates down-chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualDeterTopology {
    chain_length: usize,
    down: Vec<NodeId>,
    up: Vec<NodeId>,
    defender_actions: Vec<Vec<Action>>,
    adversary_actions: Vec<Vec<Action>>,
}

impl DualDeterTopology {
    /// Chain with nearest-neighbour interior targets (`α−1`, `α+1`).
    pub fn new(chain_length: usize) -> Result<Self> {
        let down = (0..=chain_length).map(|n| n.saturating_sub(1)).collect();
        let up = (0..=chain_length).map(|n| (n + 1).min(chain_length)).collect();
        Self::with_targets(chain_length, down, up)
    }

    /// Chain with explicit interior targets. `down[α] < α < up[α]` must hold
    /// for every interior node; entries for nodes 0 and N are ignored.
    pub fn with_targets(chain_length: usize, mut down: Vec<NodeId>, mut up: Vec<NodeId>) -> Result<Self> {
        if chain_length == 0 {
            return Err(Error::Spec("dual-deter chain needs N >= 1".into()));
        }
        let nodes = chain_length + 1;
        if down.len() != nodes || up.len() != nodes {
            return Err(Error::Spec(format!(
                "dual-deter targets must list {nodes} entries (got down={}, up={})",
                down.len(),
                up.len()
            )));
        }
        for node in 1..chain_length {
            if !(down[node] < node && node < up[node] && up[node] <= chain_length) {
                return Err(Error::Spec(format!(
                    "interior node {node} needs down < node < up <= {chain_length}, got down={} up={}",
                    down[node], up[node]
                )));
            }
        }
        down[0] = 0;
        up[0] = 0;
        down[chain_length] = chain_length;
        up[chain_length] = chain_length;

        let mut defender_actions = Vec::with_capacity(nodes);
        let mut adversary_actions = Vec::with_capacity(nodes);
        for node in 0..nodes {
            if node == 0 || node == chain_length {
                defender_actions.push(vec![Action::Node(node), Action::Tau]);
                adversary_actions.push(vec![Action::Node(node), Action::Tau]);
            } else {
                defender_actions.push(vec![Action::Node(node), Action::Node(down[node])]);
                adversary_actions.push(vec![Action::Node(node), Action::Node(up[node])]);
            }
        }

        Ok(Self {
            chain_length,
            down,
            up,
            defender_actions,
            adversary_actions,
        })
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn node_count(&self) -> usize {
        self.chain_length + 1
    }

    /// Defender target `α̲` of an interior node.
    pub fn down_target(&self, node: NodeId) -> NodeId {
        self.down[node]
    }

    /// Adversary target `ᾱ` of an interior node.
    pub fn up_target(&self, node: NodeId) -> NodeId {
        self.up[node]
    }

    pub fn is_interior(&self, node: NodeId) -> bool {
        node > 0 && node < self.chain_length
    }

    pub fn transition(&self, current: NodeId, defender: Action, adversary: Action) -> Result<NodeId> {
        let n = self.chain_length;
        if current > n {
            return Err(Error::NodeOutOfRange {
                node: current,
                node_count: n + 1,
            });
        }
        if !self.defender_actions[current].contains(&defender) {
            return Err(Error::InvalidAction {
                node: current,
                action: defender,
            });
        }
        if !self.adversary_actions[current].contains(&adversary) {
            return Err(Error::InvalidAction {
                node: current,
                action: adversary,
            });
        }

        let idle = Action::Node(current);
        let boundary = current == 0 || current == n;
        Ok(if boundary && defender == adversary {
            current
        } else if current == 0 && adversary == Action::Tau && defender == idle {
            1
        } else if current == n && defender == Action::Tau && adversary == idle {
            n - 1
        } else if defender == adversary {
            // Interior action sets only intersect at the idle action.
            current
        } else if adversary == idle {
            match defender {
                Action::Node(t) => t,
                Action::Tau => current,
            }
        } else if defender == idle {
            match adversary {
                Action::Node(t) => t,
                Action::Tau => current,
            }
        } else {
            current
        })
    }
}

/// Any topology the solvers accept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    Graph(GameGraph),
    DualDeter(DualDeterTopology),
}

impl From<GameGraph> for Topology {
    fn from(g: GameGraph) -> Self {
        Topology::Graph(g)
    }
}

impl From<DualDeterTopology> for Topology {
    fn from(t: DualDeterTopology) -> Self {
        Topology::DualDeter(t)
    }
}

impl Topology {
    pub fn node_count(&self) -> usize {
        match self {
            Topology::Graph(g) => g.node_count(),
            Topology::DualDeter(t) => t.node_count(),
        }
    }

    /// Defender action list at `node`, idle first. Rows of the cost-to-go matrix.
    pub fn defender_actions(&self, node: NodeId) -> &[Action] {
        match self {
            Topology::Graph(g) => &g.actions[node],
            Topology::DualDeter(t) => &t.defender_actions[node],
        }
    }

    /// Adversary action list at `node`, idle first. Columns of the cost-to-go matrix.
    pub fn adversary_actions(&self, node: NodeId) -> &[Action] {
        match self {
            Topology::Graph(g) => &g.actions[node],
            Topology::DualDeter(t) => &t.adversary_actions[node],
        }
    }

    pub fn actions(&self, player: Player, node: NodeId) -> &[Action] {
        match player {
            Player::Defender => self.defender_actions(node),
            Player::Adversary => self.adversary_actions(node),
        }
    }

    pub fn transition(&self, current: NodeId, defender: Action, adversary: Action) -> Result<NodeId> {
        match self {
            Topology::Graph(g) => match (defender, adversary) {
                (Action::Node(d), Action::Node(a)) => g.transition(current, d, a),
                (Action::Tau, _) => Err(Error::InvalidAction {
                    node: current,
                    action: defender,
                }),
                (_, Action::Tau) => Err(Error::InvalidAction {
                    node: current,
                    action: adversary,
                }),
            },
            Topology::DualDeter(t) => t.transition(current, defender, adversary),
        }
    }

    /// Node whose takeover cost `action` pays at `current`, or `None` for idle.
    ///
    /// Graph actions pay the cost of their target node. Dual-deter actions
    /// pay the cost of the node they are played from.
    pub fn cost_node(&self, current: NodeId, action: Action) -> Option<NodeId> {
        if action.is_idle_at(current) {
            return None;
        }
        match (self, action) {
            (Topology::Graph(_), Action::Node(target)) => Some(target),
            _ => Some(current),
        }
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        let node_count = self.node_count();
        if node < node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node, node_count })
        }
    }

    /// Display name for `action` given node names.
    pub fn action_label(action: Action, names: &[String]) -> String {
        match action {
            Action::Node(n) => names.get(n).cloned().unwrap_or_else(|| n.to_string()),
            Action::Tau => "tau".to_string(),
        }
    }
}
