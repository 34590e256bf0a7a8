//! Solvers for finite-horizon zero-sum takeover games on directed graphs.
//!
//! A defender and an adversary repeatedly pick nodes of a graph to take
//! over; the held node drives a continuous state and the stage costs. The
//! crate computes Nash-equilibrium behavioral policies and saddle-point
//! values by backward induction, with three routes:
//!
//! * [`general`]: tabular recursion over a finite state grid,
//! * [`scalar_lq`]: the state-independent coefficient recursion for scalar
//!   linear dynamics with quadratic costs,
//! * [`dual_deter`]: closed-form policies on the birth-death chain,
//!   cross-checked against the LP route.
//!
//! [`simulator`] samples trajectories and certifies saddle points by exact
//! best response; [`spec_file`] and [`output`] handle the JSON game format
//! and result emission.

pub mod dual_deter;
pub mod error;
pub mod examples;
pub mod general;
pub mod graph;
pub mod matrix_game;
pub mod output;
pub mod policy;
pub mod rng;
pub mod scalar_lq;
pub mod simulator;
pub mod spec_file;

mod simplex;

pub use error::{Error, Result};
pub use graph::{Action, DualDeterTopology, GameGraph, NodeId, Player, Topology};
pub use matrix_game::{GameMatrix, MatrixGameSolution};
