//! Planning for mixed-observable constrained linear-quadratic problems.
//!
//! The environment state is unknown and observed through measurements whose
//! accuracy depends on the region the system occupies. Plans are trees of
//! trajectory segments that branch on each observation; the optimal tree and
//! the region schedule that shapes the belief are found by branch-and-bound
//! over QPs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod error;
pub mod model;
pub mod qp;
pub mod solver;
pub mod tree;

pub use belief::{Belief, InverseBelief, UnnormalizedBelief};
pub use error::{Error, Result};
pub use model::{
    load_scenario, save_scenario, CostSpec, CoverageMode, Goal, HorizonSpec, LinearSystem,
    ObservationModel, Polytope, RegionPartition, ScenarioSpec, TransitionModel,
};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution, QpStatus};
pub use solver::{
    enumerate_oracle, evaluate_cost, solve_convex_constant_obs, solve_micp, RegionAssignment, Slot,
    Solution, SolveStats, SolverConfig,
};
pub use tree::{build_topology, Topology, TrajectoryTree};
