//! Global optimization over region assignments.

mod assemble;
mod assignment;
mod bnb;
mod convex;
mod cost;
mod enumerate;
mod solution;

pub use assemble::{
    assemble_fixed_assignment_qp, assemble_qp, assemble_qp_from, constraint_violation,
    extract_tree, flatten_tree, node_inverse_beliefs, slot_state, AssembledQp, WeightMode,
};
pub use assignment::{
    decision_slots, measurement_slot, measurement_slots, space_slots, RegionAssignment, Slot,
};
pub use bnb::{lower_bound, solve_micp};
pub use convex::{convex_value, solve_convex_constant_obs};
pub use cost::evaluate_cost;
pub use enumerate::{assignment_count, enumerate_oracle};
pub use solution::{Solution, SolveStats, SOLUTION_TOL};

use crate::qp::QpSettings;

/// Default cap on the number of complete assignments `enumerate_oracle`
/// will visit.
pub const ENUMERATION_GUARD: u128 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub qp: QpSettings,
    /// Nodes are closed once their bound is within
    /// `gap_rel * (1 + |incumbent|)` of the incumbent.
    pub gap_rel: f64,
    pub max_nodes: Option<usize>,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    /// Relaxations solved concurrently per batch.
    pub workers: usize,
    pub enumeration_guard: u128,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            qp: QpSettings::default(),
            gap_rel: 1e-6,
            max_nodes: None,
            time_limit: None,
            workers: 1,
            enumeration_guard: ENUMERATION_GUARD,
        }
    }
}

impl SolverConfig {
    pub fn gap_threshold(&self, incumbent: f64) -> f64 {
        self.gap_rel * (1.0 + incumbent.abs())
    }

    /// Nodes with a bound at or above this value cannot improve on
    /// `incumbent` by more than the gap.
    pub fn prune_threshold(&self, incumbent: f64) -> f64 {
        if incumbent.is_finite() {
            incumbent - self.gap_threshold(incumbent)
        } else {
            f64::INFINITY
        }
    }
}
