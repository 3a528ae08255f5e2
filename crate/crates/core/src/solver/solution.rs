use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ScenarioSpec;
use crate::tree::TrajectoryTree;

use super::assemble::constraint_violation;
use super::assignment::RegionAssignment;
use super::cost::evaluate_cost;

/// Counters reported by every solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    /// Branch-and-bound nodes whose relaxation was solved.
    pub nodes_explored: usize,
    pub qps_solved: usize,
    pub pruned_infeasible: usize,
    pub pruned_bound: usize,
    /// Nodes closed because a rounded trajectory matched their bound.
    pub fathomed: usize,
    /// Relaxations that ended without a certified answer.
    pub unresolved: usize,
    /// Explored nodes on the path to the optimum whose bound exceeded the
    /// final cost by more than the gap. Zero for a correct solve.
    pub bound_violations: usize,
    pub root_bound: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub tree: TrajectoryTree,
    pub assignment: RegionAssignment,
    /// Optimal expected cost.
    pub cost: f64,
    /// Remaining optimality gap: `cost` minus the best proven lower bound.
    pub gap: f64,
    pub stats: SolveStats,
}

/// Tolerance for the feasibility and cost checks of [`Solution::verify`].
pub const SOLUTION_TOL: f64 = 1e-6;

impl Solution {
    /// Re-checks the solution against `spec`: dynamics, state and input sets,
    /// region memberships, and the cost by independent re-evaluation.
    pub fn verify(&self, spec: &ScenarioSpec) -> Result<()> {
        let dyn_res = self.tree.dynamics_residual(&spec.system);
        if dyn_res > SOLUTION_TOL {
            return Err(Error::Numerical(format!("dynamics residual {dyn_res:e}")));
        }
        let viol = constraint_violation(spec, &self.tree, &self.assignment);
        if viol > SOLUTION_TOL {
            return Err(Error::Numerical(format!("constraint violation {viol:e}")));
        }
        let recomputed = evaluate_cost(spec, &self.tree, &self.assignment)?;
        let rel = (recomputed - self.cost).abs() / self.cost.abs().max(1.0);
        if rel > SOLUTION_TOL {
            return Err(Error::Numerical(format!(
                "cost {} differs from re-evaluation {recomputed}",
                self.cost
            )));
        }
        Ok(())
    }
}
