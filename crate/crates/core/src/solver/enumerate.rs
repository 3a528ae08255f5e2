//! Exhaustive search over complete assignments, for cross-checking.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::ScenarioSpec;
use crate::qp::{solve_qp, QpStatus};
use crate::tree::{build_topology, Topology};

use super::assemble::{assemble_qp, constraint_violation, extract_tree, flatten_tree, WeightMode};
use super::assignment::{decision_slots, RegionAssignment};
use super::solution::{Solution, SolveStats, SOLUTION_TOL};
use super::SolverConfig;

/// Number of complete assignments; `None` on overflow.
pub fn assignment_count(spec: &ScenarioSpec, topology: &Topology) -> Option<u128> {
    let slots = u32::try_from(decision_slots(spec, topology).len()).ok()?;
    (spec.num_regions() as u128).checked_pow(slots)
}

/// Solves the exact QP of every complete assignment and keeps the cheapest.
/// Ties go to the assignment visited first.
pub fn enumerate_oracle(spec: &ScenarioSpec, config: &SolverConfig) -> Result<Solution> {
    spec.validate()?;
    let start = Instant::now();
    let topology = build_topology(&spec.horizon, spec.num_obs());
    let count = assignment_count(spec, &topology).unwrap_or(u128::MAX);
    if count > config.enumeration_guard {
        return Err(Error::GuardExceeded {
            count,
            limit: config.enumeration_guard,
        });
    }
    let slots = decision_slots(spec, &topology);
    let r = spec.num_regions();
    let mut digits = vec![0usize; slots.len()];
    let mut best: Option<(f64, RegionAssignment, Vec<f64>)> = None;
    let mut stats = SolveStats::default();
    let mut unresolved = 0usize;
    loop {
        let mut assignment = RegionAssignment::new();
        for (slot, &d) in slots.iter().zip(&digits) {
            assignment.set(*slot, d);
        }
        let assembled = assemble_qp(spec, &topology, &assignment, WeightMode::Exact)?;
        let sol = solve_qp(&assembled.qp, &config.qp)?;
        stats.nodes_explored += 1;
        stats.qps_solved += 1;
        match sol.status {
            QpStatus::Optimal => {
                let tree = extract_tree(spec, &topology, &assembled, &sol.x)?;
                if constraint_violation(spec, &tree, &assignment) <= SOLUTION_TOL {
                    let x = flatten_tree(&assembled.layout, &tree);
                    let cost = assembled.cost(&x);
                    if best.as_ref().is_none_or(|b| cost < b.0) {
                        best = Some((cost, assignment, x));
                    }
                }
            }
            QpStatus::PrimalInfeasible => stats.pruned_infeasible += 1,
            _ => unresolved += 1,
        }

        // Odometer increment, last slot fastest.
        let mut i = digits.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < r {
                break;
            }
            digits[i] = 0;
        }
        if digits.iter().all(|&d| d == 0) {
            break;
        }
    }
    stats.unresolved = unresolved;
    if unresolved > 0 {
        return Err(Error::Numerical(format!(
            "{unresolved} assignment QPs did not converge"
        )));
    }
    let (_, assignment, x) = best.ok_or(Error::Infeasible)?;
    let assembled = assemble_qp(spec, &topology, &assignment, WeightMode::Exact)?;
    let tree = extract_tree(spec, &topology, &assembled, &x)?;
    let cost = assembled.cost(&flatten_tree(&assembled.layout, &tree));
    stats.wall_time_s = start.elapsed().as_secs_f64();
    stats.root_bound = cost;
    Ok(Solution {
        tree,
        assignment,
        cost,
        gap: 0.0,
        stats,
    })
}
