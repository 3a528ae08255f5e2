//! Single-QP path for observation models that do not depend on the region.

use std::time::Instant;

use nalgebra::DVector;

use crate::belief::{Belief, InverseBelief, UnnormalizedBelief};
use crate::error::{Error, Result};
use crate::model::{CoverageMode, ScenarioSpec};
use crate::qp::{solve_qp, QpSettings, QpStatus};
use crate::tree::build_topology;

use super::assemble::{assemble_qp_from, extract_tree, flatten_tree, slot_state, WeightMode};
use super::assignment::{measurement_slots, RegionAssignment};
use super::solution::{Solution, SolveStats, SOLUTION_TOL};
use super::SolverConfig;

fn check_constant_obs(spec: &ScenarioSpec) -> Result<()> {
    if spec.partition.mode() != CoverageMode::Partition {
        return Err(Error::validation(
            "the convex path requires partition mode without obstacles",
        ));
    }
    if !spec.obs.is_state_independent() {
        return Err(Error::validation(
            "the convex path requires identical observation tables",
        ));
    }
    Ok(())
}

fn status_error(status: QpStatus) -> Error {
    match status {
        QpStatus::PrimalInfeasible => Error::Infeasible,
        s => Error::Numerical(format!("QP ended with {s:?}")),
    }
}

/// Optimal value from an arbitrary state `x0` and inverse belief `z0`, which
/// need not be normalized.
pub fn convex_value(
    spec: &ScenarioSpec,
    x0: &DVector<f64>,
    z0: &InverseBelief,
    settings: &QpSettings,
) -> Result<f64> {
    check_constant_obs(spec)?;
    let topology = build_topology(&spec.horizon, spec.num_obs());
    let assembled = assemble_qp_from(
        spec,
        &topology,
        &RegionAssignment::new(),
        WeightMode::Optimistic,
        x0,
        z0.to_unnormalized(),
    )?;
    let sol = solve_qp(&assembled.qp, settings)?;
    if sol.status != QpStatus::Optimal {
        return Err(status_error(sol.status));
    }
    Ok(assembled.cost(&sol.x))
}

/// Solves an instance whose observation tables coincide across regions. The
/// belief weights are then fixed, so one QP over the state set replaces the
/// search over assignments.
pub fn solve_convex_constant_obs(spec: &ScenarioSpec, config: &SolverConfig) -> Result<Solution> {
    spec.validate()?;
    check_constant_obs(spec)?;
    let start = Instant::now();
    let topology = build_topology(&spec.horizon, spec.num_obs());
    let root = UnnormalizedBelief::from_belief(&Belief::new(spec.b0.clone())?)?;
    let assembled = assemble_qp_from(
        spec,
        &topology,
        &RegionAssignment::new(),
        WeightMode::Optimistic,
        &spec.x0,
        root,
    )?;
    let sol = solve_qp(&assembled.qp, &config.qp)?;
    if sol.status != QpStatus::Optimal {
        return Err(status_error(sol.status));
    }
    let tree = extract_tree(spec, &topology, &assembled, &sol.x)?;
    let mut assignment = RegionAssignment::new();
    for slot in measurement_slots(&topology) {
        let (region, viol) = spec.partition.closest_region(slot_state(&tree, slot));
        if viol > SOLUTION_TOL {
            return Err(Error::validation(format!(
                "state at {slot:?} lies outside every region"
            )));
        }
        assignment.set(slot, region);
    }
    let cost = assembled.cost(&flatten_tree(&assembled.layout, &tree));
    Ok(Solution {
        tree,
        assignment,
        cost,
        gap: 0.0,
        stats: SolveStats {
            nodes_explored: 1,
            qps_solved: 1,
            root_bound: cost,
            wall_time_s: start.elapsed().as_secs_f64(),
            ..SolveStats::default()
        },
    })
}
