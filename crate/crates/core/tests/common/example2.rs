//! Property checks for the obstacle scenario.

use moclqr_core::solver::{assignment_count, measurement_slots, slot_state};
use moclqr_core::{
    build_topology, enumerate_oracle, solve_micp, ScenarioSpec, Solution, SolverConfig,
};
use nalgebra::DVector;

use super::{rel_err, scenario};

pub const CORRIDOR: usize = 1;
pub const NEAR_GOALS: [usize; 2] = [2, 3];
pub const MEMBERSHIP_TOL: f64 = 1e-6;

pub fn reduced(name: &str) -> ScenarioSpec {
    scenario(name).with_horizon(15, 5).unwrap()
}

/// Smallest obstacle margin over every tree state.
pub fn worst_obstacle_margin(spec: &ScenarioSpec, sol: &Solution) -> f64 {
    sol.tree
        .nodes
        .iter()
        .flat_map(|seg| &seg.states)
        .map(|x| spec.obstacle_margin(x))
        .fold(f64::INFINITY, f64::min)
}

pub fn measurement_states(sol: &Solution) -> Vec<DVector<f64>> {
    measurement_slots(&sol.tree.topology)
        .into_iter()
        .map(|slot| slot_state(&sol.tree, slot).clone())
        .collect()
}

pub fn in_regions(spec: &ScenarioSpec, x: &DVector<f64>, regions: &[usize]) -> bool {
    regions.iter().any(|&r| {
        spec.partition
            .region(r)
            .unwrap()
            .contains(x, MEMBERSHIP_TOL)
    })
}

/// `Ok(None)` when the enumeration guard forbids the comparison.
pub fn oracle_gap(spec: &ScenarioSpec, sol: &Solution) -> std::result::Result<Option<f64>, String> {
    let config = SolverConfig::default();
    let topo = build_topology(&spec.horizon, spec.num_obs());
    match assignment_count(spec, &topo) {
        Some(c) if c <= config.enumeration_guard => {}
        _ => return Ok(None),
    }
    let oracle = enumerate_oracle(spec, &config).map_err(|e| e.to_string())?;
    Ok(Some(rel_err(sol.cost, oracle.cost)))
}

/// Variants small enough to enumerate, started next to the corridor so the
/// obstacles shape the solution.
pub fn enumerable_variants(name: &str) -> Vec<ScenarioSpec> {
    let base = scenario(name);
    let mut out = Vec::new();
    for (n, nb) in [(4, 2), (3, 1)] {
        let mut s = base.with_horizon(n, nb).unwrap();
        s.x0 = DVector::from_vec(vec![-4.0, 1.0, 0.0, 0.0]);
        s.validate().unwrap();
        out.push(s);
    }
    out
}

pub fn solve(spec: &ScenarioSpec) -> Solution {
    solve_micp(spec, &SolverConfig::default()).unwrap()
}
