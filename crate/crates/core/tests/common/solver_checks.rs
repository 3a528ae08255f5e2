//! Solver-level cross-checks shared by the integration tests and the
//! acceptance harness.

use moclqr_core::solver::{convex_value, lower_bound, measurement_slots};
use moclqr_core::{
    build_topology, enumerate_oracle, evaluate_cost, solve_convex_constant_obs, solve_micp,
    CoverageMode, InverseBelief, ObservationModel, Polytope, RegionAssignment, RegionPartition,
    ScenarioSpec, SolverConfig,
};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{all_assignment_costs, normalized_expected_cost, random_instance, rel_err, HORIZONS};

pub type Check<T = ()> = std::result::Result<T, String>;

pub const ORACLE_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct ExactnessReport {
    pub micp: f64,
    pub oracle: f64,
    pub inverse_coords: f64,
    pub normalized_coords: f64,
}

/// Seeded random instance for the equivalence checks. Horizons cycle through
/// the multi-segment entries of [`HORIZONS`] so every case branches.
pub fn exactness_instance(seed: u64) -> ScenarioSpec {
    let branching: Vec<_> = HORIZONS
        .iter()
        .copied()
        .filter(|(n, nb)| n / nb >= 2)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, branching[seed as usize % branching.len()])
}

/// Branch-and-bound against exhaustive enumeration, and the solver objective
/// against two re-evaluations in belief coordinates.
pub fn exactness_check(spec: &ScenarioSpec) -> Check<ExactnessReport> {
    let config = SolverConfig::default();
    let micp = solve_micp(spec, &config).map_err(|e| format!("solve_micp: {e}"))?;
    let oracle = enumerate_oracle(spec, &config).map_err(|e| format!("oracle: {e}"))?;
    let report = ExactnessReport {
        micp: micp.cost,
        oracle: oracle.cost,
        inverse_coords: evaluate_cost(spec, &micp.tree, &micp.assignment)
            .map_err(|e| format!("evaluate_cost: {e}"))?,
        normalized_coords: normalized_expected_cost(spec, &micp.tree, &micp.assignment),
    };
    if rel_err(report.micp, report.oracle) > ORACLE_TOL {
        return Err(format!(
            "solve_micp {} vs oracle {}",
            report.micp, report.oracle
        ));
    }
    for (name, v) in [
        ("evaluate_cost", report.inverse_coords),
        ("normalized re-evaluation", report.normalized_coords),
    ] {
        if rel_err(report.micp, v) > IDENTITY_TOL {
            return Err(format!("{name} {v} vs solver objective {}", report.micp));
        }
    }
    if micp.stats.bound_violations != 0 {
        return Err(format!("{} bound violations", micp.stats.bound_violations));
    }
    Ok(report)
}

/// Lower bounds of random partial assignments never exceed the best exact
/// completion.
pub fn bound_validity_check(seed: u64) -> Check {
    let spec = exactness_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let topo = build_topology(&spec.horizon, spec.num_obs());
    let costs = all_assignment_costs(&spec);
    let slots = measurement_slots(&topo);
    for _ in 0..4 {
        let mut partial = RegionAssignment::new();
        for slot in &slots {
            if rng.random_bool(0.5) {
                partial.set(*slot, rng.random_range(0..spec.num_regions()));
            }
        }
        let best = costs
            .iter()
            .filter(|(a, _)| partial.is_subset_of(a))
            .map(|(_, c)| *c)
            .fold(f64::INFINITY, f64::min);
        let bound = lower_bound(&spec, &topo, &partial, &Default::default())
            .map_err(|e| format!("lower_bound: {e}"))?;
        let slack = if best.is_finite() {
            1e-7 * (1.0 + best.abs())
        } else {
            0.0
        };
        if bound > best + slack {
            return Err(format!("bound {bound} above best completion {best}"));
        }
    }
    Ok(())
}

/// Largest relative midpoint-convexity violation of `V(x, z)` over `pairs`
/// random pairs on a constant-observation instance.
pub fn midpoint_convexity(seed: u64, pairs: usize) -> Check<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_instance(&mut rng, (4, 2));
    let p = rng.random_range(0.55..0.95);
    let spec = super::with_constant_obs(&base, p);
    let n = spec.state_dim();
    let settings = Default::default();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x1 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let x2 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let z1 = DVector::from_fn(2, |_, _| rng.random_range(1.0..6.0));
        let z2 = DVector::from_fn(2, |_, _| rng.random_range(1.0..6.0));
        let v = |x: &DVector<f64>, z: &DVector<f64>| {
            convex_value(&spec, x, &InverseBelief::new(z.clone()).unwrap(), &settings)
                .map_err(|e| format!("convex_value: {e}"))
        };
        let (a, b) = (v(&x1, &z1)?, v(&x2, &z2)?);
        let mid = v(&((&x1 + &x2) * 0.5), &((&z1 + &z2) * 0.5))?;
        let avg = 0.5 * (a + b);
        worst = worst.max((mid - avg) / (1.0 + avg.abs()));
    }
    Ok(worst)
}

/// Copy of `spec` with a single region covering the state set.
pub fn single_region(spec: &ScenarioSpec) -> ScenarioSpec {
    let mut s = spec.clone();
    s.partition = RegionPartition::new(
        vec![Polytope::new(
            spec.state_set.h_mat().clone(),
            spec.state_set.h_vec().clone(),
        )
        .unwrap()],
        CoverageMode::Partition,
    )
    .unwrap();
    s.obs = ObservationModel::new(vec![spec.obs.table(0).unwrap().clone()]).unwrap();
    s.validate().unwrap();
    s
}

/// The single-QP path against branch-and-bound on a one-region instance.
pub fn fast_path_check(seed: u64) -> Check<(f64, f64)> {
    let spec = single_region(&exactness_instance(seed));
    let config = SolverConfig::default();
    let fast = solve_convex_constant_obs(&spec, &config).map_err(|e| e.to_string())?;
    let micp = solve_micp(&spec, &config).map_err(|e| e.to_string())?;
    if rel_err(fast.cost, micp.cost) > ORACLE_TOL {
        return Err(format!(
            "fast path {} vs solve_micp {}",
            fast.cost, micp.cost
        ));
    }
    Ok((fast.cost, micp.cost))
}
