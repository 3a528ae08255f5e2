//! Belief invariants as seeded checks. Each draws a random model and a
//! random update sequence and returns a description of the first violation.

use moclqr_core::belief::{belief_update, inverse_update, unnormalized_update, z_upper_bound};
use moclqr_core::{Belief, InverseBelief, ObservationModel, TransitionModel, UnnormalizedBelief};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SIMPLEX_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 1e-12;
pub const MASS_TOL: f64 = 1e-12;

pub type Check = std::result::Result<(), String>;

fn stochastic_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.1..1.0));
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

pub fn random_obs(rng: &mut ChaCha8Rng) -> ObservationModel {
    let ne = rng.random_range(2..=3);
    let no = rng.random_range(2..=3);
    let r = rng.random_range(1..=3);
    ObservationModel::new((0..r).map(|_| stochastic_rows(rng, ne, no)).collect()).unwrap()
}

pub fn random_transition(rng: &mut ChaCha8Rng, ne: usize) -> TransitionModel {
    if rng.random_bool(0.5) {
        TransitionModel::static_env(ne)
    } else {
        TransitionModel::from_matrix(stochastic_rows(rng, ne, ne).transpose()).unwrap()
    }
}

pub fn random_belief(rng: &mut ChaCha8Rng, ne: usize) -> Belief {
    let v = DVector::from_fn(ne, |_, _| rng.random_range(0.05..1.0));
    let s = v.sum();
    Belief::new(v / s).unwrap()
}

fn random_step(rng: &mut ChaCha8Rng, obs: &ObservationModel) -> (usize, usize) {
    (
        rng.random_range(0..obs.num_regions()),
        rng.random_range(0..obs.num_obs()),
    )
}

/// Posteriors stay on the simplex, and normalizing `v` reproduces them.
pub fn simplex_preserved(rng: &mut ChaCha8Rng) -> Check {
    let obs = random_obs(rng);
    let trans = random_transition(rng, obs.num_env());
    let mut b = random_belief(rng, obs.num_env());
    let mut v = UnnormalizedBelief::from_belief(&b).unwrap();
    for k in 0..rng.random_range(1..=6) {
        let (region, o) = random_step(rng, &obs);
        b = belief_update(&obs, &trans, &b, region, o).unwrap().0;
        v = unnormalized_update(&obs, &trans, &v, region, o).unwrap();
        let bv = b.as_vector();
        if (bv.sum() - 1.0).abs() > SIMPLEX_TOL || bv.min() < 0.0 {
            return Err(format!("step {k}: belief {bv} left the simplex"));
        }
        let err = (v.normalized().as_vector() - bv).amax();
        if err > SIMPLEX_TOL {
            return Err(format!("step {k}: normalized v differs by {err:e}"));
        }
    }
    Ok(())
}

/// `v[e] * z[e] = 1` along any update sequence of a static environment.
pub fn duality_holds(rng: &mut ChaCha8Rng) -> Check {
    let obs = random_obs(rng);
    let b = random_belief(rng, obs.num_env());
    let trans = TransitionModel::static_env(obs.num_env());
    let mut v = UnnormalizedBelief::from_belief(&b).unwrap();
    let mut z = InverseBelief::from_belief(&b).unwrap();
    for k in 0..rng.random_range(1..=6) {
        let (region, o) = random_step(rng, &obs);
        v = unnormalized_update(&obs, &trans, &v, region, o).unwrap();
        z = inverse_update(&obs, &z, region, o).unwrap();
        let prod = v.as_vector().component_mul(z.as_vector());
        let err = prod.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
        if err > DUALITY_TOL {
            return Err(format!("step {k}: v*z deviates from 1 by {err:e}"));
        }
    }
    Ok(())
}

/// Static environments shrink every entry of `v`; any environment shrinks its
/// total mass, and entries never exceed 1.
pub fn v_shrinks(rng: &mut ChaCha8Rng) -> Check {
    let obs = random_obs(rng);
    let trans = random_transition(rng, obs.num_env());
    let mut v = UnnormalizedBelief::from_belief(&random_belief(rng, obs.num_env())).unwrap();
    for k in 0..rng.random_range(1..=6) {
        let (region, o) = random_step(rng, &obs);
        let next = unnormalized_update(&obs, &trans, &v, region, o).unwrap();
        let (a, b) = (v.as_vector(), next.as_vector());
        if trans.is_static() && b.iter().zip(a.iter()).any(|(n, p)| n > p) {
            return Err(format!("step {k}: entry grew from {a} to {b}"));
        }
        if b.sum() > a.sum() * (1.0 + MASS_TOL) || b.max() > 1.0 || b.min() <= 0.0 {
            return Err(format!("step {k}: v = {b} after {a}"));
        }
        v = next;
    }
    Ok(())
}

/// Summing `v` over every observation sequence of length `k <= 6`, with the
/// sensing region an arbitrary function of the history, gives total mass 1.
pub fn total_probability(rng: &mut ChaCha8Rng) -> Check {
    let obs = random_obs(rng);
    let trans = random_transition(rng, obs.num_env());
    let k = rng.random_range(1..=6);
    let root = UnnormalizedBelief::from_belief(&random_belief(rng, obs.num_env())).unwrap();
    let mut layer = vec![root];
    for _ in 0..k {
        let mut next = Vec::with_capacity(layer.len() * obs.num_obs());
        for v in &layer {
            let region = rng.random_range(0..obs.num_regions());
            for o in 0..obs.num_obs() {
                next.push(unnormalized_update(&obs, &trans, v, region, o).unwrap());
            }
        }
        layer = next;
    }
    let mass: f64 = layer.iter().map(|v| v.as_vector().sum()).sum();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(format!(
            "{} sequences of length {k} carry mass {mass}",
            layer.len()
        ));
    }
    Ok(())
}

/// Every inverse belief reachable by `k - 1` updates lies below
/// `z_upper_bound(k)`, checked over all region/observation sequences.
pub fn z_bound_dominates(rng: &mut ChaCha8Rng) -> Check {
    let obs = random_obs(rng);
    let z0 = InverseBelief::from_belief(&random_belief(rng, obs.num_env())).unwrap();
    let k = rng.random_range(1..=5);
    let bound = z_upper_bound(&obs, &z0, k);
    let mut layer = vec![z0];
    for _ in 1..k {
        let mut next = Vec::new();
        for z in &layer {
            for region in 0..obs.num_regions() {
                for o in 0..obs.num_obs() {
                    next.push(inverse_update(&obs, z, region, o).unwrap());
                }
            }
        }
        layer = next;
    }
    for z in &layer {
        for (zi, bi) in z.as_vector().iter().zip(bound.iter()) {
            if *zi > bi * (1.0 + 1e-12) {
                return Err(format!(
                    "z = {} exceeds bound {bound} at k = {k}",
                    z.as_vector()
                ));
            }
        }
    }
    Ok(())
}

pub type NamedCheck = (&'static str, fn(&mut ChaCha8Rng) -> Check);

pub const ALL: [NamedCheck; 5] = [
    ("simplex", simplex_preserved),
    ("duality", duality_holds),
    ("shrinkage", v_shrinks),
    ("total probability", total_probability),
    ("z bound", z_bound_dominates),
];
