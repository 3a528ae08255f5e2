//! Closed-loop Monte-Carlo evaluation of a planned tree.
//!
//! Rollout `i` draws from ChaCha20 seeded with `seed` on stream `i`, so every
//! rollout is reproducible on its own and independent of how rollouts are
//! sharded.

use moclqr_core::{Error, Result, ScenarioSpec, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutRecord {
    /// Sampled true environment state.
    pub env_state: usize,
    pub observations: Vec<usize>,
    /// Leaf node reached.
    pub leaf: usize,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// Realized cost under `env_state`.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub rollouts: usize,
    pub seed: u64,
    pub mean_cost: f64,
    pub std_error: f64,
    pub planner_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutput {
    pub summary: SimulationSummary,
    pub records: Vec<RolloutRecord>,
}

fn sample_categorical(rng: &mut ChaCha20Rng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// One rollout: sample `e*` from `b0`, then at every branch sample the
/// observation from the table of the region the plan assigned to the
/// branch-time state, and follow the matching child.
pub fn rollout(
    spec: &ScenarioSpec,
    plan: &Solution,
    seed: u64,
    index: u64,
) -> Result<RolloutRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let topo = &plan.tree.topology;
    let env = sample_categorical(&mut rng, spec.b0.iter().copied());
    let mut node = 0;
    let mut observations = Vec::new();
    while !topo.node(node).is_leaf() {
        let region = plan
            .assignment
            .measurement_region(topo, node)
            .ok_or_else(|| Error::Validation(format!("node {node} has no measurement region")))?;
        let table = spec.obs.table(region)?;
        let o = sample_categorical(&mut rng, table.row(env).iter().copied());
        observations.push(o);
        node = *topo.node(node).children.get(o).ok_or_else(|| {
            Error::Numerical(format!("node {node} has no branch for observation {o}"))
        })?;
    }
    let (xs, us) = plan.tree.branch(node);
    let mut cost = 0.0;
    for (x, u) in xs.iter().zip(&us) {
        cost += spec.cost.stage(x, u, env);
    }
    cost += spec
        .cost
        .terminal(xs.last().expect("branch has states"), env);
    Ok(RolloutRecord {
        env_state: env,
        observations,
        leaf: node,
        states: xs.iter().map(|x| x.as_slice().to_vec()).collect(),
        inputs: us.iter().map(|u| u.as_slice().to_vec()).collect(),
        cost,
    })
}

pub fn simulate_rollouts(
    spec: &ScenarioSpec,
    plan: &Solution,
    rollouts: usize,
    seed: u64,
) -> Result<SimulationOutput> {
    let records = (0..rollouts as u64)
        .map(|i| rollout(spec, plan, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.cost).sum::<f64>() / n;
    let var = if records.len() > 1 {
        records.iter().map(|r| (r.cost - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(SimulationOutput {
        summary: SimulationSummary {
            rollouts,
            seed,
            mean_cost: mean,
            std_error: (var / n).sqrt(),
            planner_cost: plan.cost,
        },
        records,
    })
}
