use crate::belief::{unnormalized_update, Belief, UnnormalizedBelief};
use crate::error::{Error, Result};
use crate::model::ScenarioSpec;
use crate::tree::TrajectoryTree;

use super::assignment::RegionAssignment;

/// Expected cost of `tree` under `assignment`, computed by propagating the
/// unnormalized belief down the tree and summing every weighted stage cost.
/// Ignores the beliefs stored in the tree.
pub fn evaluate_cost(
    spec: &ScenarioSpec,
    tree: &TrajectoryTree,
    assignment: &RegionAssignment,
) -> Result<f64> {
    let topo = &tree.topology;
    let period = spec.horizon.period();
    if topo.period() != period || tree.nodes.len() != topo.len() {
        return Err(Error::validation(
            "tree does not match the scenario horizon",
        ));
    }
    let mut v: Vec<UnnormalizedBelief> = Vec::with_capacity(topo.len());
    let mut total = 0.0;
    for node in topo.nodes() {
        let weights = match node.parent {
            None => UnnormalizedBelief::from_belief(&Belief::new(spec.b0.clone())?)?,
            Some(p) => {
                let region = assignment.measurement_region(topo, p).ok_or_else(|| {
                    Error::validation(format!("measurement slot of node {p} is unassigned"))
                })?;
                let o = node.obs_label().expect("non-root node has a label");
                unnormalized_update(&spec.obs, &spec.trans, &v[p], region, o)?
            }
        };
        let seg = &tree.nodes[node.id];
        if seg.states.len() != period + 1 || seg.inputs.len() != period {
            return Err(Error::validation(format!(
                "node {} has a malformed trajectory segment",
                node.id
            )));
        }
        for (e, w) in weights.as_vector().iter().enumerate() {
            for s in 0..period {
                total += w * spec.cost.stage(&seg.states[s], &seg.inputs[s], e);
            }
            if node.is_leaf() {
                total += w * spec.cost.terminal(&seg.states[period], e);
            }
        }
        v.push(weights);
    }
    Ok(total)
}
