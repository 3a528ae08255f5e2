//! Tree JSON and table CSV writers, plus a re-validator for tree files.

use std::io::{self, Write};
use std::path::Path;

use moclqr_core::solver::{measurement_slot, slot_state, RegionAssignment};
use moclqr_core::{Error, Result, ScenarioSpec, Solution, TrajectoryTree};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, Serializer};

/// JSON formatter that prints every float with 17 significant digits and
/// non-finite values as `null`.
#[derive(Debug, Default, Clone, Copy)]
pub struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` with [`SeventeenDigits`].
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SeventeenDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// Absent at the segment's last state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionRecord {
    pub k: usize,
    pub region: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub obs_label: Option<usize>,
    pub depth: usize,
    pub steps: Vec<StepRecord>,
    pub belief: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub region_assignment: Vec<RegionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TreeFile {
    pub cost: f64,
    pub gap: Option<f64>,
    pub nodes: Vec<NodeRecord>,
}

impl TreeFile {
    pub fn from_solution(solution: &Solution) -> Self {
        let tree = &solution.tree;
        let topo = &tree.topology;
        let period = topo.period();
        let nodes = topo
            .nodes()
            .iter()
            .map(|node| {
                let seg = &tree.nodes[node.id];
                let first = node.depth * period;
                let steps = seg
                    .states
                    .iter()
                    .enumerate()
                    .map(|(s, x)| StepRecord {
                        k: first + s,
                        x: x.as_slice().to_vec(),
                        u: seg.inputs.get(s).map(|u| u.as_slice().to_vec()),
                    })
                    .collect();
                let region_assignment = solution
                    .assignment
                    .iter()
                    .filter(|(slot, _)| slot.node == node.id)
                    .map(|(slot, region)| RegionRecord {
                        k: first + slot.step,
                        region,
                    })
                    .collect();
                NodeRecord {
                    id: node.id,
                    parent: node.parent,
                    obs_label: node.obs_label(),
                    depth: node.depth,
                    steps,
                    belief: seg.belief.as_vector().as_slice().to_vec(),
                    v: seg.unnormalized.as_vector().as_slice().to_vec(),
                    z: seg.inverse.as_vector().as_slice().to_vec(),
                    region_assignment,
                }
            })
            .collect();
        Self {
            cost: solution.cost,
            gap: Some(solution.gap).filter(|g| g.is_finite()),
            nodes,
        }
    }
}

pub fn write_tree(solution: &Solution, path: &Path) -> Result<()> {
    let text = to_json_17(&TreeFile::from_solution(solution))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Worst residuals found in a tree file.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeCheck {
    pub dynamics_residual: f64,
    pub constraint_violation: f64,
    pub belief_error: f64,
}

pub const TREE_DYNAMICS_TOL: f64 = 1e-8;
pub const TREE_CONSTRAINT_TOL: f64 = 1e-6;
pub const TREE_BELIEF_TOL: f64 = 1e-10;

impl TreeCheck {
    pub fn passes(&self) -> bool {
        self.dynamics_residual <= TREE_DYNAMICS_TOL
            && self.constraint_violation <= TREE_CONSTRAINT_TOL
            && self.belief_error <= TREE_BELIEF_TOL
    }
}

/// Re-reads a tree file and measures dynamics residuals (including the
/// hand-off between parent and child), state/input/region violations and the
/// distance of every belief from the simplex.
pub fn validate_tree_file(path: &Path, spec: &ScenarioSpec) -> Result<TreeCheck> {
    let text = std::fs::read_to_string(path)?;
    let file: TreeFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut check = TreeCheck {
        dynamics_residual: 0.0,
        constraint_violation: 0.0,
        belief_error: 0.0,
    };
    let vec = |v: &[f64]| DVector::from_column_slice(v);
    for node in &file.nodes {
        for pair in node.steps.windows(2) {
            let u = pair[0]
                .u
                .as_ref()
                .ok_or_else(|| Error::Parse(format!("node {} misses an input", node.id)))?;
            let next = spec.system.step(&vec(&pair[0].x), &vec(u));
            let r = (next - vec(&pair[1].x)).amax();
            check.dynamics_residual = check.dynamics_residual.max(r);
            check.constraint_violation = check
                .constraint_violation
                .max(spec.input_set.max_violation(&vec(u)));
        }
        for step in &node.steps {
            check.constraint_violation = check
                .constraint_violation
                .max(spec.state_set.max_violation(&vec(&step.x)));
        }
        if let Some(p) = node.parent {
            let parent =
                file.nodes.iter().find(|n| n.id == p).ok_or_else(|| {
                    Error::Parse(format!("node {} has unknown parent {p}", node.id))
                })?;
            let (a, b) = (parent.steps.last(), node.steps.first());
            if let (Some(a), Some(b)) = (a, b) {
                let r = (vec(&a.x) - vec(&b.x)).amax();
                check.dynamics_residual = check.dynamics_residual.max(r);
            }
        }
        for rec in &node.region_assignment {
            let poly = spec
                .partition
                .region(rec.region)
                .ok_or_else(|| Error::IndexOutOfRange(format!("region {}", rec.region)))?;
            let step =
                node.steps.iter().find(|s| s.k == rec.k).ok_or_else(|| {
                    Error::Parse(format!("node {} has no step {}", node.id, rec.k))
                })?;
            check.constraint_violation = check
                .constraint_violation
                .max(poly.max_violation(&vec(&step.x)));
        }
        let sum: f64 = node.belief.iter().sum();
        let neg = node.belief.iter().fold(0.0_f64, |m, b| m.max(-b));
        check.belief_error = check.belief_error.max((sum - 1.0).abs()).max(neg);
    }
    Ok(check)
}

/// States at every measurement slot, in breadth-first node order.
pub fn measurement_states(tree: &TrajectoryTree) -> Vec<DVector<f64>> {
    tree.topology
        .internal_nodes()
        .map(|n| slot_state(tree, measurement_slot(&tree.topology, n.id)).clone())
        .collect()
}

/// Regions chosen at the measurement slots, in breadth-first node order.
pub fn measurement_regions(tree: &TrajectoryTree, assignment: &RegionAssignment) -> Vec<usize> {
    tree.topology
        .internal_nodes()
        .filter_map(|n| assignment.measurement_region(&tree.topology, n.id))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub nb: usize,
    pub segments: usize,
    pub cost: f64,
    pub time_s: f64,
    pub gap: f64,
}

pub const TABLE1_HEADER: &str = "Nb,P,cost,time_s,gap";

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = String::from(TABLE1_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.nb, r.segments, r.cost, r.time_s, r.gap
        ));
    }
    out
}
