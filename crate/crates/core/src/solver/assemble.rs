//! Tree-coupled QP assembly for a (possibly partial) region assignment.
//!
//! With the measurement regions fixed, every inverse belief `z` on the tree is
//! a constant, and the objective is the sum over nodes of the stage costs
//! `h(x, u, e)` weighted by `1 / z[e]`. Uncommitted measurement slots use the
//! smallest likelihood any region could produce, so the QP value bounds every
//! completion from below.

use nalgebra::{DMatrix, DVector};

use crate::belief::{
    unnormalized_update, z_upper_bound, Belief, InverseBelief, UnnormalizedBelief,
};
use crate::error::{Error, Result};
use crate::model::{Polytope, ScenarioSpec};
use crate::qp::{QpProblem, TripletBuilder};
use crate::tree::{NodeTrajectory, Topology, TrajectoryTree, VarLayout};

use super::assignment::{RegionAssignment, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Every measurement slot must be assigned.
    Exact,
    /// Uncommitted measurement slots use `min_i M_i(e, o)`.
    Optimistic,
}

/// Inverse beliefs at every node, root first.
pub fn node_inverse_beliefs(
    spec: &ScenarioSpec,
    topology: &Topology,
    assignment: &RegionAssignment,
    mode: WeightMode,
) -> Result<Vec<InverseBelief>> {
    let root = UnnormalizedBelief::from_belief(&Belief::new(spec.b0.clone())?)?;
    propagate_weights(spec, topology, assignment, mode, root)
}

fn propagate_weights(
    spec: &ScenarioSpec,
    topology: &Topology,
    assignment: &RegionAssignment,
    mode: WeightMode,
    root: UnnormalizedBelief,
) -> Result<Vec<InverseBelief>> {
    let z0 = root.to_inverse();
    let mut v: Vec<UnnormalizedBelief> = Vec::with_capacity(topology.len());
    v.push(root);
    for node in topology.nodes().iter().skip(1) {
        let parent = node.parent.expect("non-root node has a parent");
        let o = node.obs_label().expect("non-root node has a label");
        let vp = &v[parent];
        let next = match (assignment.measurement_region(topology, parent), mode) {
            (Some(region), _) => unnormalized_update(&spec.obs, &spec.trans, vp, region, o)?,
            (None, WeightMode::Optimistic) => {
                let mixed = spec.trans.omega() * vp.as_vector();
                UnnormalizedBelief::new(DVector::from_fn(spec.num_env(), |e, _| {
                    spec.obs.min_over_regions(e, o) * mixed[e]
                }))?
            }
            (None, WeightMode::Exact) => {
                return Err(Error::validation(format!(
                    "measurement slot of node {parent} is unassigned"
                )))
            }
        };
        if spec.trans.is_static() {
            let bound = z_upper_bound(&spec.obs, &z0, node.depth + 1);
            let z = next.to_inverse();
            if z.as_vector()
                .iter()
                .zip(bound.iter())
                .any(|(zi, bi)| *zi > bi * (1.0 + 1e-12))
            {
                return Err(Error::Numerical(format!(
                    "inverse belief at node {} exceeds its a-priori bound",
                    node.id
                )));
            }
        }
        v.push(next);
    }
    Ok(v.iter().map(UnnormalizedBelief::to_inverse).collect())
}

/// QP plus the bookkeeping needed to read a trajectory tree back out of it.
#[derive(Debug, Clone)]
pub struct AssembledQp {
    pub qp: QpProblem,
    /// Objective terms that do not depend on the decision vector.
    pub constant: f64,
    pub layout: VarLayout,
    /// Per-node inverse beliefs; the cost weights are their reciprocals.
    pub weights: Vec<InverseBelief>,
    pub x0: DVector<f64>,
}

impl AssembledQp {
    /// Value of the original (inverse-belief weighted) objective at `x`.
    pub fn cost(&self, x: &[f64]) -> f64 {
        self.qp.objective(x) + self.constant
    }
}

/// Exact QP for a complete assignment.
pub fn assemble_fixed_assignment_qp(
    spec: &ScenarioSpec,
    topology: &Topology,
    assignment: &RegionAssignment,
) -> Result<AssembledQp> {
    if !assignment.is_complete(spec, topology) {
        return Err(Error::validation("assignment is not complete"));
    }
    assemble_qp(spec, topology, assignment, WeightMode::Exact)
}

struct Builder {
    layout: VarLayout,
    p: TripletBuilder,
    q: Vec<f64>,
    constant: f64,
    a: TripletBuilder,
    l: Vec<f64>,
    u: Vec<f64>,
}

impl Builder {
    /// Adds `sum_e w[e] |y - target_e|_M^2` for the variable block at
    /// `offset`, or for the constant `fixed` when there is no block.
    fn weighted_quadratic(
        &mut self,
        offset: Option<usize>,
        fixed: Option<&DVector<f64>>,
        m: &DMatrix<f64>,
        weights: &DVector<f64>,
        targets: &[&DVector<f64>],
    ) {
        match offset {
            Some(off) => {
                let total: f64 = weights.sum();
                let dim = m.nrows();
                let mut center = DVector::zeros(dim);
                for (w, t) in weights.iter().zip(targets) {
                    center += *t * *w;
                    self.constant += w * t.dot(&(m * *t));
                }
                let lin = m * center * -2.0;
                for i in 0..dim {
                    self.q[off + i] += lin[i];
                    for j in i..dim {
                        let mij = 0.5 * (m[(i, j)] + m[(j, i)]);
                        self.p.push(off + i, off + j, 2.0 * total * mij);
                    }
                }
            }
            None => {
                let x = fixed.expect("constant block needs a value");
                for (w, t) in weights.iter().zip(targets) {
                    let d = x - *t;
                    self.constant += w * d.dot(&(m * &d));
                }
            }
        }
    }

    fn polytope_rows(&mut self, poly: &Polytope, offset: usize) {
        let h = poly.h_mat();
        for r in 0..h.nrows() {
            let row = self.a.add_row();
            for c in 0..h.ncols() {
                self.a.push(row, offset + c, h[(r, c)]);
            }
            self.l.push(f64::NEG_INFINITY);
            self.u.push(poly.h_vec()[r]);
        }
    }
}

/// Assembles the QP for `assignment` under the given weight mode. Region
/// membership constraints are added for every assigned slot.
pub fn assemble_qp(
    spec: &ScenarioSpec,
    topology: &Topology,
    assignment: &RegionAssignment,
    mode: WeightMode,
) -> Result<AssembledQp> {
    let root = UnnormalizedBelief::from_belief(&Belief::new(spec.b0.clone())?)?;
    assemble_qp_from(spec, topology, assignment, mode, &spec.x0, root)
}

/// [`assemble_qp`] from an arbitrary initial state and root weight vector
/// `v0 = 1 / z0`, which need not be normalized.
pub fn assemble_qp_from(
    spec: &ScenarioSpec,
    topology: &Topology,
    assignment: &RegionAssignment,
    mode: WeightMode,
    x0: &DVector<f64>,
    root: UnnormalizedBelief,
) -> Result<AssembledQp> {
    assignment.check_regions(spec.num_regions())?;
    if x0.len() != spec.state_dim() {
        return Err(Error::validation("initial state has the wrong dimension"));
    }
    let weights = propagate_weights(spec, topology, assignment, mode, root)?;
    let n = spec.state_dim();
    let d = spec.input_dim();
    let layout = VarLayout::new(topology, n, d);
    let nv = layout.len();
    let period = topology.period();

    let mut b = Builder {
        layout,
        p: TripletBuilder::new(nv, nv),
        q: vec![0.0; nv],
        constant: 0.0,
        a: TripletBuilder::new(0, nv),
        l: Vec::new(),
        u: Vec::new(),
    };
    let cost = &spec.cost;
    let state_goals: Vec<&DVector<f64>> = cost.goals().iter().map(|g| &g.state).collect();
    let input_goals: Vec<&DVector<f64>> = cost.goals().iter().map(|g| &g.input).collect();
    let a_mat = spec.system.a();
    let b_mat = spec.system.b();
    let ax0 = a_mat * x0;

    for node in topology.nodes() {
        let w = weights[node.id].to_unnormalized().as_vector().clone();
        // Index of the state at local time 0, if it is a decision variable.
        let start = node.parent.map(|p| b.layout.state_index(p, period - 1));
        for s in 0..period {
            let prev = if s == 0 {
                start
            } else {
                Some(b.layout.state_index(node.id, s - 1))
            };
            b.weighted_quadratic(prev, Some(x0), cost.q(), &w, &state_goals);
            let ui = b.layout.input_index(node.id, s);
            b.weighted_quadratic(Some(ui), None, cost.r(), &w, &input_goals);

            // x_{s+1} - A x_s - B u_s = 0
            let xi = b.layout.state_index(node.id, s);
            for i in 0..n {
                let row = b.a.add_row();
                b.a.push(row, xi + i, 1.0);
                if let Some(pi) = prev {
                    for j in 0..n {
                        b.a.push(row, pi + j, -a_mat[(i, j)]);
                    }
                }
                for j in 0..d {
                    b.a.push(row, ui + j, -b_mat[(i, j)]);
                }
                let rhs = if prev.is_none() { ax0[i] } else { 0.0 };
                b.l.push(rhs);
                b.u.push(rhs);
            }
            b.polytope_rows(&spec.input_set, ui);
            b.polytope_rows(&spec.state_set, xi);
        }
        if node.is_leaf() {
            let xn = b.layout.state_index(node.id, period - 1);
            b.weighted_quadratic(Some(xn), None, cost.qn(), &w, &state_goals);
        }
    }

    for (Slot { node, step }, region) in assignment.iter() {
        let poly = spec
            .partition
            .region(region)
            .expect("region index checked above");
        let xi = b.layout.state_index(node, step - 1);
        b.polytope_rows(poly, xi);
    }

    let Builder {
        p,
        q,
        constant,
        a,
        l,
        u,
        layout,
        ..
    } = b;
    let qp = QpProblem::new(p.build(), q, a.build(), l, u)?;
    Ok(AssembledQp {
        qp,
        constant,
        layout,
        weights,
        x0: x0.clone(),
    })
}

/// Reads the inputs out of `x` and rolls the dynamics forward from `x0`, so the
/// returned tree is dynamics-consistent to machine precision.
pub fn extract_tree(
    spec: &ScenarioSpec,
    topology: &Topology,
    assembled: &AssembledQp,
    x: &[f64],
) -> Result<TrajectoryTree> {
    let layout = &assembled.layout;
    let d = spec.input_dim();
    let period = topology.period();
    let mut nodes: Vec<NodeTrajectory> = Vec::with_capacity(topology.len());
    for node in topology.nodes() {
        let start = match node.parent {
            Some(p) => nodes[p].states[period].clone(),
            None => assembled.x0.clone(),
        };
        let mut states = Vec::with_capacity(period + 1);
        let mut inputs = Vec::with_capacity(period);
        states.push(start);
        for s in 0..period {
            let ui = layout.input_index(node.id, s);
            let u = DVector::from_column_slice(&x[ui..ui + d]);
            let next = spec.system.step(&states[s], &u);
            states.push(next);
            inputs.push(u);
        }
        let z = assembled.weights[node.id].clone();
        let v = z.to_unnormalized();
        nodes.push(NodeTrajectory {
            node: node.id,
            states,
            inputs,
            belief: v.normalized(),
            unnormalized: v,
            inverse: z,
        });
    }
    Ok(TrajectoryTree {
        topology: topology.clone(),
        nodes,
    })
}

/// Inverse of [`extract_tree`]: the flat decision vector of a tree.
pub fn flatten_tree(layout: &VarLayout, tree: &TrajectoryTree) -> Vec<f64> {
    let mut x = vec![0.0; layout.len()];
    for seg in &tree.nodes {
        for (s, u) in seg.inputs.iter().enumerate() {
            let ui = layout.input_index(seg.node, s);
            x[ui..ui + u.len()].copy_from_slice(u.as_slice());
            let xi = layout.state_index(seg.node, s);
            let st = &seg.states[s + 1];
            x[xi..xi + st.len()].copy_from_slice(st.as_slice());
        }
    }
    x
}

/// Worst violation of the state set, input set and assigned region
/// memberships along `tree`.
pub fn constraint_violation(
    spec: &ScenarioSpec,
    tree: &TrajectoryTree,
    assignment: &RegionAssignment,
) -> f64 {
    let mut worst: f64 = 0.0;
    for seg in &tree.nodes {
        for x in &seg.states {
            worst = worst.max(spec.state_set.max_violation(x));
        }
        for u in &seg.inputs {
            worst = worst.max(spec.input_set.max_violation(u));
        }
    }
    for (slot, region) in assignment.iter() {
        if let (Some(poly), Some(seg)) = (spec.partition.region(region), tree.nodes.get(slot.node))
        {
            worst = worst.max(poly.max_violation(&seg.states[slot.step]));
        }
    }
    worst.max(0.0)
}

/// State at `slot` in `tree`.
pub fn slot_state(tree: &TrajectoryTree, slot: Slot) -> &DVector<f64> {
    &tree.nodes[slot.node].states[slot.step]
}
