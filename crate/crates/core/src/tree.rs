//! Observation-indexed trajectory-tree topology.
//!
//! The horizon `N = P * N_b` is cut into `P` segments. Every tree node owns one
//! segment: it applies `N_b` inputs and owns the `N_b` states that follow
//! them. The state at a branch time `k = j * N_b` therefore belongs to the
//! parent; each child starts from it after incorporating its observation.
//! Nodes are numbered breadth-first with siblings ordered by observation label.

use nalgebra::DVector;

use crate::belief::{Belief, InverseBelief, UnnormalizedBelief};
use crate::model::{HorizonSpec, LinearSystem};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchSchedule {
    pub horizon: usize,
    pub period: usize,
    pub segments: usize,
    pub num_obs: usize,
}

impl BranchSchedule {
    pub fn new(horizon: &HorizonSpec, num_obs: usize) -> Self {
        Self {
            horizon: horizon.horizon(),
            period: horizon.period(),
            segments: horizon.segments(),
            num_obs,
        }
    }

    /// `j(k) = floor(k / N_b)`: number of observations incorporated before
    /// the input at step `k` is applied.
    pub fn depth_at(&self, k: usize) -> usize {
        k / self.period
    }

    /// Steps at which an observation is collected inside the horizon.
    pub fn is_measurement_step(&self, k: usize) -> bool {
        k > 0 && k < self.horizon && k.is_multiple_of(self.period)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: NodeId,
    pub depth: usize,
    /// Observation labels collected on the way from the root.
    pub path: Vec<usize>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub first_step: usize,
}

impl TreeNode {
    pub fn obs_label(&self) -> Option<usize> {
        self.path.last().copied()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Global steps `[first, first + N_b)` whose inputs this node owns.
    pub fn step_range(&self, period: usize) -> std::ops::Range<usize> {
        self.first_step..self.first_step + period
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    schedule: BranchSchedule,
    nodes: Vec<TreeNode>,
}

/// Complete `|O|`-ary tree with `P` levels, numbered breadth-first.
pub fn build_topology(horizon: &HorizonSpec, num_obs: usize) -> Topology {
    let schedule = BranchSchedule::new(horizon, num_obs);
    let mut nodes = vec![TreeNode {
        id: 0,
        depth: 0,
        path: Vec::new(),
        parent: None,
        children: Vec::new(),
        first_step: 0,
    }];
    let mut level = vec![0];
    for depth in 1..schedule.segments {
        let mut next = Vec::with_capacity(level.len() * num_obs);
        for &parent in &level {
            for o in 0..num_obs {
                let id = nodes.len();
                let mut path = nodes[parent].path.clone();
                path.push(o);
                nodes.push(TreeNode {
                    id,
                    depth,
                    path,
                    parent: Some(parent),
                    children: Vec::new(),
                    first_step: depth * schedule.period,
                });
                nodes[parent].children.push(id);
                next.push(id);
            }
        }
        level = next;
    }
    Topology { schedule, nodes }
}

impl Topology {
    pub fn schedule(&self) -> &BranchSchedule {
        &self.schedule
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn period(&self) -> usize {
        self.schedule.period
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    pub fn node_by_path(&self, path: &[usize]) -> Option<NodeId> {
        let mut id = 0;
        for &o in path {
            id = *self.nodes[id].children.get(o)?;
        }
        Some(id)
    }

    /// Node ids from the root down to `id`.
    pub fn ancestry(&self, id: NodeId) -> Vec<NodeId> {
        let mut chain = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Number of planned inputs, `sum_j N_b |O|^j`.
    pub fn total_control_steps(&self) -> usize {
        self.nodes.len() * self.schedule.period
    }
}

/// Input count of the unapproximated tree (branching at every step):
/// `d * sum_{k<N} |O|^k`. `None` on overflow.
pub fn count_exact_variables(horizon: usize, num_obs: usize, input_dim: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for k in 0..horizon {
        total = total.checked_add(level)?;
        if k + 1 < horizon {
            level = level.checked_mul(num_obs as u128)?;
        }
    }
    total.checked_mul(input_dim as u128)
}

/// Observation sequences of the leaves, in lexicographic order.
pub fn leaf_paths(topology: &Topology) -> Vec<Vec<usize>> {
    topology.leaves().map(|n| n.path.clone()).collect()
}

/// Position of one decision variable in the flat QP vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    /// Input applied at local step `step` of `node`.
    Input {
        node: NodeId,
        step: usize,
        component: usize,
    },
    /// State reached after local step `step` (i.e. at local time `step + 1`).
    State {
        node: NodeId,
        step: usize,
        component: usize,
    },
}

/// Flat index layout: one contiguous block per node, and inside each block
/// `[u_0, x_1, u_1, x_2, ...]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub state_dim: usize,
    pub input_dim: usize,
    pub period: usize,
    pub num_nodes: usize,
}

impl VarLayout {
    pub fn new(topology: &Topology, state_dim: usize, input_dim: usize) -> Self {
        Self {
            state_dim,
            input_dim,
            period: topology.period(),
            num_nodes: topology.len(),
        }
    }

    fn stride(&self) -> usize {
        self.state_dim + self.input_dim
    }

    pub fn len(&self) -> usize {
        self.num_nodes * self.period * self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_index(&self, node: NodeId, step: usize) -> usize {
        (node * self.period + step) * self.stride()
    }

    pub fn state_index(&self, node: NodeId, step: usize) -> usize {
        self.input_index(node, step) + self.input_dim
    }

    pub fn locate(&self, index: usize) -> Option<VarRef> {
        if index >= self.len() {
            return None;
        }
        let block = index / self.stride();
        let offset = index % self.stride();
        let node = block / self.period;
        let step = block % self.period;
        Some(if offset < self.input_dim {
            VarRef::Input {
                node,
                step,
                component: offset,
            }
        } else {
            VarRef::State {
                node,
                step,
                component: offset - self.input_dim,
            }
        })
    }

    pub fn index_of(&self, var: VarRef) -> usize {
        match var {
            VarRef::Input {
                node,
                step,
                component,
            } => self.input_index(node, step) + component,
            VarRef::State {
                node,
                step,
                component,
            } => self.state_index(node, step) + component,
        }
    }
}

/// Trajectory segment owned by one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrajectory {
    pub node: NodeId,
    /// `N_b + 1` states; the first is the parent's last state (or `x0`).
    pub states: Vec<DVector<f64>>,
    /// `N_b` inputs.
    pub inputs: Vec<DVector<f64>>,
    pub belief: Belief,
    pub unnormalized: UnnormalizedBelief,
    pub inverse: InverseBelief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTree {
    pub topology: Topology,
    pub nodes: Vec<NodeTrajectory>,
}

impl TrajectoryTree {
    /// Largest `|x_{k+1} - A x_k - B u_k|` over the tree, including the
    /// hand-off between parent and child segments.
    pub fn dynamics_residual(&self, system: &LinearSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for seg in &self.nodes {
            for (s, u) in seg.inputs.iter().enumerate() {
                let r = &seg.states[s + 1] - system.step(&seg.states[s], u);
                worst = worst.max(r.amax());
            }
            if let Some(p) = self.topology.node(seg.node).parent {
                let r = &seg.states[0] - self.nodes[p].states.last().unwrap();
                worst = worst.max(r.amax());
            }
        }
        worst
    }

    /// States and inputs along the root-to-`leaf` branch, `N + 1` states and
    /// `N` inputs.
    pub fn branch(&self, leaf: NodeId) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for id in self.topology.ancestry(leaf) {
            let seg = &self.nodes[id];
            if xs.is_empty() {
                xs.push(seg.states[0].clone());
            }
            xs.extend(seg.states[1..].iter().cloned());
            us.extend(seg.inputs.iter().cloned());
        }
        (xs, us)
    }
}
