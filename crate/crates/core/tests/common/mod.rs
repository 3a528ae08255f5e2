//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance harness.

#![allow(dead_code)]

use std::path::PathBuf;

use moclqr_core::belief::belief_update;
use moclqr_core::qp::{CscMatrix, TripletBuilder};
use moclqr_core::solver::{
    assemble_qp, constraint_violation, decision_slots, extract_tree, flatten_tree, WeightMode,
    SOLUTION_TOL,
};
use moclqr_core::{
    build_topology, load_scenario, solve_qp, Belief, CostSpec, CoverageMode, Goal, HorizonSpec,
    LinearSystem, ObservationModel, Polytope, QpProblem, QpSettings, QpStatus, RegionAssignment,
    RegionPartition, ScenarioSpec, TrajectoryTree, TransitionModel,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn scenario(name: &str) -> ScenarioSpec {
    load_scenario(scenario_path(name)).expect("bundled scenario loads")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..=scale))
}

fn random_diag(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(lo..=hi)))
}

/// Admissible `(N, N_b)` pairs with `N <= 6`, `N_b <= 3` and at most four
/// segments.
pub const HORIZONS: [(usize, usize); 9] = [
    (1, 1),
    (2, 1),
    (3, 1),
    (4, 1),
    (2, 2),
    (4, 2),
    (6, 2),
    (3, 3),
    (6, 3),
];

/// Random two-region, two-state instance. The regions are the two sides of a
/// random hyperplane through the neighbourhood of the initial state, so the
/// region choice matters.
pub fn random_instance(rng: &mut ChaCha8Rng, horizon: (usize, usize)) -> ScenarioSpec {
    let n = rng.random_range(2..=4);
    let d = rng.random_range(1..=2.min(n));
    random_instance_dims(rng, n, d, horizon, [0.55, 0.95])
}

pub fn random_instance_dims(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    horizon: (usize, usize),
    accuracy: [f64; 2],
) -> ScenarioSpec {
    let a = DMatrix::identity(n, n) + uniform_matrix(rng, n, n, 0.3);
    let b = uniform_matrix(rng, n, d, 1.0);
    let lo = vec![-20.0; n];
    let hi = vec![20.0; n];
    let mut c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    c[0] = if c[0] >= 0.0 { c[0] + 0.5 } else { c[0] - 0.5 };
    let t = rng.random_range(-0.5..=0.5);
    let half = |sign: f64| {
        Polytope::new(
            DMatrix::from_row_slice(1, n, (c.clone() * sign).as_slice()),
            DVector::from_element(1, sign * t),
        )
        .unwrap()
    };
    let p0 = rng.random_range(accuracy[0]..=accuracy[1]);
    let p1 = rng.random_range(accuracy[0]..=accuracy[1]);
    let goals = (0..2)
        .map(|_| Goal {
            state: DVector::from_fn(n, |_, _| rng.random_range(-3.0..=3.0)),
            input: DVector::zeros(d),
        })
        .collect();
    let b0 = rng.random_range(0.2..=0.8);
    let spec = ScenarioSpec {
        description: None,
        system: LinearSystem::new(a, b).unwrap(),
        input_set: Polytope::from_box(&vec![-3.0; d], &vec![3.0; d]).unwrap(),
        state_set: Polytope::from_box(&lo, &hi).unwrap(),
        partition: RegionPartition::new(vec![half(1.0), half(-1.0)], CoverageMode::Partition)
            .unwrap(),
        obs: ObservationModel::symmetric_accuracy(2, &[p0, p1]).unwrap(),
        trans: TransitionModel::static_env(2),
        cost: CostSpec::new(
            random_diag(rng, n, 0.1, 1.0),
            random_diag(rng, d, 0.05, 0.5),
            random_diag(rng, n, 1.0, 5.0),
            goals,
        )
        .unwrap(),
        horizon: HorizonSpec::new(horizon.0, horizon.1).unwrap(),
        x0: DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0)),
        b0: DVector::from_vec(vec![b0, 1.0 - b0]),
        obstacles: Vec::new(),
    };
    spec.validate().unwrap();
    spec
}

/// Copy of `spec` whose every region senses with the same table.
pub fn with_constant_obs(spec: &ScenarioSpec, p: f64) -> ScenarioSpec {
    let r = spec.num_regions();
    let mut s = spec.clone();
    s.obs = ObservationModel::symmetric_accuracy(2, &vec![p; r]).unwrap();
    s.validate().unwrap();
    s
}

// ---------------------------------------------------------------------------
// Expected cost in normalized-belief coordinates

/// Expected cost of a tree computed from normalized posteriors and path
/// likelihoods: each node contributes `P(path) * sum_e b_path[e] h(x, u, e)`.
pub fn normalized_expected_cost(
    spec: &ScenarioSpec,
    tree: &TrajectoryTree,
    assignment: &RegionAssignment,
) -> f64 {
    let topo = &tree.topology;
    let nb = topo.period();
    let mut posterior = vec![(Belief::new(spec.b0.clone()).unwrap(), 1.0); topo.len()];
    let mut total = 0.0;
    for node in topo.nodes() {
        let (b, prob) = posterior[node.id].clone();
        let seg = &tree.nodes[node.id];
        let mut acc = 0.0;
        for s in 0..nb {
            for e in 0..spec.num_env() {
                acc += b.as_vector()[e] * spec.cost.stage(&seg.states[s], &seg.inputs[s], e);
            }
        }
        if node.is_leaf() {
            for e in 0..spec.num_env() {
                acc += b.as_vector()[e] * spec.cost.terminal(&seg.states[nb], e);
            }
        } else {
            let region = assignment.measurement_region(topo, node.id).unwrap();
            for (o, &child) in node.children.iter().enumerate() {
                let (post, lik) = belief_update(&spec.obs, &spec.trans, &b, region, o).unwrap();
                posterior[child] = (post, prob * lik);
            }
        }
        total += prob * acc;
    }
    total
}

// ---------------------------------------------------------------------------
// Exhaustive completions

/// Exact cost of every complete assignment, `+inf` where infeasible.
pub fn all_assignment_costs(spec: &ScenarioSpec) -> Vec<(RegionAssignment, f64)> {
    let topo = build_topology(&spec.horizon, spec.num_obs());
    let slots = decision_slots(spec, &topo);
    let r = spec.num_regions();
    let total = r.pow(slots.len() as u32);
    (0..total)
        .map(|mut code| {
            let mut asg = RegionAssignment::new();
            for slot in &slots {
                asg.set(*slot, code % r);
                code /= r;
            }
            let assembled = assemble_qp(spec, &topo, &asg, WeightMode::Exact).unwrap();
            let sol = solve_qp(&assembled.qp, &QpSettings::default()).unwrap();
            let cost = match sol.status {
                QpStatus::Optimal => {
                    let tree = extract_tree(spec, &topo, &assembled, &sol.x).unwrap();
                    if constraint_violation(spec, &tree, &asg) <= SOLUTION_TOL {
                        assembled.cost(&flatten_tree(&assembled.layout, &tree))
                    } else {
                        f64::INFINITY
                    }
                }
                QpStatus::PrimalInfeasible => f64::INFINITY,
                s => panic!("completion QP ended with {s:?}"),
            };
            (asg, cost)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense QPs and the active-set oracle

#[derive(Debug, Clone)]
pub struct DenseQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

fn to_csc(m: &DMatrix<f64>, upper_only: bool) -> CscMatrix {
    let mut b = TripletBuilder::new(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if m[(r, c)] != 0.0 && (!upper_only || r <= c) {
                b.push(r, c, m[(r, c)]);
            }
        }
    }
    b.build()
}

impl DenseQp {
    pub fn to_problem(&self) -> QpProblem {
        QpProblem::new(
            to_csc(&self.p, true),
            self.q.as_slice().to_vec(),
            to_csc(&self.a, false),
            self.l.clone(),
            self.u.clone(),
        )
        .unwrap()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let ax = &self.a * x;
        (0..self.l.len())
            .map(|i| (self.l[i] - ax[i]).max(ax[i] - self.u[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Strictly convex random QP with a known feasible point. Rows are a mix of
/// upper, lower, two-sided and equality constraints.
pub fn random_dense_qp(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> DenseQp {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(0..=max_m);
    let f = uniform_matrix(rng, n, n, 1.0);
    let p = &f * f.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..=5.0));
    let a = uniform_matrix(rng, m, n, 1.0);
    let feasible = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let ax = &a * &feasible;
    let mut l = vec![f64::NEG_INFINITY; m];
    let mut u = vec![f64::INFINITY; m];
    let eq_budget = n.saturating_sub(1);
    let mut eqs = 0;
    for i in 0..m {
        let slack = rng.random_range(0.0..=1.0);
        match rng.random_range(0..10) {
            0..=4 => u[i] = ax[i] + slack,
            5..=6 => l[i] = ax[i] - slack,
            7..=8 => {
                l[i] = ax[i] - slack;
                u[i] = ax[i] + rng.random_range(0.0..=1.0);
            }
            _ if eqs < eq_budget => {
                l[i] = ax[i];
                u[i] = ax[i];
                eqs += 1;
            }
            _ => u[i] = ax[i] + slack,
        }
    }
    DenseQp { p, q, a, l, u }
}

/// Enumerates every active set of at most `n` rows (each inequality row
/// inactive, at its lower bound or at its upper bound; equality rows always
/// active), solves the equality-constrained KKT system and keeps the best
/// primal-feasible stationary point. Returns `None` when no candidate is
/// feasible.
pub fn active_set_oracle(qp: &DenseQp) -> Option<(DVector<f64>, f64)> {
    let m = qp.l.len();
    let mut choice = vec![0u8; m]; // 0 inactive, 1 lower, 2 upper, 3 equality
    let mut best: Option<(DVector<f64>, f64)> = None;
    fn options(l: f64, u: f64) -> Vec<u8> {
        if l == u {
            return vec![3];
        }
        let mut v = vec![0];
        if l.is_finite() {
            v.push(1);
        }
        if u.is_finite() {
            v.push(2);
        }
        v
    }
    let opts: Vec<Vec<u8>> = (0..m).map(|i| options(qp.l[i], qp.u[i])).collect();
    fn recurse(
        i: usize,
        active: usize,
        qp: &DenseQp,
        opts: &[Vec<u8>],
        choice: &mut Vec<u8>,
        best: &mut Option<(DVector<f64>, f64)>,
    ) {
        let n = qp.q.len();
        if active > n {
            return;
        }
        if i == opts.len() {
            if let Some(x) = solve_kkt(qp, choice) {
                let scale = 1.0 + x.amax();
                if qp.max_violation(&x) <= 1e-9 * scale {
                    let f = qp.objective(&x);
                    if best.as_ref().is_none_or(|b| f < b.1) {
                        *best = Some((x, f));
                    }
                }
            }
            return;
        }
        for &c in &opts[i] {
            choice[i] = c;
            recurse(i + 1, active + usize::from(c != 0), qp, opts, choice, best);
        }
        choice[i] = 0;
    }
    recurse(0, 0, qp, &opts, &mut choice, &mut best);
    best
}

fn solve_kkt(qp: &DenseQp, choice: &[u8]) -> Option<DVector<f64>> {
    let n = qp.q.len();
    let rows: Vec<(usize, f64)> = choice
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| match c {
            1 => Some((i, qp.l[i])),
            2 | 3 => Some((i, qp.u[i])),
            _ => None,
        })
        .collect();
    let k = rows.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&qp.q));
    for (j, &(i, b)) in rows.iter().enumerate() {
        for c in 0..n {
            kkt[(n + j, c)] = qp.a[(i, c)];
            kkt[(c, n + j)] = qp.a[(i, c)];
        }
        rhs[n + j] = b;
    }
    let svd = kkt.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax.max(1.0) {
        return None;
    }
    let sol = kkt.lu().solve(&rhs)?;
    Some(sol.rows(0, n).into_owned())
}

// ---------------------------------------------------------------------------
// Condensed single-trajectory QP

/// Optimal cost of the unbranched problem with constant weights `b0` when
/// no constraint is active: inputs are eliminated through the dynamics and
/// the resulting unconstrained quadratic is minimized directly.
pub fn condensed_single_path_cost(spec: &ScenarioSpec) -> f64 {
    let n = spec.state_dim();
    let d = spec.input_dim();
    let horizon = spec.horizon.horizon();
    let a = spec.system.a();
    let b = spec.system.b();
    // x_k = Phi_k x0 + Gamma_k u, with u = [u_0; ...; u_{N-1}].
    let nu = d * horizon;
    let mut phi = vec![DMatrix::identity(n, n)];
    let mut gamma = vec![DMatrix::zeros(n, nu)];
    for k in 0..horizon {
        let next_phi = a * &phi[k];
        let mut next_gamma = a * &gamma[k];
        let mut block = next_gamma.view_mut((0, k * d), (n, d));
        block += b;
        phi.push(next_phi);
        gamma.push(next_gamma);
    }
    let mut h = DMatrix::zeros(nu, nu);
    let mut f = DVector::zeros(nu);
    let mut c = 0.0;
    let x0 = &spec.x0;
    for (e, goal) in spec.cost.goals().iter().enumerate() {
        let w = spec.b0[e];
        for k in 0..=horizon {
            let weight = if k == horizon {
                spec.cost.qn()
            } else {
                spec.cost.q()
            };
            let r0 = &phi[k] * x0 - &goal.state;
            let g = &gamma[k];
            h += (g.transpose() * weight * g) * w;
            f += (g.transpose() * weight * &r0) * w;
            c += w * r0.dot(&(weight * &r0));
        }
        for k in 0..horizon {
            let mut block = h.view_mut((k * d, k * d), (d, d));
            block += spec.cost.r() * w;
            let ru = spec.cost.r() * &goal.input;
            for j in 0..d {
                f[k * d + j] -= w * ru[j];
            }
            c += w * goal.input.dot(&ru);
        }
    }
    let u = h
        .clone()
        .cholesky()
        .expect("input weights are positive definite")
        .solve(&(-&f));
    u.dot(&(&h * &u)) + 2.0 * f.dot(&u) + c
}

pub mod belief_checks;
pub mod example2;
pub mod solver_checks;
