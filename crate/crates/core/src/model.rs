//! Problem-instance data model.
//!
//! A [`ScenarioSpec`] bundles everything the planner needs: linear dynamics,
//! polytopic state and input sets, the region partition on which the
//! observation model is piecewise constant, the environment transition
//! model, quadratic costs and the horizon/branching parameters. All types
//! are immutable once validated.
//!
//! Region, environment-state and observation indices are zero-based
//! throughout the crate.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when testing whether a state lies in a closed polytope.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

const PROB_SUM_TOL: f64 = 1e-12;
const PSD_EIG_FLOOR: f64 = -1e-10;
const SYMMETRY_TOL: f64 = 1e-12;
const BELIEF_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::validation(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::validation(format!(
                "B must be {n}xd with d >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// The set `{y : H y <= h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    h_mat: DMatrix<f64>,
    h_vec: DVector<f64>,
}

impl Polytope {
    pub fn new(h_mat: DMatrix<f64>, h_vec: DVector<f64>) -> Result<Self> {
        if h_mat.nrows() != h_vec.len() {
            return Err(Error::validation(format!(
                "polytope has {} rows in H but {} entries in h",
                h_mat.nrows(),
                h_vec.len()
            )));
        }
        if let Some(r) = (0..h_mat.nrows()).find(|&r| h_mat.row(r).iter().all(|v| *v == 0.0)) {
            return Err(Error::validation(format!(
                "polytope row {r} of H is all zero"
            )));
        }
        if h_mat.iter().chain(h_vec.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("polytope data must be finite"));
        }
        Ok(Self { h_mat, h_vec })
    }

    /// Axis-aligned box `lo <= y <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..dim {
            let mut r = vec![0.0; dim];
            r[j] = 1.0;
            rows.push(r.clone());
            rhs.push(hi[j]);
            r[j] = -1.0;
            rows.push(r);
            rhs.push(-lo[j]);
        }
        Self::new(matrix_from_rows(&rows, dim)?, DVector::from_vec(rhs))
    }

    pub fn h_mat(&self) -> &DMatrix<f64> {
        &self.h_mat
    }

    pub fn h_vec(&self) -> &DVector<f64> {
        &self.h_vec
    }

    pub fn dim(&self) -> usize {
        self.h_mat.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.h_mat.nrows()
    }

    /// Largest entry of `H y - h`; non-positive iff `y` is in the set.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        (&self.h_mat * y - &self.h_vec)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(y) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMode {
    /// Regions tile the state set; every state lies in exactly one region.
    Partition,
    /// Regions describe the free space; each tree state must be placed in one
    /// of them (obstacles are the complement).
    FreeSpaceDisjunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    regions: Vec<Polytope>,
    mode: CoverageMode,
}

impl RegionPartition {
    pub fn new(regions: Vec<Polytope>, mode: CoverageMode) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::validation("at least one region is required"));
        }
        let dim = regions[0].dim();
        if regions.iter().any(|r| r.dim() != dim) {
            return Err(Error::validation("regions have inconsistent dimensions"));
        }
        Ok(Self { regions, mode })
    }

    pub fn regions(&self) -> &[Polytope] {
        &self.regions
    }

    pub fn region(&self, i: usize) -> Option<&Polytope> {
        self.regions.get(i)
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn mode(&self) -> CoverageMode {
        self.mode
    }

    /// Index of the region minimizing the worst constraint violation at `x`,
    /// with the lowest index winning ties. Returns the violation as well.
    pub fn closest_region(&self, x: &DVector<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, r) in self.regions.iter().enumerate() {
            let v = r.max_violation(x);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// Checks that no sampled point lies strictly inside two regions.
    fn check_disjoint(&self, sample_box: &[(f64, f64)]) -> Result<()> {
        const SAMPLES: usize = 4000;
        const INTERIOR_MARGIN: f64 = 1e-7;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5_eed0_f7e6_10a5);
        let dim = sample_box.len();
        let mut x = DVector::zeros(dim);
        for _ in 0..SAMPLES {
            for (j, (lo, hi)) in sample_box.iter().enumerate() {
                x[j] = rng.random_range(*lo..=*hi);
            }
            let inside: Vec<usize> = (0..self.regions.len())
                .filter(|&i| self.regions[i].max_violation(&x) < -INTERIOR_MARGIN)
                .collect();
            if inside.len() > 1 {
                return Err(Error::validation(format!(
                    "regions {} and {} overlap (e.g. at {:?})",
                    inside[0],
                    inside[1],
                    x.as_slice()
                )));
            }
        }
        Ok(())
    }
}

/// Lowest-index region containing `x` (closed sets, [`MEMBERSHIP_TOL`] slack).
pub fn region_of_state(partition: &RegionPartition, x: &DVector<f64>) -> Option<usize> {
    partition
        .regions
        .iter()
        .position(|r| r.contains(x, MEMBERSHIP_TOL))
}

/// Piecewise-constant observation model: `tables[i][(e, o)] = P(o | e, x in X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    num_env: usize,
    num_obs: usize,
    tables: Vec<DMatrix<f64>>,
}

impl ObservationModel {
    pub fn new(tables: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::validation("observation model needs at least one table"))?;
        let (num_env, num_obs) = first.shape();
        if num_env == 0 || num_obs == 0 {
            return Err(Error::validation("observation tables must be non-empty"));
        }
        for (i, t) in tables.iter().enumerate() {
            if t.shape() != (num_env, num_obs) {
                return Err(Error::validation(format!(
                    "observation table {i} has shape {:?}, expected {:?}",
                    t.shape(),
                    (num_env, num_obs)
                )));
            }
            if let Some(v) = t.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return Err(Error::validation(format!(
                    "observation table {i} has entry {v} outside (0, 1)"
                )));
            }
            for e in 0..num_env {
                let s: f64 = t.row(e).sum();
                if (s - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::validation(format!(
                        "observation table {i} row {e} sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(Self {
            num_env,
            num_obs,
            tables,
        })
    }

    /// Symmetric model with `P(o = e | e) = p` and the rest spread uniformly.
    pub fn symmetric_accuracy(num_states: usize, accuracies: &[f64]) -> Result<Self> {
        if num_states < 2 {
            return Err(Error::validation(
                "symmetric model needs at least two states",
            ));
        }
        let tables = accuracies
            .iter()
            .map(|&p| symmetric_table(num_states, p))
            .collect();
        Self::new(tables)
    }

    pub fn num_env(&self) -> usize {
        self.num_env
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_regions(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[DMatrix<f64>] {
        &self.tables
    }

    pub fn table(&self, region: usize) -> Result<&DMatrix<f64>> {
        self.tables
            .get(region)
            .ok_or_else(|| Error::index(format!("region {region} not in 0..{}", self.tables.len())))
    }

    /// `M_region(e, o)`.
    pub fn prob(&self, region: usize, e: usize, o: usize) -> Result<f64> {
        let t = self.table(region)?;
        if e >= self.num_env || o >= self.num_obs {
            return Err(Error::index(format!(
                "(e={e}, o={o}) outside {}x{} table",
                self.num_env, self.num_obs
            )));
        }
        Ok(t[(e, o)])
    }

    /// True when every region shares one table, i.e. observations do not
    /// depend on the system state.
    pub fn is_state_independent(&self) -> bool {
        self.tables.windows(2).all(|w| w[0] == w[1])
    }

    /// Smallest `M_i(e, o)` over all regions.
    pub fn min_over_regions(&self, e: usize, o: usize) -> f64 {
        self.tables
            .iter()
            .map(|t| t[(e, o)])
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest entry of any table.
    pub fn min_entry(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn symmetric_table(num_states: usize, p: f64) -> DMatrix<f64> {
    let off = (1.0 - p) / (num_states - 1) as f64;
    DMatrix::from_fn(num_states, num_states, |e, o| if e == o { p } else { off })
}

/// Environment transition matrix `Omega[e', e] = P(e' | e)` (column-stochastic).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    omega: DMatrix<f64>,
    is_static: bool,
}

impl TransitionModel {
    pub fn static_env(num_env: usize) -> Self {
        Self {
            omega: DMatrix::identity(num_env, num_env),
            is_static: true,
        }
    }

    pub fn from_matrix(omega: DMatrix<f64>) -> Result<Self> {
        if omega.nrows() != omega.ncols() || omega.nrows() == 0 {
            return Err(Error::validation("transition matrix must be square"));
        }
        if let Some(v) = omega.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!(
                "transition entry {v} outside [0, 1]"
            )));
        }
        for c in 0..omega.ncols() {
            let s: f64 = omega.column(c).sum();
            if (s - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::validation(format!(
                    "transition column {c} sums to {s}, not 1"
                )));
            }
        }
        let is_static = omega == DMatrix::identity(omega.nrows(), omega.ncols());
        Ok(Self { omega, is_static })
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn is_static(&self) -> bool {
        self.is_static
    }

    pub fn num_env(&self) -> usize {
        self.omega.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub state: DVector<f64>,
    pub input: DVector<f64>,
}

/// Quadratic stage/terminal costs with one goal per environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qn: DMatrix<f64>,
    goals: Vec<Goal>,
}

impl CostSpec {
    pub fn new(
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        qn: DMatrix<f64>,
        goals: Vec<Goal>,
    ) -> Result<Self> {
        check_psd("Q", &q)?;
        check_psd("R", &r)?;
        check_psd("QN", &qn)?;
        if qn.shape() != q.shape() {
            return Err(Error::validation("QN and Q must have the same shape"));
        }
        if goals.is_empty() {
            return Err(Error::validation("at least one goal is required"));
        }
        for (e, g) in goals.iter().enumerate() {
            if g.state.len() != q.nrows() || g.input.len() != r.nrows() {
                return Err(Error::validation(format!(
                    "goal {e} has dimensions ({}, {}), expected ({}, {})",
                    g.state.len(),
                    g.input.len(),
                    q.nrows(),
                    r.nrows()
                )));
            }
        }
        Ok(Self { q, r, qn, goals })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn qn(&self) -> &DMatrix<f64> {
        &self.qn
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    /// `h(x, u, e) = |x - xg|_Q^2 + |u - ug|_R^2`.
    pub fn stage(&self, x: &DVector<f64>, u: &DVector<f64>, e: usize) -> f64 {
        let g = &self.goals[e];
        quad_form(&self.q, &(x - &g.state)) + quad_form(&self.r, &(u - &g.input))
    }

    /// State part of the stage cost only.
    pub fn stage_state(&self, x: &DVector<f64>, e: usize) -> f64 {
        quad_form(&self.q, &(x - &self.goals[e].state))
    }

    /// `h_N(x, e) = |x - xg|_QN^2`.
    pub fn terminal(&self, x: &DVector<f64>, e: usize) -> f64 {
        quad_form(&self.qn, &(x - &self.goals[e].state))
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::validation(format!("{name} must be square")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
        return Err(Error::validation(format!("{name} is not symmetric")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let min_eig = sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < PSD_EIG_FLOOR {
        return Err(Error::validation(format!(
            "{name} is not positive semidefinite (eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

/// Horizon `N` split into `P = N / N_b` segments of `N_b` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonSpec {
    horizon: usize,
    period: usize,
}

impl HorizonSpec {
    pub fn new(horizon: usize, period: usize) -> Result<Self> {
        if horizon == 0 || period == 0 {
            return Err(Error::validation("N and N_b must be at least 1"));
        }
        if !horizon.is_multiple_of(period) {
            return Err(Error::validation(format!(
                "N_b must divide N (N={horizon}, N_b={period})"
            )));
        }
        Ok(Self { horizon, period })
    }

    /// `N`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `N_b`.
    pub fn period(&self) -> usize {
        self.period
    }

    /// `P = N / N_b`.
    pub fn segments(&self) -> usize {
        self.horizon / self.period
    }
}

/// A complete, validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub description: Option<String>,
    pub system: LinearSystem,
    pub input_set: Polytope,
    pub state_set: Polytope,
    pub partition: RegionPartition,
    pub obs: ObservationModel,
    pub trans: TransitionModel,
    pub cost: CostSpec,
    pub horizon: HorizonSpec,
    pub x0: DVector<f64>,
    pub b0: DVector<f64>,
    /// Excluded sets. Only checked against, never used as constraints: in
    /// free-space mode the regions already leave them out.
    pub obstacles: Vec<Polytope>,
}

impl ScenarioSpec {
    /// Checks every cross-member invariant. Members validate themselves on
    /// construction; this covers dimensions, `b0` and `x0`.
    pub fn validate(&self) -> Result<()> {
        let n = self.system.state_dim();
        let d = self.system.input_dim();
        let ne = self.obs.num_env();
        if self.state_set.dim() != n {
            return Err(Error::validation("state_set dimension differs from n"));
        }
        if self.input_set.dim() != d {
            return Err(Error::validation("input_set dimension differs from d"));
        }
        if self.partition.regions().iter().any(|r| r.dim() != n) {
            return Err(Error::validation("region dimension differs from n"));
        }
        if self.obs.num_regions() != self.partition.len() {
            return Err(Error::validation(format!(
                "{} observation tables for {} regions",
                self.obs.num_regions(),
                self.partition.len()
            )));
        }
        if self.trans.num_env() != ne {
            return Err(Error::validation("transition matrix size differs from |E|"));
        }
        if self.cost.q().nrows() != n || self.cost.r().nrows() != d {
            return Err(Error::validation(
                "cost matrix dimensions differ from (n, d)",
            ));
        }
        if self.cost.goals().len() != ne {
            return Err(Error::validation(format!(
                "{} goals for {} environment states",
                self.cost.goals().len(),
                ne
            )));
        }
        if self.x0.len() != n {
            return Err(Error::validation("x0 has wrong dimension"));
        }
        if self.b0.len() != ne {
            return Err(Error::validation("b0 has wrong dimension"));
        }
        if self.b0.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::validation("b0 not strictly positive"));
        }
        if (self.b0.sum() - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(Error::validation("b0 does not sum to 1"));
        }
        if !self.state_set.contains(&self.x0, MEMBERSHIP_TOL) {
            return Err(Error::validation("x0 violates the state set"));
        }
        if self.partition.mode() == CoverageMode::FreeSpaceDisjunction
            && region_of_state(&self.partition, &self.x0).is_none()
        {
            return Err(Error::validation("x0 is not in free space"));
        }
        if self.obstacles.iter().any(|o| o.dim() != n) {
            return Err(Error::validation("obstacle dimension differs from n"));
        }
        if self.obstacle_margin(&self.x0) < -MEMBERSHIP_TOL {
            return Err(Error::validation("x0 lies inside an obstacle"));
        }
        self.partition.check_disjoint(&self.sample_box())?;
        Ok(())
    }

    /// Smallest signed distance-like margin `max_r (H x - h)_r` over the
    /// obstacles; negative inside one, `+inf` without obstacles.
    pub fn obstacle_margin(&self, x: &DVector<f64>) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.max_violation(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bounding box of the state set used for sampling. Coordinates without an
    /// axis-aligned bound in `state_set` fall back to `[-100, 100]`.
    pub fn sample_box(&self) -> Vec<(f64, f64)> {
        const FALLBACK: f64 = 100.0;
        let h = self.state_set.h_mat();
        let hv = self.state_set.h_vec();
        let n = h.ncols();
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
        for r in 0..h.nrows() {
            let nz: Vec<usize> = (0..n).filter(|&j| h[(r, j)] != 0.0).collect();
            if let [j] = nz[..] {
                let lim = hv[r] / h[(r, j)];
                if h[(r, j)] > 0.0 {
                    bounds[j].1 = bounds[j].1.min(lim);
                } else {
                    bounds[j].0 = bounds[j].0.max(lim);
                }
            }
        }
        bounds
            .into_iter()
            .map(|(lo, hi)| {
                (
                    if lo.is_finite() { lo } else { -FALLBACK },
                    if hi.is_finite() { hi } else { FALLBACK },
                )
            })
            .collect()
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    pub fn num_env(&self) -> usize {
        self.obs.num_env()
    }

    pub fn num_obs(&self) -> usize {
        self.obs.num_obs()
    }

    pub fn num_regions(&self) -> usize {
        self.partition.len()
    }

    /// Copy with a different horizon / branching period.
    pub fn with_horizon(&self, horizon: usize, period: usize) -> Result<Self> {
        let mut s = self.clone();
        s.horizon = HorizonSpec::new(horizon, period)?;
        Ok(s)
    }

    /// Copy with a different initial belief.
    pub fn with_b0(&self, b0: DVector<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.b0 = b0;
        s.validate()?;
        Ok(s)
    }

    /// Copy whose `region` table becomes the symmetric table with accuracy `p`.
    pub fn with_region_accuracy(&self, region: usize, p: f64) -> Result<Self> {
        if self.num_env() != self.num_obs() {
            return Err(Error::validation("accuracy overrides need |E| = |O|"));
        }
        let mut tables = self.obs.tables().to_vec();
        let slot = tables
            .get_mut(region)
            .ok_or_else(|| Error::index(format!("region {region} out of range")))?;
        *slot = symmetric_table(self.num_env(), p);
        let mut s = self.clone();
        s.obs = ObservationModel::new(tables)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_spec()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from_spec(self))
            .expect("scenario serialization cannot fail")
    }
}

/// Reads and validates a scenario JSON file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    ScenarioSpec::from_json(&text)
}

pub fn save_scenario(spec: &ScenarioSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, spec.to_json())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// File schema

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    system: SystemFile,
    state_set: PolytopeFile,
    input_set: PolytopeFile,
    regions: Vec<PolytopeFile>,
    observation: ObservationFile,
    transition: TransitionFile,
    cost: CostFile,
    horizon: HorizonFile,
    x0: Vec<f64>,
    b0: Vec<f64>,
    coverage_mode: CoverageMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    obstacles: Vec<PolytopeFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeFile {
    #[serde(rename = "H")]
    h_mat: Rows,
    #[serde(rename = "h")]
    h_vec: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationFile {
    num_obs: usize,
    tables: Vec<Rows>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TransitionFile {
    Keyword(TransitionKeyword),
    Matrix { omega: Rows },
}

#[derive(Debug, Serialize, Deserialize)]
enum TransitionKeyword {
    #[serde(rename = "static")]
    Static,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    #[serde(rename = "Q")]
    q: Rows,
    #[serde(rename = "R")]
    r: Rows,
    #[serde(rename = "QN")]
    qn: Rows,
    goals: Vec<GoalFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalFile {
    xg: Vec<f64>,
    ug: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "Nb")]
    nb: usize,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], ncols_if_empty: usize) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(ncols_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl PolytopeFile {
    fn into_polytope(self, dim: usize) -> Result<Polytope> {
        Polytope::new(
            matrix_from_rows(&self.h_mat, dim)?,
            DVector::from_vec(self.h_vec),
        )
    }

    fn from_polytope(p: &Polytope) -> Self {
        Self {
            h_mat: rows_of(p.h_mat()),
            h_vec: p.h_vec().iter().copied().collect(),
        }
    }
}

impl ScenarioFile {
    fn into_spec(self) -> Result<ScenarioSpec> {
        let a = matrix_from_rows(&self.system.a, 0)?;
        let b = matrix_from_rows(&self.system.b, 0)?;
        let system = LinearSystem::new(a, b)?;
        let n = system.state_dim();
        let d = system.input_dim();

        let tables = self
            .observation
            .tables
            .iter()
            .map(|t| matrix_from_rows(t, self.observation.num_obs))
            .collect::<Result<Vec<_>>>()?;
        let obs = ObservationModel::new(tables)?;
        if obs.num_obs() != self.observation.num_obs {
            return Err(Error::validation(format!(
                "num_obs is {} but tables have {} columns",
                self.observation.num_obs,
                obs.num_obs()
            )));
        }
        let trans = match self.transition {
            TransitionFile::Keyword(TransitionKeyword::Static) => {
                TransitionModel::static_env(obs.num_env())
            }
            TransitionFile::Matrix { omega } => {
                TransitionModel::from_matrix(matrix_from_rows(&omega, 0)?)?
            }
        };
        let goals = self
            .cost
            .goals
            .into_iter()
            .map(|g| Goal {
                state: DVector::from_vec(g.xg),
                input: DVector::from_vec(g.ug),
            })
            .collect();
        let cost = CostSpec::new(
            matrix_from_rows(&self.cost.q, n)?,
            matrix_from_rows(&self.cost.r, d)?,
            matrix_from_rows(&self.cost.qn, n)?,
            goals,
        )?;
        let regions = self
            .regions
            .into_iter()
            .map(|r| r.into_polytope(n))
            .collect::<Result<Vec<_>>>()?;
        let spec = ScenarioSpec {
            description: self.description,
            system,
            input_set: self.input_set.into_polytope(d)?,
            state_set: self.state_set.into_polytope(n)?,
            partition: RegionPartition::new(regions, self.coverage_mode)?,
            obs,
            trans,
            cost,
            horizon: HorizonSpec::new(self.horizon.n, self.horizon.nb)?,
            x0: DVector::from_vec(self.x0),
            b0: DVector::from_vec(self.b0),
            obstacles: self
                .obstacles
                .into_iter()
                .map(|o| o.into_polytope(n))
                .collect::<Result<Vec<_>>>()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(s: &ScenarioSpec) -> Self {
        Self {
            description: s.description.clone(),
            system: SystemFile {
                a: rows_of(s.system.a()),
                b: rows_of(s.system.b()),
            },
            state_set: PolytopeFile::from_polytope(&s.state_set),
            input_set: PolytopeFile::from_polytope(&s.input_set),
            regions: s
                .partition
                .regions()
                .iter()
                .map(PolytopeFile::from_polytope)
                .collect(),
            observation: ObservationFile {
                num_obs: s.obs.num_obs(),
                tables: s.obs.tables().iter().map(rows_of).collect(),
            },
            transition: if s.trans.is_static() {
                TransitionFile::Keyword(TransitionKeyword::Static)
            } else {
                TransitionFile::Matrix {
                    omega: rows_of(s.trans.omega()),
                }
            },
            cost: CostFile {
                q: rows_of(s.cost.q()),
                r: rows_of(s.cost.r()),
                qn: rows_of(s.cost.qn()),
                goals: s
                    .cost
                    .goals()
                    .iter()
                    .map(|g| GoalFile {
                        xg: g.state.iter().copied().collect(),
                        ug: g.input.iter().copied().collect(),
                    })
                    .collect(),
            },
            horizon: HorizonFile {
                n: s.horizon.horizon(),
                nb: s.horizon.period(),
            },
            x0: s.x0.iter().copied().collect(),
            b0: s.b0.iter().copied().collect(),
            coverage_mode: s.partition.mode(),
            obstacles: s
                .obstacles
                .iter()
                .map(PolytopeFile::from_polytope)
                .collect(),
        }
    }
}
