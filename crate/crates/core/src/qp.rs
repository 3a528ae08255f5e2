//! Convex quadratic programs
//!
//! ```text
//! minimize    1/2 x'Px + q'x
//! subject to  l <= A x <= u
//! ```
//!
//! Every subproblem of the planner has this form. The interior-point work is
//! delegated to Clarabel; this module owns the problem representation, the
//! conversion to conic form, and the optimality certificate: a solution is
//! only reported `Optimal` after its primal and dual residuals were recomputed
//! here and found within tolerance.

use clarabel::algebra as cl;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowval: Vec::new(),
            nzval: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    /// `(row, col, value)` for every stored entry, column by column.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowval[k], c, self.nzval[k]))
        })
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (r, c, v) in self.iter() {
            y[r] += v * x[c];
        }
        y
    }

    /// `y = M' x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += v * x[r];
        }
        y
    }

    /// `y = S x` where `S` is the symmetric matrix whose upper triangle is
    /// stored in `self`.
    pub fn sym_upper_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for (r, c, v) in self.iter() {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    fn to_clarabel(&self) -> cl::CscMatrix<f64> {
        cl::CscMatrix::new(
            self.nrows,
            self.ncols,
            self.colptr.clone(),
            self.rowval.clone(),
            self.nzval.clone(),
        )
    }
}

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Appends an empty row and returns its index.
    pub fn add_row(&mut self) -> usize {
        self.nrows += 1;
        self.nrows - 1
    }

    pub fn build(mut self) -> CscMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0; self.ncols + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                colptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowval,
            nzval,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Upper triangle of the symmetric PSD cost matrix.
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QpProblem {
    /// Builds and checks a problem. `p` may be given either as its upper
    /// triangle or as a full symmetric matrix (symmetry is then verified to
    /// 1e-12 and the lower half dropped).
    pub fn new(p: CscMatrix, q: Vec<f64>, a: CscMatrix, l: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let n = q.len();
        if p.nrows != n || p.ncols != n {
            return Err(Error::validation(format!(
                "P is {}x{} but q has length {n}",
                p.nrows, p.ncols
            )));
        }
        if a.ncols != n || a.nrows != l.len() || l.len() != u.len() {
            return Err(Error::validation("constraint dimensions are inconsistent"));
        }
        if let Some(i) = (0..l.len()).find(|&i| !(l[i] <= u[i])) {
            return Err(Error::validation(format!(
                "row {i} has l = {} > u = {}",
                l[i], u[i]
            )));
        }
        let p = upper_triangle(p)?;
        Ok(Self { p, q, a, l, u })
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.sym_upper_mul_vec(x);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }

    /// Largest violation of `l <= A x <= u`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        ax.iter()
            .zip(self.l.iter().zip(&self.u))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `|P x + q + A' y|_inf`.
    pub fn dual_residual(&self, x: &[f64], y: &[f64]) -> f64 {
        let px = self.p.sym_upper_mul_vec(x);
        let aty = self.a.tr_mul_vec(y);
        px.iter()
            .zip(&self.q)
            .zip(&aty)
            .map(|((a, b), c)| (a + b + c).abs())
            .fold(0.0, f64::max)
    }
}

fn upper_triangle(p: CscMatrix) -> Result<CscMatrix> {
    if p.iter().all(|(r, c, _)| r <= c) {
        return Ok(p);
    }
    let dense = p.to_dense();
    let scale = 1.0 + dense.amax();
    if (&dense - dense.transpose()).amax() > 1e-12 * scale {
        return Err(Error::validation("P is not symmetric"));
    }
    let mut b = TripletBuilder::new(p.nrows, p.ncols);
    for (r, c, v) in p.iter() {
        if r <= c {
            b.push(r, c, v);
        }
    }
    Ok(b.build())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: u32,
    pub time_limit: Option<f64>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    /// Iteration or time limit hit before a certified answer.
    MaxIterations,
    /// The backend stopped (stalled, reduced accuracy, numerical trouble) and
    /// the iterate does not pass the residual certificate.
    Inaccurate,
}

/// Farkas certificate: `A'y = 0` and `u'y+ + l'y- < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub y: Vec<f64>,
    /// `-(u'y+ + l'y-) / |y|_inf`; positive for a valid certificate.
    pub measure: f64,
    /// `|A'y|_inf / |y|_inf`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of `l <= Ax <= u`; positive on active upper bounds,
    /// negative on active lower bounds.
    pub y: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub prim_res: f64,
    pub dual_res: f64,
    /// Residuals divided by the tolerance scale; both `<= tol` when optimal.
    pub prim_res_rel: f64,
    pub dual_res_rel: f64,
    pub iterations: u32,
    pub certificate: Option<InfeasibilityCertificate>,
}

#[derive(Clone, Copy)]
enum RowKind {
    Eq,
    Upper,
    Lower,
}

/// Solves `problem`. Never fails for well-formed input; the outcome is in
/// [`QpSolution::status`].
pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    let n = problem.num_vars();

    // Conic form: rows of A x + s = b, zero-cone rows first.
    let mut eq_rows = Vec::new();
    let mut ineq_rows = Vec::new();
    for i in 0..problem.num_constraints() {
        let (lo, hi) = (problem.l[i], problem.u[i]);
        if lo == hi {
            eq_rows.push((i, RowKind::Eq, hi));
        } else {
            if hi.is_finite() {
                ineq_rows.push((i, RowKind::Upper, hi));
            }
            if lo.is_finite() {
                ineq_rows.push((i, RowKind::Lower, -lo));
            }
        }
    }
    let rows: Vec<(usize, RowKind, f64)> = eq_rows.iter().chain(&ineq_rows).copied().collect();
    let mut origin_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_constraints()];
    for (k, &(i, kind, _)) in rows.iter().enumerate() {
        let sign = if matches!(kind, RowKind::Lower) {
            -1.0
        } else {
            1.0
        };
        origin_rows[i].push((k, sign));
    }
    let mut ab = TripletBuilder::new(rows.len(), n);
    for (r, c, v) in problem.a.iter() {
        for &(k, sign) in &origin_rows[r] {
            ab.push(k, c, sign * v);
        }
    }
    let a_conic = ab.build();
    let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mut cones = Vec::new();
    if !eq_rows.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eq_rows.len()));
    }
    if !ineq_rows.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(ineq_rows.len()));
    }

    let cl_settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .time_limit(settings.time_limit.unwrap_or(f64::INFINITY))
        .tol_gap_abs(settings.tol)
        .tol_gap_rel(settings.tol)
        .tol_feas(settings.tol)
        .tol_infeas_abs(settings.tol)
        .tol_infeas_rel(settings.tol)
        .build()
        .map_err(|e| Error::Numerical(format!("QP settings: {e}")))?;
    let mut solver = DefaultSolver::new(
        &problem.p.to_clarabel(),
        &problem.q,
        &a_conic.to_clarabel(),
        &b,
        &cones,
        cl_settings,
    )
    .map_err(|e| Error::Numerical(format!("QP setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    // Map conic multipliers back onto the two-sided rows.
    let mut y = vec![0.0; problem.num_constraints()];
    for (k, &(i, kind, _)) in rows.iter().enumerate() {
        match kind {
            RowKind::Eq | RowKind::Upper => y[i] += sol.z[k],
            RowKind::Lower => y[i] -= sol.z[k],
        }
    }

    let x = sol.x.clone();
    let iterations = sol.iterations;
    let mut out = QpSolution {
        objective: problem.objective(&x),
        prim_res: f64::NAN,
        dual_res: f64::NAN,
        prim_res_rel: f64::NAN,
        dual_res_rel: f64::NAN,
        x,
        y,
        status: QpStatus::Inaccurate,
        iterations,
        certificate: None,
    };

    match sol.status {
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            let cert = farkas_certificate(problem, &out.y);
            out.status = if cert.measure > 0.0 && cert.residual <= settings.tol.sqrt() {
                QpStatus::PrimalInfeasible
            } else {
                QpStatus::Inaccurate
            };
            out.certificate = Some(cert);
            out.objective = f64::INFINITY;
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            out.status = QpStatus::DualInfeasible;
            out.objective = f64::NEG_INFINITY;
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime => {
            certify(problem, &mut out, settings.tol);
            if out.status != QpStatus::Optimal {
                out.status = QpStatus::MaxIterations;
            }
        }
        _ => certify(problem, &mut out, settings.tol),
    }
    Ok(out)
}

/// Recomputes the residuals and marks the solution optimal when they pass
/// the usual absolute-plus-relative test.
fn certify(problem: &QpProblem, sol: &mut QpSolution, tol: f64) {
    let ax = problem.a.mul_vec(&sol.x);
    let px = problem.p.sym_upper_mul_vec(&sol.x);
    let aty = problem.a.tr_mul_vec(&sol.y);
    sol.prim_res = problem.primal_residual(&sol.x);
    sol.dual_res = problem.dual_residual(&sol.x, &sol.y);
    let prim_scale = 1.0 + inf_norm(&ax);
    let dual_scale = 1.0 + inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&problem.q));
    sol.prim_res_rel = sol.prim_res / prim_scale;
    sol.dual_res_rel = sol.dual_res / dual_scale;
    if sol.prim_res_rel <= tol && sol.dual_res_rel <= tol {
        sol.status = QpStatus::Optimal;
    }
}

fn farkas_certificate(problem: &QpProblem, y: &[f64]) -> InfeasibilityCertificate {
    let scale = inf_norm(y).max(f64::MIN_POSITIVE);
    let support: f64 = y
        .iter()
        .zip(problem.l.iter().zip(&problem.u))
        .map(|(yi, (lo, hi))| {
            if *yi > 0.0 {
                yi * hi
            } else if *yi < 0.0 {
                yi * lo
            } else {
                0.0
            }
        })
        .sum();
    InfeasibilityCertificate {
        y: y.to_vec(),
        measure: -support / scale,
        residual: inf_norm(&problem.a.tr_mul_vec(y)) / scale,
    }
}
