//! Belief coordinates and their propagation.
//!
//! Three coordinates describe the knowledge about the discrete environment
//! state along a branch of the trajectory tree:
//!
//! * [`Belief`] `b` - the normalized posterior.
//! * [`UnnormalizedBelief`] `v` - the posterior scaled by the likelihood of the
//!   observations so far. It evolves linearly, `v' = Theta(o) Omega v`, and
//!   weighting stage costs by `v` yields the expected cost directly.
//! * [`InverseBelief`] `z = 1 / v` (elementwise). Under a static environment it
//!   evolves as `z'[e] = z[e] / M_i(e, o)`, which turns the expected cost into
//!   a sum of quadratic-over-linear terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ObservationModel, ScenarioSpec, TransitionModel};

const SIMPLEX_TOL: f64 = 1e-10;
const MIN_LIKELIHOOD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct Belief(DVector<f64>);

impl Belief {
    pub fn new(b: DVector<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::validation("belief must be non-empty"));
        }
        if b.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::validation("belief has a negative entry"));
        }
        if (b.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::validation(format!(
                "belief sums to {}, not 1",
                b.sum()
            )));
        }
        Ok(Self(b))
    }

    pub fn uniform(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0 / n as f64))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedBelief(DVector<f64>);

impl UnnormalizedBelief {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::validation(
                "unnormalized belief entries must be strictly positive",
            ));
        }
        Ok(Self(v))
    }

    pub fn from_belief(b: &Belief) -> Result<Self> {
        Self::new(b.0.clone())
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Probability of the observation sequence that produced `v`.
    pub fn likelihood(&self) -> f64 {
        self.0.sum()
    }

    pub fn normalized(&self) -> Belief {
        Belief(&self.0 / self.0.sum())
    }

    pub fn to_inverse(&self) -> InverseBelief {
        InverseBelief(self.0.map(|x| 1.0 / x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseBelief(DVector<f64>);

impl InverseBelief {
    pub fn new(z: DVector<f64>) -> Result<Self> {
        if z.is_empty() || z.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::validation(
                "inverse belief entries must be finite and strictly positive",
            ));
        }
        Ok(Self(z))
    }

    pub fn from_belief(b: &Belief) -> Result<Self> {
        Self::new(b.0.map(|x| 1.0 / x))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// The cost weights `1 / z`.
    pub fn to_unnormalized(&self) -> UnnormalizedBelief {
        UnnormalizedBelief(self.0.map(|x| 1.0 / x))
    }
}

fn check_obs_index(obs: &ObservationModel, o: usize) -> Result<()> {
    if o >= obs.num_obs() {
        return Err(Error::index(format!(
            "observation {o} not in 0..{}",
            obs.num_obs()
        )));
    }
    Ok(())
}

/// `Theta(o) = diag(M_region(., o))`.
pub fn theta_matrix(obs: &ObservationModel, region: usize, o: usize) -> Result<DMatrix<f64>> {
    check_obs_index(obs, o)?;
    let column = obs.table(region)?.column(o).clone_owned();
    Ok(DMatrix::from_diagonal(&column))
}

/// `A_e(o) = Theta(o) Omega`.
pub fn ae_matrix(
    obs: &ObservationModel,
    trans: &TransitionModel,
    region: usize,
    o: usize,
) -> Result<DMatrix<f64>> {
    let theta = theta_matrix(obs, region, o)?;
    if trans.is_static() {
        return Ok(theta);
    }
    Ok(theta * trans.omega())
}

/// Bayes update. Returns the posterior and the likelihood `P(o | x, b)`.
pub fn belief_update(
    obs: &ObservationModel,
    trans: &TransitionModel,
    b: &Belief,
    region: usize,
    o: usize,
) -> Result<(Belief, f64)> {
    let unnorm = ae_matrix(obs, trans, region, o)? * &b.0;
    let likelihood = unnorm.sum();
    if likelihood < MIN_LIKELIHOOD {
        return Err(Error::Numerical(format!(
            "observation likelihood {likelihood:e} is numerically zero"
        )));
    }
    Ok((Belief(unnorm / likelihood), likelihood))
}

/// `v' = A_e(o) v`.
pub fn unnormalized_update(
    obs: &ObservationModel,
    trans: &TransitionModel,
    v: &UnnormalizedBelief,
    region: usize,
    o: usize,
) -> Result<UnnormalizedBelief> {
    Ok(UnnormalizedBelief(ae_matrix(obs, trans, region, o)? * &v.0))
}

/// `z' = D_region(o) z`, i.e. `z'[e] = z[e] / M_region(e, o)`. Only valid for a
/// static environment.
pub fn inverse_update(
    obs: &ObservationModel,
    z: &InverseBelief,
    region: usize,
    o: usize,
) -> Result<InverseBelief> {
    check_obs_index(obs, o)?;
    let table = obs.table(region)?;
    Ok(InverseBelief(DVector::from_fn(z.0.len(), |e, _| {
        z.0[e] / table[(e, o)]
    })))
}

/// Propagation matrix at step `k` of the periodic-branching tree: `A_e` at
/// measurement steps (`k > 0`, `k mod N_b = 0`), `Omega` elsewhere.
pub fn ce_matrix(spec: &ScenarioSpec, k: usize, region: usize, o: usize) -> Result<DMatrix<f64>> {
    if k > spec.horizon.horizon() {
        return Err(Error::index(format!(
            "step {k} beyond horizon {}",
            spec.horizon.horizon()
        )));
    }
    if k > 0 && k.is_multiple_of(spec.horizon.period()) {
        ae_matrix(&spec.obs, &spec.trans, region, o)
    } else {
        Ok(spec.trans.omega().clone())
    }
}

/// Largest diagonal entry over every `D_i(o)`, i.e. `1 / min M_i(e, o)`.
pub fn max_inverse_gain(obs: &ObservationModel) -> f64 {
    1.0 / obs.min_entry()
}

/// Elementwise a-priori bound on the inverse belief: `(max D)^(k-1) z0`.
/// `z_upper_bound(.., k)` dominates every inverse belief reachable by `k - 1`
/// updates from `z0`.
pub fn z_upper_bound(obs: &ObservationModel, z0: &InverseBelief, k: usize) -> DVector<f64> {
    let exponent = k.saturating_sub(1);
    let gain = max_inverse_gain(obs).powi(exponent as i32);
    &z0.0 * gain
}
