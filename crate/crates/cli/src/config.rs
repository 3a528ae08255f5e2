use std::path::PathBuf;

use moclqr_core::{Error, Result, ScenarioSpec};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Plan,
    Table1,
    Simulate,
    Oracle,
}

/// Scenario edits applied after loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<usize>,
    pub period: Option<usize>,
    /// `(region, accuracy)` pairs.
    pub accuracies: Vec<(usize, f64)>,
    pub b0: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec> {
        let mut out = spec.clone();
        if self.horizon.is_some() || self.period.is_some() {
            let n = self.horizon.unwrap_or(out.horizon.horizon());
            let nb = self.period.unwrap_or(out.horizon.period());
            out = out.with_horizon(n, nb)?;
        }
        for &(region, p) in &self.accuracies {
            out = out.with_region_accuracy(region, p)?;
        }
        if let Some(b0) = &self.b0 {
            out = out.with_b0(DVector::from_column_slice(b0))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Budget {
    pub time_s: Option<f64>,
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub scenario: PathBuf,
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub budget: Budget,
    pub rollouts: usize,
    pub nb_list: Vec<usize>,
    /// Test hook: perturbs `b0` by this amount before the independent cost
    /// re-evaluation in `oracle`.
    pub corrupt_weight: Option<f64>,
}

impl RunConfig {
    pub fn new(command: CommandKind, scenario: impl Into<PathBuf>) -> Self {
        Self {
            command,
            scenario: scenario.into(),
            overrides: Overrides::default(),
            out: None,
            seed: None,
            workers: 1,
            budget: Budget::default(),
            rollouts: 0,
            nb_list: Vec::new(),
            corrupt_weight: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Validation("worker count must be positive".into()));
        }
        match self.command {
            CommandKind::Simulate if self.seed.is_none() => {
                Err(Error::Validation("simulate requires --seed".into()))
            }
            CommandKind::Simulate if self.rollouts == 0 => Err(Error::Validation(
                "simulate requires at least one rollout".into(),
            )),
            CommandKind::Table1 if self.nb_list.is_empty() => Err(Error::Validation(
                "table1 requires a non-empty --nb-list".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Parses `i=p`.
pub fn parse_accuracy(text: &str) -> std::result::Result<(usize, f64), String> {
    let (i, p) = text
        .split_once('=')
        .ok_or_else(|| format!("expected REGION=ACCURACY, got `{text}`"))?;
    let i = i
        .trim()
        .parse()
        .map_err(|_| format!("bad region index `{i}`"))?;
    let p = p
        .trim()
        .parse()
        .map_err(|_| format!("bad accuracy `{p}`"))?;
    Ok((i, p))
}
