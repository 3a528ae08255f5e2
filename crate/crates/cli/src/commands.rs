use std::time::Instant;

use moclqr_core::{
    enumerate_oracle, evaluate_cost, load_scenario, solve_micp, Error, Result, ScenarioSpec,
    Solution, SolverConfig,
};

use crate::config::RunConfig;
use crate::output::{table1_csv, to_json_17, write_tree, Table1Row};
use crate::simulate::{simulate_rollouts, SimulationOutput};

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) => 2,
        Error::Validation(_) | Error::IndexOutOfRange(_) | Error::GuardExceeded { .. } => 3,
        Error::Infeasible => 4,
        Error::BudgetExceeded { .. } => 5,
        Error::Numerical(_) | Error::Io(_) => 1,
    }
}

pub fn load_spec(config: &RunConfig) -> Result<ScenarioSpec> {
    config.validate()?;
    let spec = load_scenario(&config.scenario)?;
    config.overrides.apply(&spec)
}

pub fn solver_config(config: &RunConfig) -> SolverConfig {
    SolverConfig {
        workers: config.workers,
        time_limit: config.budget.time_s,
        max_nodes: config.budget.max_nodes,
        ..SolverConfig::default()
    }
}

pub fn summary_line(solution: &Solution) -> String {
    format!(
        "cost={} nodes={} qps={} time={:.3} gap={:e}",
        solution.cost,
        solution.stats.nodes_explored,
        solution.stats.qps_solved,
        solution.stats.wall_time_s,
        solution.gap
    )
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub spec: ScenarioSpec,
    pub solution: Solution,
}

/// Solves the scenario and writes the tree file if requested. A budget stop
/// still writes the incumbent before the error is returned.
pub fn cmd_plan(config: &RunConfig) -> Result<PlanOutcome> {
    let spec = load_spec(config)?;
    match solve_micp(&spec, &solver_config(config)) {
        Ok(solution) => {
            if let Some(out) = &config.out {
                write_tree(&solution, out)?;
            }
            println!("{}", summary_line(&solution));
            Ok(PlanOutcome { spec, solution })
        }
        Err(Error::BudgetExceeded {
            incumbent,
            gap,
            nodes,
        }) => {
            if let Some(sol) = &incumbent {
                if let Some(out) = &config.out {
                    write_tree(sol, out)?;
                }
                println!("{}", summary_line(sol));
            }
            Err(Error::BudgetExceeded {
                incumbent,
                gap,
                nodes,
            })
        }
        Err(e) => Err(e),
    }
}

/// One row per branching period. Budget stops are recorded in the row
/// (incumbent cost, or NaN, and the remaining gap).
pub fn cmd_table1(config: &RunConfig) -> Result<Vec<Table1Row>> {
    let base = load_spec(config)?;
    let horizon = base.horizon.horizon();
    let mut rows = Vec::new();
    for &nb in &config.nb_list {
        let spec = base.with_horizon(horizon, nb)?;
        let start = Instant::now();
        let (cost, gap) = match solve_micp(&spec, &solver_config(config)) {
            Ok(sol) => (sol.cost, sol.gap),
            Err(Error::BudgetExceeded { incumbent, gap, .. }) => {
                (incumbent.map_or(f64::NAN, |s| s.cost), gap)
            }
            Err(e) => return Err(e),
        };
        let row = Table1Row {
            nb,
            segments: horizon / nb,
            cost,
            time_s: start.elapsed().as_secs_f64(),
            gap,
        };
        log::info!("Nb={nb}: cost {cost} in {:.3} s", row.time_s);
        rows.push(row);
    }
    let csv = table1_csv(&rows);
    match &config.out {
        Some(out) => std::fs::write(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(rows)
}

pub fn cmd_simulate(config: &RunConfig) -> Result<SimulationOutput> {
    let spec = load_spec(config)?;
    let plan = solve_micp(&spec, &solver_config(config))?;
    let seed = config.seed.expect("validated");
    let output = simulate_rollouts(&spec, &plan, config.rollouts, seed)?;
    if let Some(out) = &config.out {
        std::fs::write(out, to_json_17(&output)?)?;
    }
    let s = &output.summary;
    println!(
        "rollouts={} mean={} stderr={} planner={}",
        s.rollouts, s.mean_cost, s.std_error, s.planner_cost
    );
    Ok(output)
}

pub const ORACLE_REL_TOL: f64 = 1e-6;
pub const IDENTITY_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub micp_cost: f64,
    pub oracle_cost: f64,
    pub reevaluated_cost: f64,
    pub oracle_agrees: bool,
    pub identity_holds: bool,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.oracle_agrees && self.identity_holds
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Cross-checks the branch-and-bound result against exhaustive enumeration
/// and against the independent cost re-evaluation.
pub fn cmd_oracle(config: &RunConfig) -> Result<OracleReport> {
    let spec = load_spec(config)?;
    let solver = solver_config(config);
    let micp = solve_micp(&spec, &solver)?;
    let oracle = enumerate_oracle(&spec, &solver)?;
    let eval_spec = match config.corrupt_weight {
        Some(_) if spec.num_env() < 2 => {
            return Err(Error::Validation(
                "weight corruption needs two environment states".into(),
            ))
        }
        Some(delta) => {
            let mut b0 = spec.b0.clone();
            b0[0] += delta;
            b0[1] -= delta;
            spec.with_b0(b0)?
        }
        None => spec.clone(),
    };
    let reevaluated = evaluate_cost(&eval_spec, &micp.tree, &micp.assignment)?;
    let report = OracleReport {
        micp_cost: micp.cost,
        oracle_cost: oracle.cost,
        reevaluated_cost: reevaluated,
        oracle_agrees: relative_error(micp.cost, oracle.cost) <= ORACLE_REL_TOL,
        identity_holds: relative_error(micp.cost, reevaluated) <= IDENTITY_REL_TOL,
    };
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("solve_micp      = {}", report.micp_cost);
    println!("enumerate_oracle = {}", report.oracle_cost);
    println!("evaluate_cost   = {}", report.reevaluated_cost);
    println!(
        "oracle agreement (rel {ORACLE_REL_TOL:e}): {}",
        verdict(report.oracle_agrees)
    );
    println!(
        "cost identity (rel {IDENTITY_REL_TOL:e}): {}",
        verdict(report.identity_holds)
    );
    Ok(report)
}
