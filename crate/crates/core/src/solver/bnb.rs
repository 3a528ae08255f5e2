//! Best-first branch-and-bound over region assignments.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::ScenarioSpec;
use crate::qp::{solve_qp, QpSettings, QpStatus};
use crate::tree::{build_topology, Topology, TrajectoryTree};

use super::assemble::{
    assemble_qp, constraint_violation, extract_tree, flatten_tree, slot_state, AssembledQp,
    WeightMode,
};
use super::assignment::{measurement_slots, space_slots, RegionAssignment, Slot};
use super::cost::evaluate_cost;
use super::solution::{Solution, SolveStats, SOLUTION_TOL};
use super::SolverConfig;

/// Optimal value of the relaxation at `partial`: exact weights and region
/// constraints for committed slots, optimistic weights elsewhere. Returns
/// `+inf` when the relaxation is infeasible.
pub fn lower_bound(
    spec: &ScenarioSpec,
    topology: &Topology,
    partial: &RegionAssignment,
    settings: &QpSettings,
) -> Result<f64> {
    let assembled = assemble_qp(spec, topology, partial, WeightMode::Optimistic)?;
    let sol = solve_with_retry(&assembled, settings)?.0;
    match sol.status {
        QpStatus::Optimal => Ok(assembled.cost(&sol.x)),
        QpStatus::PrimalInfeasible => Ok(f64::INFINITY),
        status => Err(Error::Numerical(format!(
            "relaxation ended with {status:?}"
        ))),
    }
}

/// Solves once, and once more with a tenfold iteration cap if the first
/// attempt is not certified. Returns the solution and the number of solves.
fn solve_with_retry(
    assembled: &AssembledQp,
    settings: &QpSettings,
) -> Result<(crate::qp::QpSolution, usize)> {
    let sol = solve_qp(&assembled.qp, settings)?;
    if matches!(sol.status, QpStatus::MaxIterations | QpStatus::Inaccurate) {
        let retry = QpSettings {
            max_iter: settings.max_iter.saturating_mul(10),
            ..*settings
        };
        return Ok((solve_qp(&assembled.qp, &retry)?, 2));
    }
    Ok((sol, 1))
}

#[derive(Debug)]
struct OpenNode {
    /// Bound inherited from the parent; `-inf` at the root.
    bound: f64,
    id: u64,
    assignment: RegionAssignment,
}

impl OpenNode {
    fn depth(&self) -> usize {
        self.assignment.len()
    }
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenNode {}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenNode {
    // Max-heap order: smallest bound, then deepest, then lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth().cmp(&other.depth()))
            .then(other.id.cmp(&self.id))
    }
}

struct Candidate {
    cost: f64,
    assignment: RegionAssignment,
    x: Vec<f64>,
}

enum Relaxation {
    Infeasible,
    Unresolved,
    Solved(f64),
}

struct Evaluation {
    relaxation: Relaxation,
    qps: usize,
    candidates: Vec<Candidate>,
    branch_slot: Option<Slot>,
}

struct Context<'a> {
    spec: &'a ScenarioSpec,
    topology: Topology,
    config: &'a SolverConfig,
    measurement: Vec<Slot>,
    space: Vec<Slot>,
}

impl Context<'_> {
    fn first_open_slot(&self, assignment: &RegionAssignment) -> Option<Slot> {
        self.measurement
            .iter()
            .chain(&self.space)
            .copied()
            .find(|s| assignment.get(*s).is_none())
    }

    /// Next slot to branch on. Measurement slots go first in breadth-first
    /// order; then the space slot whose relaxed state is farthest from free
    /// space.
    fn branch_slot(&self, assignment: &RegionAssignment, tree: &TrajectoryTree) -> Option<Slot> {
        if let Some(s) = self
            .measurement
            .iter()
            .find(|s| assignment.get(**s).is_none())
        {
            return Some(*s);
        }
        let mut best: Option<(Slot, f64)> = None;
        for &slot in self.space.iter().filter(|s| assignment.get(**s).is_none()) {
            let viol = self.spec.partition.closest_region(slot_state(tree, slot)).1;
            if best.is_none_or(|(_, v)| viol > v) {
                best = Some((slot, viol));
            }
        }
        best.map(|(s, _)| s)
    }

    /// Completes `assignment` with the region closest to each relaxed state.
    fn round(&self, assignment: &RegionAssignment, tree: &TrajectoryTree) -> RegionAssignment {
        let mut full = assignment.clone();
        for &slot in self.measurement.iter().chain(&self.space) {
            if full.get(slot).is_none() {
                let region = self.spec.partition.closest_region(slot_state(tree, slot)).0;
                full.set(slot, region);
            }
        }
        full
    }

    fn exact_candidate(&self, assignment: &RegionAssignment) -> Result<(Option<Candidate>, usize)> {
        let assembled = assemble_qp(self.spec, &self.topology, assignment, WeightMode::Exact)?;
        let (sol, qps) = solve_with_retry(&assembled, &self.config.qp)?;
        if sol.status != QpStatus::Optimal {
            return Ok((None, qps));
        }
        let tree = extract_tree(self.spec, &self.topology, &assembled, &sol.x)?;
        if constraint_violation(self.spec, &tree, assignment) > SOLUTION_TOL {
            return Ok((None, qps));
        }
        let x = flatten_tree(&assembled.layout, &tree);
        let cost = assembled.cost(&x);
        Ok((
            Some(Candidate {
                cost,
                assignment: assignment.clone(),
                x,
            }),
            qps,
        ))
    }

    fn evaluate(&self, node: &OpenNode, incumbent: f64) -> Result<Evaluation> {
        let assembled = assemble_qp(
            self.spec,
            &self.topology,
            &node.assignment,
            WeightMode::Optimistic,
        )?;
        let (sol, mut qps) = solve_with_retry(&assembled, &self.config.qp)?;
        let mut out = Evaluation {
            relaxation: Relaxation::Unresolved,
            qps,
            candidates: Vec::new(),
            branch_slot: None,
        };
        match sol.status {
            QpStatus::PrimalInfeasible => {
                out.relaxation = Relaxation::Infeasible;
                return Ok(out);
            }
            QpStatus::DualInfeasible => {
                return Err(Error::Numerical("relaxation is unbounded".into()));
            }
            QpStatus::MaxIterations | QpStatus::Inaccurate => {
                out.branch_slot = self.first_open_slot(&node.assignment);
                return Ok(out);
            }
            QpStatus::Optimal => {}
        }
        let bound = assembled.cost(&sol.x);
        out.relaxation = Relaxation::Solved(bound);
        if bound >= self.config.prune_threshold(incumbent) {
            return Ok(out);
        }

        let tree = extract_tree(self.spec, &self.topology, &assembled, &sol.x)?;
        out.branch_slot = self.branch_slot(&node.assignment, &tree);
        let rounded = self.round(&node.assignment, &tree);
        let viol = constraint_violation(self.spec, &tree, &rounded);
        let mut improves = true;
        if viol <= SOLUTION_TOL {
            let cost = evaluate_cost(self.spec, &tree, &rounded)?;
            improves = cost < incumbent;
            out.candidates.push(Candidate {
                cost,
                x: flatten_tree(&assembled.layout, &tree),
                assignment: rounded.clone(),
            });
        }
        if improves && rounded != node.assignment {
            let (cand, extra) = self.exact_candidate(&rounded)?;
            qps += extra;
            out.candidates.extend(cand);
        }
        out.qps = qps;
        Ok(out)
    }
}

fn evaluate_batch(ctx: &Context, batch: &[OpenNode], incumbent: f64) -> Vec<Result<Evaluation>> {
    if batch.len() == 1 {
        return vec![ctx.evaluate(&batch[0], incumbent)];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .iter()
            .map(|node| scope.spawn(move || ctx.evaluate(node, incumbent)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("node evaluation panicked"))
            .collect()
    })
}

/// Globally optimal trajectory tree and region assignment.
pub fn solve_micp(spec: &ScenarioSpec, config: &SolverConfig) -> Result<Solution> {
    spec.validate()?;
    let start = Instant::now();
    let topology = build_topology(&spec.horizon, spec.num_obs());
    let ctx = Context {
        spec,
        measurement: measurement_slots(&topology),
        space: space_slots(spec, &topology),
        topology,
        config,
    };
    let workers = config.workers.max(1);

    let mut heap = BinaryHeap::new();
    let mut next_id: u64 = 1;
    heap.push(OpenNode {
        bound: f64::NEG_INFINITY,
        id: 0,
        assignment: RegionAssignment::new(),
    });
    let mut incumbent: Option<Candidate> = None;
    let mut explored: Vec<(RegionAssignment, f64)> = Vec::new();
    let mut open_bounds: Vec<f64> = Vec::new();
    let mut stats = SolveStats {
        root_bound: f64::NEG_INFINITY,
        ..SolveStats::default()
    };
    let mut budget_hit = false;

    loop {
        let inc_cost = incumbent.as_ref().map_or(f64::INFINITY, |c| c.cost);
        let threshold = config.prune_threshold(inc_cost);
        let out_of_time = config
            .time_limit
            .is_some_and(|t| start.elapsed().as_secs_f64() >= t);
        let out_of_nodes = config.max_nodes.is_some_and(|m| stats.nodes_explored >= m);
        if out_of_time || out_of_nodes {
            budget_hit = heap.peek().is_some_and(|n| n.bound < threshold);
            break;
        }

        let mut batch = Vec::with_capacity(workers);
        while batch.len() < workers {
            match heap.pop() {
                Some(node) if node.bound < threshold => batch.push(node),
                Some(_) => {
                    stats.pruned_bound += heap.len() + 1;
                    heap.clear();
                }
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }

        let results = evaluate_batch(&ctx, &batch, inc_cost);
        for (node, result) in batch.into_iter().zip(results) {
            let eval = result?;
            stats.nodes_explored += 1;
            stats.qps_solved += eval.qps;
            let before = incumbent.as_ref().map_or(f64::INFINITY, |c| c.cost);
            let before = config.prune_threshold(before);
            for cand in eval.candidates {
                if incumbent.as_ref().is_none_or(|c| cand.cost < c.cost) {
                    log::debug!(
                        "incumbent {:.6} after {} nodes",
                        cand.cost,
                        stats.nodes_explored
                    );
                    incumbent = Some(cand);
                }
            }
            let inc_cost = incumbent.as_ref().map_or(f64::INFINITY, |c| c.cost);
            let threshold = config.prune_threshold(inc_cost);
            let bound = match eval.relaxation {
                Relaxation::Infeasible => {
                    stats.pruned_infeasible += 1;
                    continue;
                }
                Relaxation::Unresolved => {
                    stats.unresolved += 1;
                    node.bound
                }
                Relaxation::Solved(b) => {
                    if node.id == 0 {
                        stats.root_bound = b;
                    }
                    explored.push((node.assignment.clone(), b));
                    b
                }
            };
            if bound >= threshold {
                if bound < before {
                    stats.fathomed += 1;
                } else {
                    stats.pruned_bound += 1;
                }
                continue;
            }
            match eval.branch_slot {
                Some(slot) => {
                    for region in 0..spec.num_regions() {
                        heap.push(OpenNode {
                            bound,
                            id: next_id,
                            assignment: node.assignment.with(slot, region),
                        });
                        next_id += 1;
                    }
                }
                // A complete assignment whose QP could not be certified.
                None => open_bounds.push(bound),
            }
        }
    }

    let inc_cost = incumbent.as_ref().map_or(f64::INFINITY, |c| c.cost);
    let mut lowest = open_bounds.iter().copied().fold(inc_cost, f64::min);
    if budget_hit {
        lowest = heap.iter().map(|n| n.bound).fold(lowest, f64::min);
    }
    stats.wall_time_s = start.elapsed().as_secs_f64();

    let Some(best) = incumbent else {
        if budget_hit {
            return Err(Error::BudgetExceeded {
                incumbent: None,
                gap: f64::INFINITY,
                nodes: stats.nodes_explored,
            });
        }
        if !open_bounds.is_empty() {
            return Err(Error::Numerical(
                "no feasible assignment was certified; some relaxations did not converge".into(),
            ));
        }
        return Err(Error::Infeasible);
    };

    let gap = (inc_cost - lowest).max(0.0);
    let assembled = assemble_qp(spec, &ctx.topology, &best.assignment, WeightMode::Exact)?;
    let tree = extract_tree(spec, &ctx.topology, &assembled, &best.x)?;
    let cost = assembled.cost(&flatten_tree(&assembled.layout, &tree));
    let tol = config.gap_threshold(cost);
    stats.bound_violations = explored
        .iter()
        .filter(|(a, b)| a.is_subset_of(&best.assignment) && *b > cost + tol)
        .count();
    if stats.bound_violations > 0 {
        log::warn!(
            "{} lower bounds on the optimal branch exceed the final cost",
            stats.bound_violations
        );
    }
    if !open_bounds.is_empty() {
        log::warn!(
            "{} complete assignments were left uncertified; gap {gap:e}",
            open_bounds.len()
        );
    }
    log::info!(
        "solved: cost {cost:.6}, {} nodes, {} QPs, {:.2} s",
        stats.nodes_explored,
        stats.qps_solved,
        stats.wall_time_s
    );
    let solution = Solution {
        tree,
        assignment: best.assignment,
        cost,
        gap,
        stats,
    };
    if budget_hit {
        return Err(Error::BudgetExceeded {
            gap,
            nodes: solution.stats.nodes_explored,
            incumbent: Some(Box::new(solution)),
        });
    }
    Ok(solution)
}
