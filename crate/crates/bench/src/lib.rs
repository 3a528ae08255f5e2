//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use moclqr_core::qp::TripletBuilder;
use moclqr_core::{load_scenario, QpProblem, ScenarioSpec};

pub fn scenario(name: &str) -> ScenarioSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    load_scenario(&path).expect("bundled scenario loads")
}

/// Box-constrained smoothing problem with `n` variables: minimize
/// `sum (x_i - t_i)^2 + sum (x_{i+1} - x_i)^2` subject to `|x_i| <= 0.5` and
/// `x_{i+1} - x_i` in `[-0.1, 0.1]`, for a sawtooth target `t`.
pub fn smoothing_qp(n: usize) -> QpProblem {
    let mut p = TripletBuilder::new(n, n);
    for i in 0..n {
        let neighbours = usize::from(i > 0) + usize::from(i + 1 < n);
        p.push(i, i, 2.0 + 2.0 * neighbours as f64);
        if i + 1 < n {
            p.push(i, i + 1, -2.0);
        }
    }
    let q = (0..n)
        .map(|i| -2.0 * ((i % 7) as f64 / 3.0 - 1.0))
        .collect();
    let mut a = TripletBuilder::new(2 * n - 1, n);
    let mut l = vec![-0.5; n];
    let mut u = vec![0.5; n];
    for i in 0..n {
        a.push(i, i, 1.0);
    }
    for i in 0..n - 1 {
        a.push(n + i, i, -1.0);
        a.push(n + i, i + 1, 1.0);
        l.push(-0.1);
        u.push(0.1);
    }
    QpProblem::new(p.build(), q, a.build(), l, u).expect("well-formed problem")
}
