//! The library's unit commitment models against brute-force enumeration and
//! an independently written dispatch LP.

mod common;

use std::sync::Arc;

use rand::Rng;

use scenred::solver::{HighsBackend, SolveOptions};
use scenred::stochprog::{FirstStageDecision, StochasticSolver, TwoStageProblem};
use scenred::suc::desk_instance;
use scenred::DiscreteDistribution;

use common::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn desk_extensive_form_matches_enumeration() {
    let inst = desk_instance();
    let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
    let mut r = rng(11);
    for n in 1..=4 {
        let p = random_scenarios(&inst, n, &mut r);
        let got = solver.solve_two_stage(&p).unwrap();
        let want = enumerate_optimum(&inst, &p);
        assert!(close(got.objective, want, 1e-9), "n = {n}: {} vs {want}", got.objective);
        assert!(got.certified);
    }
}

#[test]
fn random_instances_match_enumeration() {
    let mut r = rng(12);
    for k in 0..6 {
        let inst = random_instance(&mut r, 3, 3, 3);
        let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
        let p = random_scenarios(&inst, 2, &mut r);
        let got = solver.solve_two_stage(&p).unwrap().objective;
        let want = enumerate_optimum(&inst, &p);
        assert!(close(got, want, 1e-9), "instance {k}: {got} vs {want}");
    }
}

#[test]
fn fixed_dispatch_matches_independent_lp() {
    let mut r = rng(13);
    for _ in 0..4 {
        let inst = random_instance(&mut r, 3, 2, 3);
        let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
        let p = random_scenarios(&inst, 2, &mut r);
        for paths in feasible_commitments(&inst) {
            let values = decision_vector(&inst, &paths);
            inst.check_decision(&values).unwrap();
            let x = FirstStageDecision {
                objective_first_stage: inst.first_stage_cost(&values),
                values,
            };
            for s in p.scenarios() {
                let got = solver.evaluate_fixed(&x, &s.values).unwrap();
                let want = commitment_cost(&inst, &paths) + dispatch_cost(&inst, &paths, &s.values);
                assert!(close(got, want, 1e-9), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn infeasible_paths_are_rejected() {
    let inst = desk_instance();
    // G1 has been on for four periods and must stay up two; G2 starts off
    // and may not start then stop within its minimum up time
    let paths = vec![vec![true, true], vec![true, false]];
    assert!(!path_is_feasible(&inst.generators[1], &paths[1]));
    let values = decision_vector(&inst, &paths);
    assert!(inst.check_decision(&values).is_err());
}

#[test]
fn saa_decision_has_zero_error() {
    let inst = desk_instance();
    let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
    let p = random_scenarios(&inst, 5, &mut rng(14));
    let e = solver.saa_baseline(&p).unwrap();
    assert!(e.rae.abs() <= 1e-9, "{}", e.rae);
}

#[test]
fn oracle_matches_direct_evaluation() {
    let inst = desk_instance();
    let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
    let p = random_scenarios(&inst, 6, &mut rng(15));
    let report = solver.single_scenario_oracle(&p).unwrap();
    for j in 1..=p.len() {
        let direct = solver.rae(&p, &p.dirac(j).unwrap()).unwrap();
        assert!(close(direct.rae, report.rae[j - 1], 1e-12));
        assert!(report.rae[j - 1] >= -1e-9);
    }
    assert!(report.argmin.iter().all(|&j| close(report.rae[j - 1], report.min_rae(), 1e-9)));
}

#[test]
fn wind_within_capacity_only() {
    let inst = desk_instance();
    let solver = StochasticSolver::new(&inst, Arc::new(HighsBackend), SolveOptions::default());
    let bad = DiscreteDistribution::new(vec![vec![0.5, 1.5]], vec![1.0]).unwrap();
    assert!(solver.solve_two_stage(&bad).is_err());
    let ok: Vec<f64> = (0..2).map(|_| rng(16).gen_range(0.0..1.0)).collect();
    assert!(solver.solve_single_scenario(&ok).is_ok());
}
