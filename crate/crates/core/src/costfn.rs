//! The five transport cost functions and the solver work each one needs.
//!
//! | kind | MILPs | LPs       |
//! |------|-------|-----------|
//! | ID   | 0     | 0         |
//! | Mo   | 1     | n         |
//! | Br   | n     | 0         |
//! | Be   | n     | n^2 - n   |
//! | Pr   | n     | n^2 - n   |

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{CostKind, CostMatrix, DiscreteDistribution};
use crate::stochprog::{FirstStageDecision, StochasticSolver, TwoStageSolution};

/// Solver work attributed to one computation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub milp_count: u64,
    pub lp_count: u64,
    /// Summed solver time of the MILPs, milliseconds.
    pub milp_ms: f64,
    /// Summed solver time of the LPs, milliseconds.
    pub lp_ms: f64,
}

impl SolveStats {
    pub fn counts(&self) -> (u64, u64) {
        (self.milp_count, self.lp_count)
    }

    /// Expected `(MILPs, LPs)` for building a cost matrix of `kind` on `n` scenarios.
    pub fn expected_counts(kind: CostKind, n: u64) -> (u64, u64) {
        match kind {
            CostKind::Id => (0, 0),
            CostKind::Mo => (1, n),
            CostKind::Br => (n, 0),
            CostKind::Be | CostKind::Pr => (n, n * n - n),
        }
    }
}

/// `x*(xi_i)` and `z(x*(xi_i), xi_i)` for every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleScenarioSolutions {
    pub decisions: Vec<FirstStageDecision>,
    pub objectives: Vec<f64>,
    pub certified: bool,
}

/// `Z[i][j] = z(x*(zeta_j), xi_i)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvaluationMatrix {
    pub n: usize,
    pub z: Vec<f64>,
}

impl CrossEvaluationMatrix {
    /// Entry for 0-based `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.n + j]
    }

    /// Largest `Z[i][i] - Z[i][j]`, i.e. how far the diagonal misses being
    /// the row minimum. Non-positive when every single-scenario solve is
    /// optimal.
    pub fn worst_optimality_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max(self.at(i, i) - self.at(i, j));
            }
        }
        worst
    }
}

/// Tolerance below zero up to which a regret is clamped to zero: MILP gap
/// plus solver feasibility noise, relative to `|Z[i][i]|`.
pub fn regret_clamp_tolerance(z_ii: f64, mip_gap: f64) -> f64 {
    (1e-6 + mip_gap) * z_ii.abs().max(1.0)
}

/// `C[i][j] = ||xi_i - zeta_j||^2`.
pub fn cost_matrix_id(p: &DiscreteDistribution) -> Result<CostMatrix> {
    let n = p.len();
    let s = p.scenarios();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = s[i]
                .values
                .iter()
                .zip(&s[j].values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    CostMatrix::new(n, entries, CostKind::Id, SolveStats::default())
}

/// Expected-value problem: the deterministic problem at the mean scenario.
pub fn solve_evp(solver: &StochasticSolver, p: &DiscreteDistribution) -> Result<TwoStageSolution> {
    let mean = solver.problem().mean_scenario(p);
    solver.solve_single_scenario(&mean)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64() * 1e3))
}

/// `C[i][j] = |z(x*(xi_bar), xi_i) - z(x*(xi_bar), zeta_j)|`.
pub fn cost_matrix_mo(solver: &StochasticSolver, p: &DiscreteDistribution) -> Result<CostMatrix> {
    let local = solver.fork();
    let evp = solve_evp(&local, p)?;
    let a = local.evaluate_per_scenario(&evp.decision, p)?;
    let n = p.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = (a[i] - a[j]).abs();
        }
    }
    CostMatrix::new(n, entries, CostKind::Mo, local.stats())
}

/// Solves the `n` single-scenario MILPs concurrently.
pub fn solve_single_scenarios(
    solver: &StochasticSolver,
    p: &DiscreteDistribution,
) -> Result<SingleScenarioSolutions> {
    let sols: Vec<TwoStageSolution> = p
        .scenarios()
        .par_iter()
        .map(|s| solver.solve_single_scenario(&s.values))
        .collect::<Result<_>>()?;
    let certified = sols.iter().all(|s| s.certified);
    let objectives = sols.iter().map(|s| s.objective).collect();
    Ok(SingleScenarioSolutions {
        decisions: sols.into_iter().map(|s| s.decision).collect(),
        objectives,
        certified,
    })
}

/// `C[i][j] = |z(x*(xi_i), xi_i) - z(x*(zeta_j), zeta_j)|`.
pub fn cost_matrix_br(solver: &StochasticSolver, p: &DiscreteDistribution) -> Result<CostMatrix> {
    let local = solver.fork();
    let sols = solve_single_scenarios(&local, p)?;
    br_from_objectives(&sols.objectives, local.stats())
}

/// `c^Br` from single-scenario objectives solved elsewhere.
pub fn br_from_objectives(z: &[f64], stats: SolveStats) -> Result<CostMatrix> {
    let n = z.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = (z[i] - z[j]).abs();
        }
    }
    CostMatrix::new(n, entries, CostKind::Br, stats)
}

/// Fills `Z[i][j]` with fixed-decision LPs off the diagonal; the diagonal is
/// copied from the single-scenario objectives.
pub fn cross_evaluate(
    solver: &StochasticSolver,
    p: &DiscreteDistribution,
    sols: &SingleScenarioSolutions,
) -> Result<CrossEvaluationMatrix> {
    let n = p.len();
    if sols.decisions.len() != n || sols.objectives.len() != n {
        return Err(Error::MatrixShapeMismatch {
            rows: sols.decisions.len(),
            cols: sols.objectives.len(),
            n,
        });
    }
    let scen = p.scenarios();
    let z: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                Ok(sols.objectives[i])
            } else {
                solver.evaluate_fixed(&sols.decisions[j], &scen[i].values)
            }
        })
        .collect::<Result<_>>()?;
    Ok(CrossEvaluationMatrix { n, z })
}

/// Regret matrix `Z[i][j] - Z[i][i]` with the tolerance clamp applied.
fn regrets(z: &CrossEvaluationMatrix, mip_gap: f64) -> Result<Vec<f64>> {
    let n = z.n;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let zii = z.at(i, i);
        let tol = regret_clamp_tolerance(zii, mip_gap);
        for j in 0..n {
            if i == j {
                continue;
            }
            let raw = z.at(i, j) - zii;
            if raw < -tol {
                return Err(Error::NegativeRegret {
                    i: i + 1,
                    j: j + 1,
                    value: raw,
                });
            }
            out[i * n + j] = raw.max(0.0);
        }
    }
    Ok(out)
}

/// `c^Pr` from an existing cross-evaluation.
pub fn pr_from_cross(z: &CrossEvaluationMatrix, mip_gap: f64, stats: SolveStats) -> Result<CostMatrix> {
    CostMatrix::new(z.n, regrets(z, mip_gap)?, CostKind::Pr, stats)
}

/// `c^Be` from an existing cross-evaluation: the symmetrized regret.
pub fn be_from_cross(z: &CrossEvaluationMatrix, mip_gap: f64, stats: SolveStats) -> Result<CostMatrix> {
    let n = z.n;
    let r = regrets(z, mip_gap)?;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = 0.5 * (r[i * n + j] + r[j * n + i]);
        }
    }
    CostMatrix::new(n, entries, CostKind::Be, stats)
}

/// Single-scenario solutions plus their cross-evaluation, with the work spent.
pub fn cross_evaluation_with_stats(
    solver: &StochasticSolver,
    p: &DiscreteDistribution,
) -> Result<(SingleScenarioSolutions, CrossEvaluationMatrix, SolveStats)> {
    let local = solver.fork();
    let sols = solve_single_scenarios(&local, p)?;
    let z = cross_evaluate(&local, p, &sols)?;
    Ok((sols, z, local.stats()))
}

/// `2 c^Be[i][j] = Z[i][j] - Z[i][i] + Z[j][i] - Z[j][j]`.
pub fn cost_matrix_be(solver: &StochasticSolver, p: &DiscreteDistribution) -> Result<CostMatrix> {
    let (_, z, stats) = cross_evaluation_with_stats(solver, p)?;
    be_from_cross(&z, solver.options().mip_gap, stats)
}

/// `c^Pr[i][j] = Z[i][j] - Z[i][i]`, generally nonsymmetric.
pub fn cost_matrix_pr(solver: &StochasticSolver, p: &DiscreteDistribution) -> Result<CostMatrix> {
    let (_, z, stats) = cross_evaluation_with_stats(solver, p)?;
    pr_from_cross(&z, solver.options().mip_gap, stats)
}

/// Builds one cost matrix of the given kind. `solver` may be `None` only for
/// [`CostKind::Id`].
pub fn cost_matrix(
    kind: CostKind,
    solver: Option<&StochasticSolver>,
    p: &DiscreteDistribution,
) -> Result<(CostMatrix, f64)> {
    if kind.needs_problem() && solver.is_none() {
        return Err(Error::Config(format!("cost function {kind} requires a problem instance")));
    }
    match kind {
        CostKind::Id => timed(|| cost_matrix_id(p)),
        CostKind::Mo => {
            let s = solver.expect("checked above");
            timed(|| cost_matrix_mo(s, p))
        }
        CostKind::Br => {
            let s = solver.expect("checked above");
            timed(|| cost_matrix_br(s, p))
        }
        CostKind::Be => {
            let s = solver.expect("checked above");
            timed(|| cost_matrix_be(s, p))
        }
        CostKind::Pr => {
            let s = solver.expect("checked above");
            timed(|| cost_matrix_pr(s, p))
        }
    }
}
