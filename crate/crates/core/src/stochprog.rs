//! Two-stage stochastic programs with a finite scenario distribution.
//!
//! A [`TwoStageProblem`] knows how to build its extensive form for any
//! distribution and its second-stage LP for a fixed first-stage decision.
//! [`StochasticSolver`] drives a problem through a solver backend, counts
//! every MILP and LP it solves, and computes the relative approximation
//! error of reduced distributions.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costfn::SolveStats;
use crate::error::{Error, Result};
use crate::scenario::DiscreteDistribution;
use crate::solver::{Backend, Model, SolveOptions, SolveStatus, VarId};

/// Binaries farther than this from 0 or 1 are rejected.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// First-stage decision `x` with its cost `f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageDecision {
    pub values: Vec<f64>,
    pub objective_first_stage: f64,
}

/// Extensive-form model and the columns holding the first-stage variables.
pub struct ExtensiveModel {
    pub model: Model,
    pub first_stage: Vec<VarId>,
}

pub trait TwoStageProblem: Send + Sync {
    /// Dimension of one scenario vector.
    fn scenario_dim(&self) -> usize;

    /// `min f(x) + sum_w pi_w G(x, xi_w)` over all first-stage decisions.
    fn build_extensive(&self, dist: &DiscreteDistribution) -> Result<ExtensiveModel>;

    /// Second-stage LP for fixed `x` whose optimum equals `f(x) + G(x, xi)`.
    fn build_fixed(&self, x: &FirstStageDecision, scenario: &[f64]) -> Result<Model>;

    /// `f(x)`.
    fn first_stage_cost(&self, values: &[f64]) -> f64;

    /// Re-checks the first-stage constraints.
    fn check_decision(&self, values: &[f64]) -> Result<()>;

    /// Stable identity of the problem data, used as a cache key.
    fn fingerprint(&self) -> String;

    fn mean_scenario(&self, dist: &DiscreteDistribution) -> Vec<f64> {
        dist.mean()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageSolution {
    pub decision: FirstStageDecision,
    pub objective: f64,
    pub gap: f64,
    /// False when the solve stopped on a time limit.
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// `z*(P)`.
    pub z_star_p: f64,
    /// `z*(x*(Q), P)`.
    pub z_fixed: f64,
    /// `(z_fixed - z_star_p) / z_star_p`, dimensionless.
    pub rae: f64,
    pub certified: bool,
}

impl EvaluationResult {
    pub fn rae_percent(&self) -> f64 {
        100.0 * self.rae
    }
}

/// RAE of every single-atom distribution `delta(zeta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleScenarioReport {
    pub z_star_p: f64,
    /// `sum_i p_i z(x*(zeta_j), xi_i)` per 1-based id `j` (position `j - 1`).
    pub z_fixed: Vec<f64>,
    pub rae: Vec<f64>,
    /// Ids whose RAE is within the tie tolerance of the minimum.
    pub argmin: Vec<usize>,
    pub certified: bool,
}

impl SingleScenarioReport {
    pub fn min_rae(&self) -> f64 {
        self.rae.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether `id` attains the minimum RAE up to `tol` (in RAE units, i.e.
    /// relative to `z*(P)`).
    pub fn is_optimal_pick(&self, id: usize, tol: f64) -> bool {
        id >= 1 && id <= self.rae.len() && self.rae[id - 1] - self.min_rae() <= tol
    }
}

/// Relative tie tolerance for the oracle argmin set.
pub const ORACLE_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Default)]
struct Counters {
    milp: AtomicU64,
    lp: AtomicU64,
    milp_ns: AtomicU64,
    lp_ns: AtomicU64,
}

type SolutionCache = Arc<Mutex<HashMap<(String, String), TwoStageSolution>>>;

/// Solves and evaluates a [`TwoStageProblem`] with a backend. Counters are
/// per instance; [`StochasticSolver::fork`] gives a fresh set of counters
/// that shares the `z*(P)` cache.
pub struct StochasticSolver<'a> {
    problem: &'a dyn TwoStageProblem,
    backend: Arc<dyn Backend>,
    options: SolveOptions,
    counters: Counters,
    cache: SolutionCache,
}

impl<'a> StochasticSolver<'a> {
    pub fn new(problem: &'a dyn TwoStageProblem, backend: Arc<dyn Backend>, options: SolveOptions) -> Self {
        StochasticSolver {
            problem,
            backend,
            options,
            counters: Counters::default(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn fork(&self) -> StochasticSolver<'a> {
        StochasticSolver {
            problem: self.problem,
            backend: self.backend.clone(),
            options: self.options,
            counters: Counters::default(),
            cache: self.cache.clone(),
        }
    }

    pub fn problem(&self) -> &'a dyn TwoStageProblem {
        self.problem
    }

    pub fn options(&self) -> &SolveOptions {
        &self.options
    }

    pub fn backend(&self) -> &dyn Backend {
        self.backend.as_ref()
    }

    /// Problems solved through this instance so far.
    pub fn stats(&self) -> SolveStats {
        let c = &self.counters;
        SolveStats {
            milp_count: c.milp.load(Ordering::Relaxed),
            lp_count: c.lp.load(Ordering::Relaxed),
            milp_ms: c.milp_ns.load(Ordering::Relaxed) as f64 / 1e6,
            lp_ms: c.lp_ns.load(Ordering::Relaxed) as f64 / 1e6,
        }
    }

    /// Extensive-form MILP: `x*(dist)` and `z*(dist)`.
    pub fn solve_two_stage(&self, dist: &DiscreteDistribution) -> Result<TwoStageSolution> {
        if dist.dim() != self.problem.scenario_dim() {
            return Err(Error::DimensionMismatch {
                id: 1,
                expected: self.problem.scenario_dim(),
                found: dist.dim(),
            });
        }
        let ext = self.problem.build_extensive(dist)?;
        let start = Instant::now();
        let result = self.backend.solve(&ext.model, &self.options);
        self.counters.milp.fetch_add(1, Ordering::Relaxed);
        self.counters
            .milp_ns
            .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        let sol = result?;
        let mut values = Vec::with_capacity(ext.first_stage.len());
        for &v in &ext.first_stage {
            let raw = sol.value(v);
            let rounded = raw.round();
            if (raw - rounded).abs() > INTEGRALITY_TOL {
                return Err(Error::SolverFailure(format!(
                    "first-stage value {raw} is not integral"
                )));
            }
            values.push(rounded);
        }
        self.problem.check_decision(&values)?;
        let objective_first_stage = self.problem.first_stage_cost(&values);
        Ok(TwoStageSolution {
            decision: FirstStageDecision {
                values,
                objective_first_stage,
            },
            objective: sol.objective,
            gap: sol.gap,
            certified: sol.status == SolveStatus::Optimal,
        })
    }

    /// Deterministic problem on a single scenario: `x*(xi)` and `z(x*(xi), xi)`.
    /// Always solves; the result is also cached for [`StochasticSolver::z_star`].
    pub fn solve_single_scenario(&self, scenario: &[f64]) -> Result<TwoStageSolution> {
        let dist = DiscreteDistribution::new(vec![scenario.to_vec()], vec![1.0])?;
        let sol = self.solve_two_stage(&dist)?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(self.cache_key(&dist), sol.clone());
        Ok(sol)
    }

    // A one-point distribution is keyed as the Dirac at its scenario, so
    // masses that sum to 1 only up to rounding share the entry.
    fn cache_key(&self, p: &DiscreteDistribution) -> (String, String) {
        let dist = if p.len() == 1 && p.probabilities()[0] != 1.0 {
            DiscreteDistribution::new(vec![p.scenarios()[0].values.clone()], vec![1.0])
                .expect("a one-point distribution with unit mass is valid")
        } else {
            p.clone()
        };
        (self.problem.fingerprint(), dist.fingerprint())
    }

    /// `z(x, xi) = f(x) + G(x, xi)` through one second-stage LP.
    pub fn evaluate_fixed(&self, x: &FirstStageDecision, scenario: &[f64]) -> Result<f64> {
        let model = self.problem.build_fixed(x, scenario)?;
        let start = Instant::now();
        let result = self.backend.solve(&model, &self.options);
        self.counters.lp.fetch_add(1, Ordering::Relaxed);
        self.counters
            .lp_ns
            .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        match result {
            Ok(sol) => Ok(sol.objective),
            Err(Error::Infeasible(msg)) => Err(Error::Infeasible(format!(
                "second stage infeasible for a feasible first stage (recourse violated): {msg}"
            ))),
            Err(e) => Err(e),
        }
    }

    /// Per-scenario values `z(x, xi_i)`, solved concurrently, in id order.
    pub fn evaluate_per_scenario(&self, x: &FirstStageDecision, dist: &DiscreteDistribution) -> Result<Vec<f64>> {
        dist.scenarios()
            .par_iter()
            .map(|s| self.evaluate_fixed(x, &s.values))
            .collect()
    }

    /// `z*(x, P) = sum_i p_i z(x, xi_i)`.
    pub fn evaluate_decision(&self, x: &FirstStageDecision, dist: &DiscreteDistribution) -> Result<f64> {
        let values = self.evaluate_per_scenario(x, dist)?;
        Ok(values
            .iter()
            .zip(dist.probabilities())
            .map(|(z, p)| p * z)
            .sum())
    }

    /// `x*(P)` and `z*(P)`, cached per (problem, distribution).
    pub fn z_star(&self, p: &DiscreteDistribution) -> Result<TwoStageSolution> {
        let key = self.cache_key(p);
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let sol = if p.len() == 1 {
            self.solve_two_stage(&DiscreteDistribution::new(vec![p.scenarios()[0].values.clone()], vec![1.0])?)?
        } else {
            self.solve_two_stage(p)?
        };
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, sol.clone());
        Ok(sol)
    }

    fn guarded_z_star(&self, p: &DiscreteDistribution) -> Result<TwoStageSolution> {
        let z = self.z_star(p)?;
        if z.objective <= 0.0 {
            return Err(Error::DegenerateDenominator(z.objective));
        }
        Ok(z)
    }

    /// Relative approximation error of deciding under `q` when the truth is `p`.
    pub fn rae(&self, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<EvaluationResult> {
        let z_star = self.guarded_z_star(p)?;
        let x_q = self.z_star(q)?;
        self.rae_of_decision(p, &z_star, &x_q.decision, x_q.certified)
    }

    fn rae_of_decision(
        &self,
        p: &DiscreteDistribution,
        z_star: &TwoStageSolution,
        x: &FirstStageDecision,
        certified: bool,
    ) -> Result<EvaluationResult> {
        let z_fixed = self.evaluate_decision(x, p)?;
        Ok(EvaluationResult {
            z_star_p: z_star.objective,
            z_fixed,
            rae: (z_fixed - z_star.objective) / z_star.objective,
            certified: certified && z_star.certified,
        })
    }

    /// RAE of the full sample against itself (the SAA baseline).
    pub fn saa_baseline(&self, p: &DiscreteDistribution) -> Result<EvaluationResult> {
        let z_star = self.guarded_z_star(p)?;
        self.rae_of_decision(p, &z_star, &z_star.decision.clone(), z_star.certified)
    }

    /// RAE of every Dirac `delta(zeta_j)`, using `x*(delta(zeta_j)) = x*(zeta_j)`.
    pub fn single_scenario_oracle(&self, p: &DiscreteDistribution) -> Result<SingleScenarioReport> {
        let z_star = self.guarded_z_star(p)?;
        let singles: Vec<TwoStageSolution> = (1..=p.len())
            .into_par_iter()
            .map(|id| self.z_star(&p.dirac(id)?))
            .collect::<Result<_>>()?;
        let mut z_fixed = Vec::with_capacity(p.len());
        for s in &singles {
            z_fixed.push(self.evaluate_decision(&s.decision, p)?);
        }
        let rae: Vec<f64> = z_fixed
            .iter()
            .map(|z| (z - z_star.objective) / z_star.objective)
            .collect();
        let certified = z_star.certified && singles.iter().all(|s| s.certified);
        Ok(SingleScenarioReport {
            z_star_p: z_star.objective,
            argmin: argmin_set(&z_fixed, ORACLE_TIE_TOL),
            z_fixed,
            rae,
            certified,
        })
    }
}

/// 1-based ids of all entries within `rel_tol` (relative) of the minimum.
pub fn argmin_set(values: &[f64], rel_tol: f64) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = rel_tol * min.abs().max(1.0);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v - min <= tol)
        .map(|(k, _)| k + 1)
        .collect()
}
