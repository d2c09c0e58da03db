//! Backend-neutral LP/MILP model and the solver contract.
//!
//! Models are plain data: variables with bounds and objective coefficients,
//! linear rows with two-sided bounds. A [`Backend`] turns a model into a
//! [`Solution`]. The HiGHS backend is the only one shipped; the `SCENRED_SOLVER`
//! environment variable selects a backend by name.

mod highs;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::highs::HighsBackend;

/// Environment variable consulted by [`backend_from_env`].
pub const SOLVER_ENV: &str = "SCENRED_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// A minimization model.
#[derive(Debug, Clone, Default)]
pub struct Model {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective_offset: f64,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, objective: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable {
            lower,
            upper,
            objective,
            kind,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, objective: f64) -> VarId {
        self.add_var(lower, upper, objective, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, objective: f64) -> VarId {
        self.add_var(0.0, 1.0, objective, VarKind::Binary)
    }

    /// `lower <= sum(terms) <= upper`; use infinities for one-sided rows.
    pub fn add_row(&mut self, terms: Vec<(VarId, f64)>, lower: f64, upper: f64) {
        self.rows.push(Constraint {
            terms,
            lower,
            upper,
        });
    }

    pub fn add_eq(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(terms, rhs, rhs);
    }

    pub fn add_le(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(terms, f64::NEG_INFINITY, rhs);
    }

    pub fn add_ge(&mut self, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(terms, rhs, f64::INFINITY);
    }

    /// Adds `delta` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: VarId, delta: f64) {
        self.vars[var.0].objective += delta;
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_offset += c;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    /// Pins a variable to a value (both bounds).
    pub fn fix(&mut self, var: VarId, value: f64) {
        let v = &mut self.vars[var.0];
        v.lower = value;
        v.upper = value;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_mip(&self) -> bool {
        self.vars
            .iter()
            .any(|v| v.kind == VarKind::Binary && v.lower != v.upper)
    }

    /// Objective of a given assignment, including the constant offset.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .vars
                .iter()
                .zip(values)
                .map(|(v, x)| v.objective * x)
                .sum::<f64>()
    }

    /// Largest bound or row violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|(id, c)| c * values[id.0]).sum();
            worst = worst.max(r.lower - lhs).max(lhs - r.upper);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative MILP gap; `0` requests proven optimality.
    pub mip_gap: f64,
    /// Seconds per solve.
    pub time_limit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mip_gap: 0.0,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Time limit hit with an incumbent; not certified.
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub values: Vec<f64>,
}

impl Solution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn is_certified(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Any engine able to solve [`Model`]s to a configured gap.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &Model, options: &SolveOptions) -> Result<Solution>;
}

pub fn backend_by_name(name: &str) -> Result<Arc<dyn Backend>> {
    match name.to_ascii_lowercase().as_str() {
        "highs" | "" => Ok(Arc::new(HighsBackend)),
        other => Err(Error::Config(format!("unknown solver backend '{other}'"))),
    }
}

/// Backend named by `SCENRED_SOLVER`, HiGHS when unset.
pub fn backend_from_env() -> Result<Arc<dyn Backend>> {
    backend_by_name(&std::env::var(SOLVER_ENV).unwrap_or_default())
}
