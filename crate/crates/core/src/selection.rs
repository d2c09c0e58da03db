//! Greedy forward selection of a reduced support.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{CostMatrix, DiscreteDistribution, ReducedDistribution, SupportSubset};
use crate::transport::{discrete_distance, redistribute};

/// Largest `n` for which the m = 1 enumeration check is run by default.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 5000;

/// One greedy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Chosen scenario id.
    pub chosen: usize,
    /// `(candidate id, objective)` for every unselected candidate, ascending id.
    /// The objective of a candidate is the distance `D(P, J + {candidate})`.
    pub candidates: Vec<(usize, f64)>,
}

impl Pick {
    pub fn objective(&self) -> f64 {
        self.candidates
            .iter()
            .find(|(id, _)| *id == self.chosen)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub picks: Vec<Pick>,
    pub reduced: ReducedDistribution,
    /// `D(P, J)` of the final subset.
    pub distance: f64,
}

impl SelectionTrace {
    pub fn subset(&self) -> &SupportSubset {
        self.reduced.subset()
    }

    /// Distance after each iteration.
    pub fn distances(&self) -> Vec<f64> {
        self.picks.iter().map(Pick::objective).collect()
    }
}

/// Forward selection: starting from `J = {}`, repeatedly add the unselected
/// scenario that minimizes the resulting transport distance, then
/// redistribute the mass of the remaining scenarios.
///
/// The running minimum `min_{j in J} C[i][j]` is kept per scenario, so each
/// iteration costs `O(n^2)`. Ties go to the smallest id.
pub fn forward_select(p: &DiscreteDistribution, m: usize, c: &CostMatrix) -> Result<SelectionTrace> {
    let n = p.len();
    if m < 1 || m > n {
        return Err(Error::InvalidM { m, n });
    }
    c.check_shape(n)?;
    let probs = p.probabilities();
    let mut selected = vec![false; n];
    let mut current_min = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(m);
    let mut picks = Vec::with_capacity(m);

    for iteration in 1..=m {
        let remaining: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
        let objectives: Vec<f64> = remaining
            .par_iter()
            .map(|&cand| {
                remaining
                    .iter()
                    .filter(|&&i| i != cand)
                    .map(|&i| probs[i] * current_min[i].min(c.at(i, cand)))
                    .sum()
            })
            .collect();
        let (best_pos, _) = objectives
            .iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |best, (k, &v)| {
                if v < best.1 {
                    (k, v)
                } else {
                    best
                }
            });
        let chosen = remaining[best_pos];
        selected[chosen] = true;
        for i in 0..n {
            current_min[i] = current_min[i].min(c.at(i, chosen));
        }
        order.push(chosen + 1);
        picks.push(Pick {
            iteration,
            chosen: chosen + 1,
            candidates: remaining
                .iter()
                .zip(&objectives)
                .map(|(&i, &v)| (i + 1, v))
                .collect(),
        });
    }

    let subset = SupportSubset::new(order, n)?;
    let reduced = redistribute(p, &subset, c)?;
    let distance = discrete_distance(p, &subset, c)?;
    Ok(SelectionTrace {
        picks,
        reduced,
        distance,
    })
}

/// Whether the first forward-selection pick attains `min_j D(P, {j})`,
/// checked by enumerating every singleton.
pub fn first_pick_globally_optimal_check(p: &DiscreteDistribution, c: &CostMatrix) -> Result<bool> {
    first_pick_check_with_budget(p, c, DEFAULT_ENUMERATION_BUDGET)
}

pub fn first_pick_check_with_budget(
    p: &DiscreteDistribution,
    c: &CostMatrix,
    budget: usize,
) -> Result<bool> {
    let n = p.len();
    if n > budget {
        return Err(Error::BudgetExceeded { n, budget });
    }
    let trace = forward_select(p, 1, c)?;
    let picked = discrete_distance(p, trace.subset(), c)?;
    let mut best = f64::INFINITY;
    for j in 1..=n {
        let d = discrete_distance(p, &SupportSubset::new(vec![j], n)?, c)?;
        best = best.min(d);
    }
    Ok(picked <= best + 1e-10)
}
