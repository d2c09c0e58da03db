//! Transport distance between `P` and a distribution supported on a subset
//! of its atoms.
//!
//! For a fixed support subset `J` the Monge-Kantorovich problem has a closed
//! form: every unselected atom ships its whole mass to its cheapest selected
//! atom. [`discrete_distance`] and [`redistribute`] implement that closed
//! form; [`transport_lp_oracle`] solves the transport LP explicitly and is
//! only used to cross-check them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{
    compensated_sum, CostMatrix, DiscreteDistribution, ReducedDistribution, SupportSubset,
};
use crate::solver::{Backend, Model, SolveOptions};

/// Above this many atoms the outer sum uses compensated summation.
pub const COMPENSATED_SUM_THRESHOLD: usize = 10_000;

fn check_inputs(p: &DiscreteDistribution, subset: &SupportSubset, c: &CostMatrix) -> Result<()> {
    c.check_shape(p.len())?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    for &j in subset.indices() {
        if j == 0 || j > p.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                n: p.len(),
            });
        }
    }
    Ok(())
}

/// For each 0-based atom, the cheapest selected 0-based atom and its cost.
/// Ties go to the smallest id.
fn nearest_selected(subset: &SupportSubset, c: &CostMatrix, i: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for &j in subset.indices() {
        let j0 = j - 1;
        let v = c.at(i, j0);
        if v < best.1 || (v == best.1 && j0 < best.0) {
            best = (j0, v);
        }
    }
    best
}

/// `D(P, J) = sum_{i not in J} p_i * min_{j in J} C[i][j]`; zero when `J = I`.
pub fn discrete_distance(p: &DiscreteDistribution, subset: &SupportSubset, c: &CostMatrix) -> Result<f64> {
    check_inputs(p, subset, c)?;
    let n = p.len();
    let mask = subset.mask(n);
    let probs = p.probabilities();
    let terms = (0..n)
        .filter(|&i| !mask[i])
        .map(|i| probs[i] * nearest_selected(subset, c, i).1);
    Ok(if n > COMPENSATED_SUM_THRESHOLD {
        compensated_sum(terms)
    } else {
        terms.sum()
    })
}

/// Optimal redistribution: `q_j = p_j + sum_{i in I_j} p_i`, where `I_j`
/// holds the unselected atoms whose cheapest selected atom is `j`.
pub fn redistribute(
    p: &DiscreteDistribution,
    subset: &SupportSubset,
    c: &CostMatrix,
) -> Result<ReducedDistribution> {
    check_inputs(p, subset, c)?;
    let n = p.len();
    let mask = subset.mask(n);
    let probs = p.probabilities();
    let mut assignment = vec![0usize; n];
    let mut mass = vec![0.0f64; n];
    for i in 0..n {
        let target = if mask[i] {
            i
        } else {
            nearest_selected(subset, c, i).0
        };
        assignment[i] = target + 1;
        mass[target] += probs[i];
    }
    let q = subset.indices().iter().map(|&j| mass[j - 1]).collect();
    Ok(ReducedDistribution::from_parts(
        n,
        subset.clone(),
        q,
        assignment,
    ))
}

/// Columns of `C` belonging to `J`, as a row-major `n x |J|` block.
pub fn cost_block(c: &CostMatrix, subset: &SupportSubset) -> Vec<f64> {
    let n = c.n();
    let mut block = Vec::with_capacity(n * subset.len());
    for i in 0..n {
        for &j in subset.indices() {
            block.push(c.at(i, j - 1));
        }
    }
    block
}

/// Solution of the explicit transport LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` flows.
    pub plan: Vec<f64>,
    pub objective: f64,
}

impl TransportPlan {
    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }
}

/// Solves `min sum pi_ij c_ij` subject to row sums `p` and column sums `q`.
/// `cost` is the row-major `n x m` block between the atoms of `p` and `q`.
pub fn transport_lp_oracle(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cost: &[f64],
    backend: &dyn Backend,
) -> Result<TransportPlan> {
    let (n, m) = (p.len(), q.len());
    if cost.len() != n * m {
        return Err(Error::MatrixShapeMismatch {
            rows: cost.len() / m.max(1),
            cols: m,
            n,
        });
    }
    let p_sum: f64 = p.probabilities().iter().sum();
    let q_sum: f64 = q.probabilities().iter().sum();
    if (p_sum - q_sum).abs() > 1e-9 {
        return Err(Error::InfeasibleMarginals { p_sum, q_sum });
    }
    let mut model = Model::new();
    let vars: Vec<_> = cost
        .iter()
        .map(|&c| model.add_continuous(0.0, f64::INFINITY, c))
        .collect();
    for (i, &pi) in p.probabilities().iter().enumerate() {
        model.add_eq((0..m).map(|j| (vars[i * m + j], 1.0)).collect(), pi);
    }
    for (j, &qj) in q.probabilities().iter().enumerate() {
        model.add_eq((0..n).map(|i| (vars[i * m + j], 1.0)).collect(), qj);
    }
    let sol = backend.solve(&model, &SolveOptions::default())?;
    Ok(TransportPlan {
        rows: n,
        cols: m,
        plan: sol.values,
        objective: sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costfn::{cost_matrix_id, SolveStats};
    use crate::scenario::CostKind;

    fn line() -> (DiscreteDistribution, CostMatrix) {
        let p = DiscreteDistribution::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.5, 0.3, 0.2])
            .unwrap();
        let c = cost_matrix_id(&p).unwrap();
        (p, c)
    }

    #[test]
    fn line_distance_single_middle() {
        let (p, c) = line();
        let j = SupportSubset::new(vec![2], 3).unwrap();
        assert!((discrete_distance(&p, &j, &c).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn line_distance_two_ends() {
        let (p, c) = line();
        let j = SupportSubset::new(vec![1, 3], 3).unwrap();
        assert!((discrete_distance(&p, &j, &c).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn full_subset_has_zero_distance() {
        let (p, c) = line();
        let j = SupportSubset::full(3);
        assert_eq!(discrete_distance(&p, &j, &c).unwrap(), 0.0);
        let r = redistribute(&p, &j, &c).unwrap();
        assert_eq!(r.probabilities(), p.probabilities());
    }

    #[test]
    fn line_redistribution() {
        let (p, c) = line();
        let j = SupportSubset::new(vec![2], 3).unwrap();
        let r = redistribute(&p, &j, &c).unwrap();
        assert!((r.probabilities()[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.assignment(), &[2, 2, 2]);
        assert_eq!(r.merged_into(2), vec![1, 3]);
    }

    #[test]
    fn nothing_unselected_keeps_mass() {
        let p = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let c = CostMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0], CostKind::Id, SolveStats::default())
            .unwrap();
        let r = redistribute(&p, &SupportSubset::new(vec![1, 2], 2).unwrap(), &c).unwrap();
        assert_eq!(r.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        // atom 2 is equidistant from 1 and 3; subset given in order [3, 1]
        let (p, c) = line();
        let j = SupportSubset::new(vec![3, 1], 3).unwrap();
        let r = redistribute(&p, &j, &c).unwrap();
        assert_eq!(r.assignment(), &[1, 1, 3]);
        assert!((r.probabilities()[0] - 0.2).abs() < 1e-15);
        assert!((r.probabilities()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn shape_and_index_errors() {
        let (p, c) = line();
        let small = DiscreteDistribution::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let j = SupportSubset::new(vec![1], 1).unwrap();
        assert!(matches!(
            discrete_distance(&small, &j, &c),
            Err(Error::MatrixShapeMismatch { .. })
        ));
        let j = SupportSubset::new(vec![1], 3).unwrap();
        assert!(discrete_distance(&p, &j, &c).is_ok());
    }

    #[test]
    fn block_extraction() {
        let (_, c) = line();
        let j = SupportSubset::new(vec![3, 1], 3).unwrap();
        assert_eq!(cost_block(&c, &j), vec![4.0, 0.0, 1.0, 1.0, 0.0, 4.0]);
    }
}
