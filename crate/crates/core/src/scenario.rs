//! Scenarios, discrete distributions over them, support subsets and cost
//! matrices. Everything here is immutable once constructed.
//!
//! Scenario ids are 1-based throughout the public API (`1..=n`); the
//! 0-based storage index is only used inside the crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costfn::SolveStats;
use crate::error::{Error, Result};

/// Absolute tolerance on `sum(p) == 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub values: Vec<f64>,
}

/// Finite distribution `sum_i p_i * delta(xi_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    scenarios: Vec<Scenario>,
    probabilities: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds and validates a distribution. Ids are assigned `1..=n` in input
    /// order.
    pub fn new(vectors: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput);
        }
        if vectors.len() != probabilities.len() {
            return Err(Error::SchemaViolation(format!(
                "{} scenarios but {} probabilities",
                vectors.len(),
                probabilities.len()
            )));
        }
        let scenarios = vectors
            .into_iter()
            .enumerate()
            .map(|(k, values)| Scenario { id: k + 1, values })
            .collect();
        let dist = DiscreteDistribution {
            scenarios,
            probabilities,
        };
        validate_distribution(&dist)?;
        Ok(dist)
    }

    /// Builds a distribution from explicit scenario records without
    /// renumbering. Used to check externally supplied data.
    pub fn from_parts(scenarios: Vec<Scenario>, probabilities: Vec<f64>) -> Result<Self> {
        let dist = DiscreteDistribution {
            scenarios,
            probabilities,
        };
        validate_distribution(&dist)?;
        Ok(dist)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.values.len())
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Scenario by 1-based id.
    pub fn scenario(&self, id: usize) -> Result<&Scenario> {
        if id == 0 || id > self.len() {
            return Err(Error::IndexOutOfRange {
                index: id,
                n: self.len(),
            });
        }
        Ok(&self.scenarios[id - 1])
    }

    /// Probability of the scenario with 1-based id.
    pub fn probability(&self, id: usize) -> Result<f64> {
        self.scenario(id)?;
        Ok(self.probabilities[id - 1])
    }

    /// Probability-weighted mean scenario.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (s, &p) in self.scenarios.iter().zip(&self.probabilities) {
            for (m, v) in mean.iter_mut().zip(&s.values) {
                *m += p * v;
            }
        }
        mean
    }

    /// Dirac distribution on the scenario with 1-based id.
    pub fn dirac(&self, id: usize) -> Result<DiscreteDistribution> {
        let s = self.scenario(id)?;
        DiscreteDistribution::new(vec![s.values.clone()], vec![1.0])
    }

    /// Stable content hash over dimensions, values and probabilities.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for (s, p) in self.scenarios.iter().zip(&self.probabilities) {
            h.update(p.to_bits().to_le_bytes());
            for v in &s.values {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Checks every distribution invariant and names the first violation.
pub fn validate_distribution(dist: &DiscreteDistribution) -> Result<()> {
    if dist.scenarios.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dist.scenarios.len() != dist.probabilities.len() {
        return Err(Error::SchemaViolation(
            "scenario and probability counts differ".into(),
        ));
    }
    let dim = dist.scenarios[0].values.len();
    for (k, s) in dist.scenarios.iter().enumerate() {
        if s.id != k + 1 {
            return Err(Error::SchemaViolation(format!(
                "scenario ids must be contiguous from 1, found {} at position {}",
                s.id,
                k + 1
            )));
        }
        if s.values.len() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                id: s.id,
                expected: dim.max(1),
                found: s.values.len(),
            });
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                what: format!("scenario {}", s.id),
            });
        }
    }
    for (k, &p) in dist.probabilities.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFiniteEntry {
                what: format!("probability of scenario {}", k + 1),
            });
        }
        if p < 0.0 {
            return Err(Error::NegativeProbability { id: k + 1, value: p });
        }
    }
    let sum = compensated_sum(dist.probabilities.iter().copied());
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NonNormalized { sum });
    }
    Ok(())
}

/// Equiprobable distribution with `p_i = 1/n`.
pub fn equiprobable_from_vectors(vectors: Vec<Vec<f64>>) -> Result<DiscreteDistribution> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = vectors.len();
    DiscreteDistribution::new(vectors, vec![1.0 / n as f64; n])
}

/// Kahan-Babuska (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Ordered index set `J`, insertion order preserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSubset {
    indices: Vec<usize>,
}

impl SupportSubset {
    /// Validates that ids are distinct and within `1..=n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if seen[i - 1] {
                return Err(Error::DuplicateIndex(i));
            }
            seen[i - 1] = true;
        }
        Ok(SupportSubset { indices })
    }

    /// `J = I`, ids in natural order.
    pub fn full(n: usize) -> Self {
        SupportSubset {
            indices: (1..=n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.indices.contains(&id)
    }

    /// Membership mask over 0-based storage positions.
    pub(crate) fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.indices {
            mask[i - 1] = true;
        }
        mask
    }
}

/// The five transport cost functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CostKind {
    #[serde(rename = "ID")]
    Id,
    Mo,
    Br,
    Be,
    Pr,
}

impl CostKind {
    pub const ALL: [CostKind; 5] = [
        CostKind::Id,
        CostKind::Mo,
        CostKind::Br,
        CostKind::Be,
        CostKind::Pr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CostKind::Id => "ID",
            CostKind::Mo => "Mo",
            CostKind::Br => "Br",
            CostKind::Be => "Be",
            CostKind::Pr => "Pr",
        }
    }

    /// Whether `c(i, j) == c(j, i)` holds by construction.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, CostKind::Pr)
    }

    pub fn needs_problem(self) -> bool {
        !matches!(self, CostKind::Id)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "id" => Ok(CostKind::Id),
            "mo" => Ok(CostKind::Mo),
            "br" => Ok(CostKind::Br),
            "be" => Ok(CostKind::Be),
            "pr" => Ok(CostKind::Pr),
            _ => Err(Error::Config(format!("unknown cost function '{s}'"))),
        }
    }
}

/// Dense `n x n` transport cost matrix, row-major, `C[i][j] = c(xi_i, zeta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
    kind: CostKind,
    stats: SolveStats,
}

impl CostMatrix {
    /// Wraps raw entries. Checks shape, finiteness and the zero diagonal.
    pub fn new(n: usize, entries: Vec<f64>, kind: CostKind, stats: SolveStats) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::MatrixShapeMismatch {
                rows: entries.len() / n.max(1),
                cols: n,
                n,
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                what: "cost matrix".into(),
            });
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::SchemaViolation(format!(
                    "cost matrix diagonal entry {} is {}, expected 0",
                    i + 1,
                    entries[i * n + i]
                )));
            }
        }
        Ok(CostMatrix {
            n,
            entries,
            kind,
            stats,
        })
    }

    /// Like [`CostMatrix::new`] but without the diagonal check. Only for
    /// fault-injection in verification runs.
    #[doc(hidden)]
    pub fn new_unchecked(n: usize, entries: Vec<f64>, kind: CostKind, stats: SolveStats) -> Self {
        assert_eq!(entries.len(), n * n);
        CostMatrix {
            n,
            entries,
            kind,
            stats,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Entry for 1-based ids `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1) * self.n + (j - 1)]
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn transpose(&self) -> Vec<f64> {
        let n = self.n;
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = self.entries[i * n + j];
            }
        }
        t
    }

    pub(crate) fn check_shape(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::MatrixShapeMismatch {
                rows: self.n,
                cols: self.n,
                n,
            });
        }
        Ok(())
    }
}

/// Distribution `Q` supported on a subset of the original scenarios, with
/// the redistributed probabilities and the nearest-selected assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDistribution {
    n: usize,
    subset: SupportSubset,
    probabilities: Vec<f64>,
    assignment: Vec<usize>,
}

impl ReducedDistribution {
    pub(crate) fn from_parts(
        n: usize,
        subset: SupportSubset,
        probabilities: Vec<f64>,
        assignment: Vec<usize>,
    ) -> Self {
        ReducedDistribution {
            n,
            subset,
            probabilities,
            assignment,
        }
    }

    /// Size of the base distribution.
    pub fn base_len(&self) -> usize {
        self.n
    }

    pub fn subset(&self) -> &SupportSubset {
        &self.subset
    }

    /// `q_j` aligned with `subset().indices()`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// For every base id `i` (position `i - 1`), the selected id that carries
    /// its mass. Selected ids map to themselves.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// The set `I_j` of unselected ids merged into selected id `j`.
    pub fn merged_into(&self, j: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(i, &a)| a == j && i + 1 != j)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Materializes `Q` as a standalone distribution over the selected
    /// scenarios of `base`, in selection order.
    pub fn to_distribution(&self, base: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        if base.len() != self.n {
            return Err(Error::MatrixShapeMismatch {
                rows: base.len(),
                cols: base.len(),
                n: self.n,
            });
        }
        let vectors = self
            .subset
            .indices()
            .iter()
            .map(|&j| base.scenarios[j - 1].values.clone())
            .collect();
        DiscreteDistribution::new(vectors, self.probabilities.clone())
    }
}
