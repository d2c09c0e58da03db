//! Scenario reduction for two-stage stochastic programs, with a stochastic
//! unit commitment model as the reference problem.
//!
//! The pipeline: draw a sample `P`, build a cost matrix between its
//! scenarios ([`costfn`]), pick a reduced support greedily ([`selection`]),
//! redistribute the mass ([`transport`]) and score the reduced problem's
//! first-stage decision against the full sample ([`stochprog`]).

pub mod costfn;
pub mod data;
pub mod error;
pub mod pipeline;
pub mod scenario;
pub mod selection;
pub mod solver;
pub mod stochprog;
pub mod suc;
pub mod transport;

pub use error::{Error, Result};
pub use scenario::{CostKind, CostMatrix, DiscreteDistribution, ReducedDistribution, Scenario, SupportSubset};
