use std::collections::BTreeMap;

use highs::{HighsModelStatus, RowProblem, Sense};

use super::{Backend, Model, SolveOptions, SolveStatus, Solution, VarKind};
use crate::error::{Error, Result};

/// Set to any value to let HiGHS print its log.
pub const LOG_ENV: &str = "SCENRED_HIGHS_LOG";

/// HiGHS through its C API.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &Model, options: &SolveOptions) -> Result<Solution> {
        if model.num_vars() == 0 {
            return Ok(Solution {
                status: SolveStatus::Optimal,
                objective: model.objective_offset(),
                best_bound: model.objective_offset(),
                gap: 0.0,
                values: Vec::new(),
            });
        }
        let mut pb = RowProblem::default();
        let mut cols = Vec::with_capacity(model.num_vars());
        for v in model.vars() {
            let integer = v.kind == VarKind::Binary && v.lower != v.upper;
            let col = pb.add_column_with_integrality(v.objective, v.lower..=v.upper, integer);
            cols.push(col);
        }
        for r in model.rows() {
            // HiGHS rejects rows that name a column twice
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (id, c) in &r.terms {
                *merged.entry(id.0).or_default() += c;
            }
            let terms: Vec<_> = merged.into_iter().map(|(k, c)| (cols[k], c)).collect();
            pb.add_row(r.lower..=r.upper, terms);
        }
        let mip = model.is_mip();
        let mut hm = pb
            .try_optimise(Sense::Minimise)
            .map_err(|s| Error::SolverFailure(format!("HiGHS rejected the model: {s:?}")))?;
        if std::env::var_os(LOG_ENV).is_none() {
            hm.make_quiet();
        } else {
            hm.set_option("output_flag", true);
            hm.set_option("log_to_console", true);
        }
        if mip {
            hm.set_option("mip_rel_gap", options.mip_gap);
            if options.mip_gap == 0.0 {
                hm.set_option("mip_abs_gap", 0.0);
            }
        }
        if let Some(t) = options.time_limit {
            hm.set_option("time_limit", t);
        }
        let solved = hm
            .try_solve()
            .map_err(|s| Error::SolverFailure(format!("HiGHS returned {s:?}")))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
            HighsModelStatus::Infeasible => {
                return Err(Error::Infeasible("HiGHS reports infeasible model".into()))
            }
            other => return Err(Error::SolverFailure(format!("HiGHS status {other:?}"))),
        };
        let values = solved.get_solution().columns().to_vec();
        if status == SolveStatus::TimeLimit && values.len() != model.num_vars() {
            return Err(Error::TimeLimit { gap: f64::INFINITY });
        }
        let objective = solved.objective_value() + model.objective_offset();
        let (best_bound, gap) = if mip {
            let bound = solved
                .double_info_value(c"mip_dual_bound")
                .unwrap_or(f64::NEG_INFINITY)
                + model.objective_offset();
            let gap = solved.mip_gap();
            (bound, if gap.is_finite() { gap.max(0.0) } else { gap })
        } else {
            (objective, 0.0)
        };
        if status == SolveStatus::TimeLimit && !objective.is_finite() {
            return Err(Error::TimeLimit { gap });
        }
        Ok(Solution {
            status,
            objective,
            best_bound,
            gap,
            values,
        })
    }
}
