//! C ABI over the scenario-reduction library.
//!
//! Objects are opaque handles created by `scenred_*_new`-style functions and
//! released with the matching `scenred_*_free`. Every fallible function
//! returns a [`ScenredStatus`]; on failure a message is available from
//! [`scenred_last_error`] on the same thread. Scenario and row/column ids are
//! 1-based, as in the Rust API. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scenred::costfn::{cost_matrix, SolveStats};
use scenred::selection::{forward_select, SelectionTrace};
use scenred::solver::{backend_from_env, SolveOptions};
use scenred::stochprog::StochasticSolver;
use scenred::suc::{desk_instance, SucInstance};
use scenred::{CostKind, CostMatrix, DiscreteDistribution, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenredStatus {
    Ok = 0,
    /// Invalid option or parameter (bad `m`, unknown kind, ...).
    ConfigError = 1,
    /// Input data rejected (probabilities, shapes, schema).
    DataError = 2,
    /// The MILP/LP backend failed or the problem is degenerate.
    SolverError = 3,
    /// A required pointer was null.
    NullPointer = 5,
    /// Output buffer too small; nothing was written.
    BufferTooSmall = 6,
    /// Internal panic, caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenredCostKind {
    Id = 0,
    Mo = 1,
    Br = 2,
    Be = 3,
    Pr = 4,
}

impl From<ScenredCostKind> for CostKind {
    fn from(k: ScenredCostKind) -> Self {
        match k {
            ScenredCostKind::Id => CostKind::Id,
            ScenredCostKind::Mo => CostKind::Mo,
            ScenredCostKind::Br => CostKind::Br,
            ScenredCostKind::Be => CostKind::Be,
            ScenredCostKind::Pr => CostKind::Pr,
        }
    }
}

/// Discrete distribution handle.
pub struct ScenredDistribution(DiscreteDistribution);

/// Cost matrix handle.
pub struct ScenredCostMatrix(CostMatrix);

/// Forward-selection result handle.
pub struct ScenredReduction(SelectionTrace);

/// Unit-commitment problem handle.
pub struct ScenredProblem(SucInstance);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ScenredStatus {
    match e.exit_code() {
        1 => ScenredStatus::ConfigError,
        3 => ScenredStatus::SolverError,
        _ => ScenredStatus::DataError,
    }
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), (ScenredStatus, String)>) -> ScenredStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScenredStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ScenredStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (ScenredStatus, String)>;
}

impl<T> IntoFfi<T> for scenred::Result<T> {
    fn ffi(self) -> Result<T, (ScenredStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (ScenredStatus, String) {
    (ScenredStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ScenredStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (ScenredStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), (ScenredStatus, String)> {
    if cap < src.len() {
        return Err((
            ScenredStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scenred_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn scenred_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------- distribution

/// Builds a distribution from `n` scenarios of dimension `dim` stored
/// row-major in `values`. `probabilities` may be null for equal weights.
///
/// # Safety
/// `values` must point to `n * dim` doubles and `probabilities`, when not
/// null, to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn scenred_distribution_new(
    n: usize,
    dim: usize,
    values: *const f64,
    probabilities: *const f64,
    out: *mut *mut ScenredDistribution,
) -> ScenredStatus {
    guard(|| {
        if values.is_null() && n * dim > 0 {
            return Err(null("values"));
        }
        let flat: &[f64] = if n * dim == 0 { &[] } else { std::slice::from_raw_parts(values, n * dim) };
        let vectors: Vec<Vec<f64>> = (0..n).map(|i| flat[i * dim..(i + 1) * dim].to_vec()).collect();
        let probs = if probabilities.is_null() {
            vec![1.0 / n.max(1) as f64; n]
        } else {
            std::slice::from_raw_parts(probabilities, n).to_vec()
        };
        let d = DiscreteDistribution::new(vectors, probs).ffi()?;
        put(out, ScenredDistribution(d))
    })
}

/// # Safety
/// `d` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scenred_distribution_free(d: *mut ScenredDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of scenarios, 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_distribution_len(d: *const ScenredDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// Scenario dimension, 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_distribution_dim(d: *const ScenredDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.0.dim())
}

// ---------------------------------------------------------------- cost matrix

/// Squared Euclidean distances between the scenarios of `d`.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_id(
    d: *const ScenredDistribution,
    out: *mut *mut ScenredCostMatrix,
) -> ScenredStatus {
    guard(|| {
        let d = deref(d, "distribution")?;
        let (c, _) = cost_matrix(CostKind::Id, None, &d.0).ffi()?;
        put(out, ScenredCostMatrix(c))
    })
}

/// User-supplied `n x n` row-major costs with a zero diagonal.
///
/// # Safety
/// `entries` must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_new(
    n: usize,
    entries: *const f64,
    kind: ScenredCostKind,
    out: *mut *mut ScenredCostMatrix,
) -> ScenredStatus {
    guard(|| {
        if entries.is_null() {
            return Err(null("entries"));
        }
        let e = std::slice::from_raw_parts(entries, n * n).to_vec();
        let c = CostMatrix::new(n, e, kind.into(), SolveStats::default()).ffi()?;
        put(out, ScenredCostMatrix(c))
    })
}

/// Problem-driven cost matrix of `kind` for `d` on `problem`, solved to the
/// relative MIP gap `gap`. The solver backend honors `SCENRED_SOLVER`.
///
/// # Safety
/// All handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_problem(
    problem: *const ScenredProblem,
    kind: ScenredCostKind,
    d: *const ScenredDistribution,
    gap: f64,
    out: *mut *mut ScenredCostMatrix,
) -> ScenredStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let d = deref(d, "distribution")?;
        let solver = StochasticSolver::new(&problem.0, backend_from_env().ffi()?, options(gap));
        let (c, _) = cost_matrix(kind.into(), Some(&solver), &d.0).ffi()?;
        put(out, ScenredCostMatrix(c))
    })
}

fn options(gap: f64) -> SolveOptions {
    SolveOptions {
        mip_gap: gap,
        ..SolveOptions::default()
    }
}

/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_free(c: *mut ScenredCostMatrix) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Side length, 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_size(c: *const ScenredCostMatrix) -> usize {
    c.as_ref().map_or(0, |c| c.0.n())
}

/// Entry `(i, j)`, 1-based.
///
/// # Safety
/// `c` must be live and `value` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_get(
    c: *const ScenredCostMatrix,
    i: usize,
    j: usize,
    value: *mut f64,
) -> ScenredStatus {
    guard(|| {
        let c = deref(c, "cost matrix")?;
        let n = c.0.n();
        if i == 0 || j == 0 || i > n || j > n {
            return Err((ScenredStatus::DataError, format!("index ({i}, {j}) outside 1..={n}")));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        *value = c.0.get(i, j);
        Ok(())
    })
}

/// MILPs and LPs solved to build the matrix.
///
/// # Safety
/// `c` must be live; the output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_cost_matrix_solve_counts(
    c: *const ScenredCostMatrix,
    milp_count: *mut u64,
    lp_count: *mut u64,
) -> ScenredStatus {
    guard(|| {
        let c = deref(c, "cost matrix")?;
        if milp_count.is_null() || lp_count.is_null() {
            return Err(null("count"));
        }
        let (m, l) = c.0.stats().counts();
        *milp_count = m;
        *lp_count = l;
        Ok(())
    })
}

// ---------------------------------------------------------------- reduction

/// Greedy forward selection of `m` scenarios with redistribution.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_forward_select(
    d: *const ScenredDistribution,
    c: *const ScenredCostMatrix,
    m: usize,
    out: *mut *mut ScenredReduction,
) -> ScenredStatus {
    guard(|| {
        let d = deref(d, "distribution")?;
        let c = deref(c, "cost matrix")?;
        let trace = forward_select(&d.0, m, &c.0).ffi()?;
        put(out, ScenredReduction(trace))
    })
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_reduction_free(r: *mut ScenredReduction) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of selected scenarios, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_reduction_len(r: *const ScenredReduction) -> usize {
    r.as_ref().map_or(0, |r| r.0.subset().len())
}

/// Selected ids (1-based) in selection order.
///
/// # Safety
/// `r` must be live; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn scenred_reduction_indices(
    r: *const ScenredReduction,
    buf: *mut usize,
    cap: usize,
) -> ScenredStatus {
    guard(|| {
        let r = deref(r, "reduction")?;
        let ids = r.0.subset().indices();
        if cap < ids.len() {
            return Err((
                ScenredStatus::BufferTooSmall,
                format!("buffer holds {cap} values, {} needed", ids.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(ids.as_ptr(), buf, ids.len());
        Ok(())
    })
}

/// Redistributed masses, aligned with [`scenred_reduction_indices`].
///
/// # Safety
/// `r` must be live; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn scenred_reduction_probabilities(
    r: *const ScenredReduction,
    buf: *mut f64,
    cap: usize,
) -> ScenredStatus {
    guard(|| copy_out(deref(r, "reduction")?.0.reduced.probabilities(), buf, cap))
}

/// Transport distance between the original and the reduced distribution.
///
/// # Safety
/// `r` must be live and `value` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_reduction_distance(r: *const ScenredReduction, value: *mut f64) -> ScenredStatus {
    guard(|| {
        let r = deref(r, "reduction")?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = r.0.distance;
        Ok(())
    })
}

// ---------------------------------------------------------------- problem

/// The built-in two-bus, two-generator, one-farm instance over two periods.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_problem_desk(out: *mut *mut ScenredProblem) -> ScenredStatus {
    guard(|| put(out, ScenredProblem(desk_instance())))
}

/// Parses a `network.json` document (MW units).
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_problem_from_json(
    json: *const c_char,
    out: *mut *mut ScenredProblem,
) -> ScenredStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (ScenredStatus::DataError, format!("json is not UTF-8: {e}")))?;
        let inst = scenred::data::parse_network(text).ffi()?;
        put(out, ScenredProblem(inst))
    })
}

/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_problem_free(p: *mut ScenredProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Length of one scenario vector (farms times periods), 0 for null.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scenred_problem_scenario_dim(p: *const ScenredProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.scenario_dim())
}

/// Relative approximation error of the reduced distribution in `r` with
/// respect to `d`, as a fraction (not percent).
///
/// # Safety
/// Handles must be live and `rae` valid.
#[no_mangle]
pub unsafe extern "C" fn scenred_problem_rae(
    problem: *const ScenredProblem,
    d: *const ScenredDistribution,
    r: *const ScenredReduction,
    gap: f64,
    rae: *mut f64,
) -> ScenredStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let d = deref(d, "distribution")?;
        let r = deref(r, "reduction")?;
        if rae.is_null() {
            return Err(null("rae"));
        }
        let q = r.0.reduced.to_distribution(&d.0).ffi()?;
        let solver = StochasticSolver::new(&problem.0, backend_from_env().ffi()?, options(gap));
        *rae = solver.rae(&d.0, &q).ffi()?.rae;
        Ok(())
    })
}
