//! End-to-end driver: configuration, the `reduce`, `pipeline`, `verify` and
//! `stats` commands, and their output files.
//!
//! Every output embeds `format_version` and the hash of the effective
//! configuration. Apart from the `wall_ms` column, outputs are a pure
//! function of the configuration and the data files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costfn::{cost_matrix, cross_evaluation_with_stats, pr_from_cross, SolveStats};
use crate::data::{self, DrawSpec, ScenarioPool, SynthParams, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::scenario::{CostKind, CostMatrix, DiscreteDistribution, SupportSubset};
use crate::selection::{first_pick_globally_optimal_check, forward_select};
use crate::solver::{backend_from_env, Backend, SolveOptions};
use crate::stochprog::{argmin_set, StochasticSolver, ORACLE_TIE_TOL};
use crate::suc::{desk_instance, SucInstance};
use crate::transport::{cost_block, discrete_distance, redistribute, transport_lp_oracle};

pub const RESULTS_HEADER: &str = "seed,method,m,rae_percent,distance,milp_count,lp_count,wall_ms";
pub const SUMMARY_HEADER: &str = "method,m,count,min,q1,median,q3,max";

/// Tolerance of the m = 1 optimality checks, in RAE units.
pub const ORACLE_TOL: f64 = 1e-6;

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn default_true() -> bool {
    true
}

/// Synthetic scenario pool settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: SynthParams,
}

/// Contents of `config.json`. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_version")]
    pub format_version: u32,
    /// `"desk"`, `"rts24"` or a path to a network file. Without it only the
    /// data-driven cost function is available.
    #[serde(default)]
    pub network: Option<String>,
    /// Keep only the first `horizon` periods of the network.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Relative cost perturbation applied to the generators.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub perturbation_seed: u64,
    /// Scenario file; when absent the pool is synthesized.
    #[serde(default)]
    pub scenarios: Option<String>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Sample size drawn from the pool per seed.
    pub n: usize,
    #[serde(default)]
    pub replacement: bool,
    pub methods: Vec<CostKind>,
    pub m: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub gap: f64,
    #[serde(default)]
    pub time_limit: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Build Br, Be and Pr from one cross-evaluation per seed.
    #[serde(default = "default_true")]
    pub share_cross_evaluation: bool,
    /// Include full cost matrices in the reduce output.
    #[serde(default)]
    pub write_cost_matrix: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gap: Option<f64>,
    pub workers: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Config::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(g) = o.gap {
            self.gap = g;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.methods.is_empty() || self.m.is_empty() || self.seeds.is_empty() {
            return bad("methods, m and seeds must be non-empty".into());
        }
        if let Some(&m) = self.m.iter().find(|&&m| m == 0 || m > self.n) {
            return bad(format!("m = {m} must be in 1..={}", self.n));
        }
        if self.network.is_none() {
            if let Some(k) = self.methods.iter().find(|k| k.needs_problem()) {
                return bad(format!("cost function {k} requires a problem instance (set \"network\")"));
            }
            if self.scenarios.is_none() {
                return bad("without a network the scenarios must come from a file".into());
            }
        }
        if !(0.0..1.0).contains(&self.gap) {
            return bad(format!("gap {} must be in [0, 1)", self.gap));
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.perturbation) {
            return bad(format!("perturbation {} must be in [0, 1)", self.perturbation));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            mip_gap: self.gap,
            time_limit: self.time_limit,
        }
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn m_max(&self) -> usize {
        self.m.iter().copied().max().unwrap_or(1)
    }
}

/// Loaded data for one configuration.
pub struct Context {
    pub config: Config,
    pub instance: Option<SucInstance>,
    pub pool: ScenarioPool,
    pub hash: String,
    pub backend: Arc<dyn Backend>,
}

impl Context {
    pub fn new(config: Config) -> Result<Context> {
        let instance = match config.network.as_deref() {
            None => None,
            Some(name) => {
                let mut inst = match name {
                    "desk" => desk_instance(),
                    "rts24" => data::parse_network(data::RTS24_JSON)?,
                    path => data::load_network(&config.resolve(path))?,
                };
                if let Some(h) = config.horizon {
                    data::truncate_horizon(&mut inst, h)?;
                }
                if config.perturbation > 0.0 {
                    let mut rng = Xoshiro256StarStar::seed_from_u64(config.perturbation_seed);
                    inst.perturb_costs(config.perturbation, &mut rng);
                }
                Some(inst)
            }
        };
        let pool = match (&config.scenarios, &instance) {
            (Some(path), Some(inst)) => data::load_scenarios(&config.resolve(path), inst)?,
            (Some(path), None) => data::load_scenarios_unbounded(&config.resolve(path))?,
            (None, Some(inst)) => {
                let s = config.synth.clone().unwrap_or(SynthConfig {
                    count: config.n.max(200),
                    seed: 0,
                    params: SynthParams::default(),
                });
                data::synth_scenarios(inst, s.count, s.seed, &s.params)?
            }
            (None, None) => unreachable!("rejected by Config::validate"),
        };
        if let Some(inst) = &instance {
            pool.check_against(inst)?;
        }
        let hash = config.hash();
        Ok(Context {
            config,
            instance,
            pool,
            hash,
            backend: backend_from_env()?,
        })
    }

    pub fn draw(&self, seed: u64) -> Result<(Vec<usize>, DiscreteDistribution)> {
        let spec = DrawSpec {
            seed,
            n: self.config.n,
            replacement: self.config.replacement,
        };
        let idx = data::draw_indices(self.pool.len(), &spec)?;
        Ok((idx, data::draw(&self.pool, &spec)?))
    }

    pub fn solver(&self) -> Option<StochasticSolver<'_>> {
        self.instance
            .as_ref()
            .map(|inst| StochasticSolver::new(inst, self.backend.clone(), self.config.solve_options()))
    }
}

/// Runs `f` on a rayon pool of `workers` threads (the global pool if `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Cost matrices for one sample; Be and Pr share a cross-evaluation when
/// the configuration allows it.
fn build_matrices(
    ctx: &Context,
    solver: Option<&StochasticSolver>,
    p: &DiscreteDistribution,
    shared: bool,
) -> Vec<(CostKind, Result<(CostMatrix, f64)>)> {
    let mut cross = None;
    let mut out = Vec::new();
    let has_cross = ctx.config.methods.iter().any(|k| matches!(k, CostKind::Be | CostKind::Pr));
    for &kind in &ctx.config.methods {
        // Br reads the diagonal of the cross evaluation when one is built anyway
        let share = shared && has_cross && matches!(kind, CostKind::Br | CostKind::Be | CostKind::Pr);
        let res = match (share, solver) {
            (true, Some(s)) => {
                let start = Instant::now();
                if cross.is_none() {
                    cross = Some(cross_evaluation_with_stats(s, p).map(|c| (c, start.elapsed().as_secs_f64() * 1e3)));
                }
                match cross.as_ref().expect("just set") {
                    Ok(((sols, z, stats), ms)) => {
                        let gap = s.options().mip_gap;
                        let m = match kind {
                            CostKind::Pr => pr_from_cross(z, gap, *stats),
                            CostKind::Be => crate::costfn::be_from_cross(z, gap, *stats),
                            _ => {
                                let milp_only = SolveStats {
                                    lp_count: 0,
                                    lp_ms: 0.0,
                                    ..*stats
                                };
                                crate::costfn::br_from_objectives(&sols.objectives, milp_only)
                            }
                        };
                        m.map(|m| (m, *ms))
                    }
                    Err(e) => Err(e.clone()),
                }
            }
            _ => cost_matrix(kind, solver, p),
        };
        out.push((kind, res));
    }
    out
}

// ---------------------------------------------------------------- reduce

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub m: usize,
    pub selected: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: CostKind,
    pub milp_count: u64,
    pub lp_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_matrix: Option<Vec<Vec<f64>>>,
    pub selections: Vec<SelectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionOutput {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    /// 1-based pool rows forming `P`, in draw order.
    pub draw: Vec<usize>,
    pub methods: Vec<MethodRecord>,
}

/// Cost matrix, selection and redistribution for the first seed. Matrices
/// are built independently so the solve counts are per method.
pub fn cmd_reduce(ctx: &Context) -> Result<ReductionOutput> {
    let seed = ctx.config.seeds[0];
    let (idx, p) = ctx.draw(seed)?;
    let solver = ctx.solver();
    let mut methods = Vec::new();
    for (kind, res) in build_matrices(ctx, solver.as_ref(), &p, false) {
        let (c, _) = res?;
        let trace = forward_select(&p, ctx.config.m_max(), &c)?;
        let order = trace.subset().indices().to_vec();
        let mut selections = Vec::new();
        for &m in &ctx.config.m {
            let subset = SupportSubset::new(order[..m].to_vec(), p.len())?;
            let r = redistribute(&p, &subset, &c)?;
            selections.push(SelectionRecord {
                m,
                selected: subset.indices().to_vec(),
                probabilities: r.probabilities().to_vec(),
                distance: discrete_distance(&p, &subset, &c)?,
            });
        }
        let (milp_count, lp_count) = c.stats().counts();
        let n = c.n();
        methods.push(MethodRecord {
            method: kind,
            milp_count,
            lp_count,
            cost_matrix: ctx
                .config
                .write_cost_matrix
                .then(|| (0..n).map(|i| c.as_slice()[i * n..(i + 1) * n].to_vec()).collect()),
            selections,
        });
    }
    Ok(ReductionOutput {
        format_version: FORMAT_VERSION,
        config_hash: ctx.hash.clone(),
        seed,
        n: p.len(),
        draw: idx.iter().map(|i| i + 1).collect(),
        methods,
    })
}

pub fn write_reduction(out: &ReductionOutput, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("reduction.json");
    let mut s = serde_json::to_string_pretty(out).expect("reduction serializes");
    s.push('\n');
    data::write_atomic(&path, s.as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub method: String,
    pub m: usize,
    /// NaN marks a failed cell.
    pub rae_percent: f64,
    pub distance: f64,
    pub milp_count: u64,
    pub lp_count: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub seed: u64,
    pub method: String,
    pub m: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config_hash: String,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
}

impl PipelineRun {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# format_version={FORMAT_VERSION},config_hash={}\n{RESULTS_HEADER}\n", self.config_hash);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.3}",
                r.seed, r.method, r.m, r.rae_percent, r.distance, r.milp_count, r.lp_count, r.wall_ms
            );
        }
        s
    }

    pub fn failures_csv(&self) -> String {
        let mut s = format!("# format_version={FORMAT_VERSION},config_hash={}\nseed,method,m,error\n", self.config_hash);
        for f in &self.failures {
            let _ = writeln!(s, "{},{},{},\"{}\"", f.seed, f.method, f.m, f.error.to_string().replace('"', "'"));
        }
        s
    }
}

/// For each seed: draw `P`, solve the SAA problem, then for each method
/// build the cost matrix, select greedily and score every requested `m`.
/// Failed cells are kept as NaN rows and listed separately.
pub fn cmd_pipeline(ctx: &Context) -> Result<PipelineRun> {
    let solver = ctx
        .solver()
        .ok_or_else(|| Error::Config("the pipeline needs a problem instance (set \"network\")".into()))?;
    let cfg = &ctx.config;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        log::info!("seed {seed}: drawing {} scenarios", cfg.n);
        let (_, p) = ctx.draw(seed)?;
        let mut fail = |method: &str, m: usize, error: Error, rows: &mut Vec<ResultRow>| {
            log::warn!("seed {seed}, {method}, m = {m}: {error}");
            rows.push(ResultRow {
                seed,
                method: method.to_string(),
                m,
                rae_percent: f64::NAN,
                distance: f64::NAN,
                milp_count: 0,
                lp_count: 0,
                wall_ms: 0.0,
            });
            failures.push(Failure {
                seed,
                method: method.to_string(),
                m,
                error,
            });
        };

        let start = Instant::now();
        let saa_solver = solver.fork();
        let saa = saa_solver.saa_baseline(&p);
        let saa_ms = start.elapsed().as_secs_f64() * 1e3;
        if let Err(e) = &saa {
            // z*(P) is shared by every cell of this seed
            for &kind in &cfg.methods {
                for &m in &cfg.m {
                    fail(kind.tag(), m, e.clone(), &mut rows);
                }
            }
            fail("SAA", cfg.n, e.clone(), &mut rows);
            continue;
        }

        for (kind, res) in build_matrices(ctx, Some(&solver), &p, cfg.share_cross_evaluation) {
            let (c, matrix_ms) = match res {
                Ok(v) => v,
                Err(e) => {
                    for &m in &cfg.m {
                        fail(kind.tag(), m, e.clone(), &mut rows);
                    }
                    continue;
                }
            };
            log::info!("seed {seed}: {kind} cost matrix in {:.1} s", matrix_ms / 1e3);
            let (milp_count, lp_count) = c.stats().counts();
            let sel_start = Instant::now();
            let trace = match forward_select(&p, cfg.m_max(), &c) {
                Ok(t) => t,
                Err(e) => {
                    for &m in &cfg.m {
                        fail(kind.tag(), m, e.clone(), &mut rows);
                    }
                    continue;
                }
            };
            let sel_ms = sel_start.elapsed().as_secs_f64() * 1e3;
            let order = trace.subset().indices().to_vec();
            for &m in &cfg.m {
                let cell_start = Instant::now();
                let cell = (|| -> Result<(f64, f64)> {
                    let subset = SupportSubset::new(order[..m].to_vec(), p.len())?;
                    let q = redistribute(&p, &subset, &c)?.to_distribution(&p)?;
                    let distance = discrete_distance(&p, &subset, &c)?;
                    let eval = solver.rae(&p, &q)?;
                    Ok((eval.rae_percent(), distance))
                })();
                match cell {
                    Ok((rae_percent, distance)) => rows.push(ResultRow {
                        seed,
                        method: kind.tag().to_string(),
                        m,
                        rae_percent,
                        distance,
                        milp_count,
                        lp_count,
                        wall_ms: matrix_ms + sel_ms + cell_start.elapsed().as_secs_f64() * 1e3,
                    }),
                    Err(e) => fail(kind.tag(), m, e, &mut rows),
                }
            }
        }

        let saa = saa.expect("checked above");
        let (milp_count, lp_count) = saa_solver.stats().counts();
        rows.push(ResultRow {
            seed,
            method: "SAA".into(),
            m: p.len(),
            rae_percent: saa.rae_percent(),
            distance: 0.0,
            milp_count,
            lp_count,
            wall_ms: saa_ms,
        });
    }
    Ok(PipelineRun {
        config_hash: ctx.hash.clone(),
        rows,
        failures,
    })
}

pub fn write_pipeline(run: &PipelineRun, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("results.csv");
    data::write_atomic(&path, run.to_csv().as_bytes())?;
    if !run.failures.is_empty() {
        data::write_atomic(&dir.join("failures.csv"), run.failures_csv().as_bytes())?;
    }
    Ok(path)
}

// ---------------------------------------------------------------- verify

/// Deliberate corruption used to check that the verification catches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drives the diagonal entry of the worst single-scenario decision in
    /// `c^Pr` far below zero.
    PerturbedDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub max_error: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("scenred verification report\n");
        let _ = writeln!(s, "format_version: {FORMAT_VERSION}");
        let _ = writeln!(s, "config_hash: {}\n", self.config_hash);
        let _ = writeln!(s, "{:<26} {:>9} {:>12}  result", "suite", "instances", "max_error");
        for r in &self.suites {
            let _ = writeln!(
                s,
                "{:<26} {:>9} {:>12.3e}  {}{}",
                r.name,
                r.instances,
                r.max_error,
                if r.passed { "PASS" } else { "FAIL" },
                if r.detail.is_empty() { String::new() } else { format!("  ({})", r.detail) }
            );
        }
        let _ = writeln!(s, "\noverall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// A random transport instance: `(p, subset, costs)`.
pub fn random_transport_instance(rng: &mut Xoshiro256StarStar) -> Result<(DiscreteDistribution, SupportSubset, CostMatrix)> {
    let n = rng.gen_range(5..=10);
    let k = rng.gen_range(1..=4);
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let p = DiscreteDistribution::new((0..n).map(|i| vec![i as f64]).collect(), probs)?;
    let mut ids: Vec<usize> = (1..=n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        ids.swap(i, j);
    }
    let subset = SupportSubset::new(ids[..k].to_vec(), n)?;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                entries[i * n + j] = rng.gen_range(0.0..10.0);
            }
        }
    }
    let c = CostMatrix::new(n, entries, CostKind::Id, SolveStats::default())?;
    Ok((p, subset, c))
}

fn suite(name: &str, instances: usize, max_error: f64, passed: bool, detail: String) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        instances,
        max_error,
        passed,
        detail,
    }
}

/// Transport and redistribution suites on seeded random instances.
pub fn verify_transport(count: usize, seed: u64, backend: &dyn Backend) -> Result<Vec<SuiteResult>> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let (mut lp_err, mut lp_ok) = (0.0f64, true);
    let (mut cons_err, mut cons_ok) = (0.0f64, true);
    let (mut first_ok, mut first_n) = (true, 0);
    for _ in 0..count {
        let (p, subset, c) = random_transport_instance(&mut rng)?;
        let closed = discrete_distance(&p, &subset, &c)?;
        let r = redistribute(&p, &subset, &c)?;
        let q = r.to_distribution(&p)?;
        let lp = transport_lp_oracle(&p, &q, &cost_block(&c, &subset), backend)?;
        let err = (closed - lp.objective).abs();
        lp_err = lp_err.max(err / (1.0 + closed.abs()));
        lp_ok &= err <= 1e-8 * (1.0 + closed.abs());

        let sum: f64 = r.probabilities().iter().sum();
        cons_err = cons_err.max((sum - 1.0).abs());
        cons_ok &= (sum - 1.0).abs() <= 1e-12;
        for (&j, &qj) in subset.indices().iter().zip(r.probabilities()) {
            cons_ok &= qj >= p.probability(j)?;
        }
        let mut covered = vec![0usize; p.len()];
        for &j in subset.indices() {
            for i in r.merged_into(j) {
                covered[i - 1] += 1;
            }
        }
        cons_ok &= covered
            .iter()
            .enumerate()
            .all(|(i, &k)| k == usize::from(!subset.contains(i + 1)));

        first_ok &= first_pick_globally_optimal_check(&p, &c)?;
        first_n += 1;
    }
    Ok(vec![
        suite("transport_equivalence", count, lp_err, lp_ok, String::new()),
        suite("redistribution", count, cons_err, cons_ok, String::new()),
        suite("first_pick_enumeration", first_n, 0.0, first_ok, String::new()),
    ])
}

/// Solve counts of every cost function at n = 10, built independently.
pub fn verify_accounting(ctx: &Context) -> Result<SuiteResult> {
    let solver = ctx
        .solver()
        .ok_or_else(|| Error::Config("accounting suite needs a problem instance".into()))?;
    let spec = DrawSpec {
        seed: ctx.config.seeds[0],
        n: 10,
        replacement: ctx.pool.len() < 10,
    };
    let p = data::draw(&ctx.pool, &spec)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in CostKind::ALL {
        let (c, _) = cost_matrix(kind, Some(&solver), &p)?;
        let got = c.stats().counts();
        let want = SolveStats::expected_counts(kind, 10);
        if got != want {
            ok = false;
            detail.push(format!("{kind}: {got:?} != {want:?}"));
        }
    }
    Ok(suite("table1_accounting", CostKind::ALL.len(), 0.0, ok, detail.join("; ")))
}

/// Pr first pick against the exhaustive m = 1 oracle, plus the argmin chain
/// between cross-evaluation column sums and regret column sums.
pub fn verify_single_scenario(ctx: &Context, fault: Option<Fault>) -> Result<Vec<SuiteResult>> {
    let solver = ctx
        .solver()
        .ok_or_else(|| Error::Config("single-scenario suite needs a problem instance".into()))?;
    let gap = ctx.config.gap;
    let (mut worst, mut ok, mut detail) = (0.0f64, true, Vec::new());
    let (mut chain_ok, mut chain_detail) = (true, Vec::new());
    for &seed in &ctx.config.seeds {
        let (_, p) = ctx.draw(seed)?;
        let (_, z, stats) = cross_evaluation_with_stats(&solver, &p)?;
        let mut c = pr_from_cross(&z, gap, stats)?;
        let report = solver.single_scenario_oracle(&p)?;
        let n = p.len();
        if fault == Some(Fault::PerturbedDiagonal) {
            let k = (0..n)
                .max_by(|&a, &b| report.rae[a].total_cmp(&report.rae[b]))
                .expect("n >= 1");
            let mut e = c.as_slice().to_vec();
            let scale = e.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
            e[k * n + k] = -1e3 * scale / p.probabilities()[k];
            c = CostMatrix::new_unchecked(n, e, CostKind::Pr, stats);
        }
        let pick = forward_select(&p, 1, &c)?.subset().indices()[0];
        let excess = report.rae[pick - 1] - report.min_rae();
        worst = worst.max(excess);
        if !report.is_optimal_pick(pick, ORACLE_TOL) {
            ok = false;
            detail.push(format!("seed {seed}: pick {pick} not in {:?}", report.argmin));
        }
        // column sums over all rows, diagonal included
        let col = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
            (0..n)
                .map(|j| (0..n).map(|i| p.probabilities()[i] * f(i, j)).sum())
                .collect()
        };
        let by_z = argmin_set(&col(&|i, j| z.at(i, j)), ORACLE_TIE_TOL);
        let by_c = argmin_set(&col(&|i, j| c.as_slice()[i * n + j]), ORACLE_TIE_TOL);
        if by_z != by_c {
            chain_ok = false;
            chain_detail.push(format!("seed {seed}: {by_z:?} vs {by_c:?}"));
        }
        for &j in &by_c {
            if !report.is_optimal_pick(j, ORACLE_TOL) {
                ok = false;
                detail.push(format!("seed {seed}: regret ranking favors {j}, oracle {:?}", report.argmin));
            }
        }
    }
    let count = ctx.config.seeds.len();
    Ok(vec![
        suite("single_scenario_oracle", count, worst, ok, detail.join("; ")),
        suite("argmin_chain", count, 0.0, chain_ok, chain_detail.join("; ")),
    ])
}

pub fn cmd_verify(ctx: &Context, fault: Option<Fault>) -> Result<VerifyReport> {
    let mut suites = verify_transport(100, ctx.config.seeds[0], ctx.backend.as_ref())?;
    if ctx.instance.is_some() {
        suites.push(verify_accounting(ctx)?);
        suites.extend(verify_single_scenario(ctx, fault)?);
    }
    Ok(VerifyReport {
        config_hash: ctx.hash.clone(),
        suites,
    })
}

/// Writes the report, then fails with the names of the failing suites.
pub fn write_verify(report: &VerifyReport, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("verify_report.txt");
    data::write_atomic(&path, report.to_text().as_bytes())?;
    if !report.passed() {
        return Err(Error::VerificationFailure(report.failing().join(", ")));
    }
    Ok(path)
}

// ---------------------------------------------------------------- stats

/// Quantile with linear interpolation between order statistics, inclusive
/// of the extremes: position `(len - 1) * q` in the sorted data.
pub fn quantile_inclusive(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub m: usize,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summary of `rae_percent` per `(method, m)`, methods in order
/// of first appearance and `m` ascending. Failed (NaN) rows are skipped.
pub fn summarize(results_csv: &str) -> Result<(Option<String>, Vec<SummaryRow>)> {
    let provenance = results_csv
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string());
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(results_csv.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::SchemaViolation(format!("results header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::SchemaViolation(format!(
            "results header must be {RESULTS_HEADER}, got {}",
            header.join(",")
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (k, rec) in rdr.deserialize::<ResultRow>().enumerate() {
        let row = rec.map_err(|e| Error::SchemaViolation(format!("results row {}: {e}", k + 1)))?;
        let mi = match order.iter().position(|m| *m == row.method) {
            Some(i) => i,
            None => {
                order.push(row.method.clone());
                order.len() - 1
            }
        };
        let g = groups.entry((mi, row.m)).or_default();
        if !row.rae_percent.is_nan() {
            g.push(row.rae_percent);
        }
    }
    if groups.is_empty() {
        return Err(Error::SchemaViolation("results file has no rows".into()));
    }
    let mut out = Vec::new();
    for ((mi, m), mut v) in groups {
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        out.push(SummaryRow {
            method: order[mi].clone(),
            m,
            count: v.len(),
            min: v[0],
            q1: quantile_inclusive(&v, 0.25),
            median: quantile_inclusive(&v, 0.5),
            q3: quantile_inclusive(&v, 0.75),
            max: v[v.len() - 1],
        });
    }
    if out.is_empty() {
        return Err(Error::SchemaViolation("every results row failed".into()));
    }
    Ok((provenance, out))
}

pub fn summary_csv(provenance: Option<&str>, rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    match provenance {
        Some(p) => {
            let _ = writeln!(s, "# {p}");
        }
        None => {
            let _ = writeln!(s, "# format_version={FORMAT_VERSION}");
        }
    }
    let _ = writeln!(s, "{SUMMARY_HEADER}");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.method, r.m, r.count, r.min, r.q1, r.median, r.q3, r.max
        );
    }
    s
}

pub fn cmd_stats(results: &Path, dir: &Path) -> Result<PathBuf> {
    if !results.exists() {
        return Err(Error::MissingFile(results.display().to_string()));
    }
    let text = std::fs::read_to_string(results)?;
    let (prov, rows) = summarize(&text)?;
    let path = dir.join("summary.csv");
    data::write_atomic(&path, summary_csv(prov.as_deref(), &rows).as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config() -> Config {
        Config::parse(
            r#"{"network": "desk", "n": 6, "methods": ["ID", "Mo", "Br", "Be", "Pr"],
                "m": [1, 2, 5], "seeds": [1, 2, 3], "synth": {"count": 40, "seed": 9}}"#,
        )
        .unwrap()
    }

    #[test]
    fn quantile_convention() {
        assert_eq!(quantile_inclusive(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile_inclusive(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile_inclusive(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn stats_single_seed_and_empty() {
        let text = format!("{RESULTS_HEADER}\n1,Pr,1,2.5,0.1,3,6,1.0\n");
        let (_, rows) = summarize(&text).unwrap();
        let r = &rows[0];
        assert!([r.min, r.q1, r.median, r.q3, r.max].iter().all(|&v| v == 2.5));
        assert!(matches!(summarize(&format!("{RESULTS_HEADER}\n")), Err(Error::SchemaViolation(_))));
        assert!(matches!(summarize("a,b\n1,2\n"), Err(Error::SchemaViolation(_))));
    }

    #[test]
    fn config_requires_problem_for_pr() {
        let err = Config::parse(r#"{"scenarios": "s.csv", "n": 5, "methods": ["Pr"], "m": [1], "seeds": [1]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 1);
        assert!(Config::parse(r#"{"scenarios": "s.csv", "n": 5, "methods": ["ID"], "m": [1], "seeds": [1]}"#).is_ok());
        assert!(Config::parse(r#"{"network": "desk", "n": 5, "methods": ["ID"], "m": [6], "seeds": [1]}"#).is_err());
        assert!(Config::parse(r#"{"network": "desk", "n": 5, "bogus": 1, "methods": ["ID"], "m": [1], "seeds": [1]}"#).is_err());
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut c = desk_config();
        let h = c.hash();
        c.apply(&Overrides {
            seed: Some(42),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(c.seeds, vec![42]);
        assert_ne!(c.hash(), h);
    }

    #[test]
    fn pipeline_row_count_and_saa() {
        let ctx = Context::new(desk_config()).unwrap();
        let run = cmd_pipeline(&ctx).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        assert_eq!(run.rows.len(), 3 * 5 * 3 + 3);
        for r in run.rows.iter().filter(|r| r.method == "SAA") {
            assert!(r.rae_percent <= 1e-4);
        }
        let csv = run.to_csv();
        assert!(csv.starts_with("# format_version=1,config_hash="));
        let (_, summary) = summarize(&csv).unwrap();
        assert_eq!(summary.len(), 5 * 3 + 1);
    }

    #[test]
    fn reduce_is_deterministic() {
        let ctx = Context::new(desk_config()).unwrap();
        let a = cmd_reduce(&ctx).unwrap();
        let b = cmd_reduce(&ctx).unwrap();
        assert_eq!(a, b);
        let id = a.methods.iter().find(|m| m.method == CostKind::Id).unwrap();
        assert_eq!((id.milp_count, id.lp_count), (0, 0));
        assert_eq!(id.selections[0].selected.len(), 1);
    }

    #[test]
    fn verify_passes_and_fault_is_named() {
        let mut cfg = desk_config();
        cfg.seeds = vec![1, 2];
        let ctx = Context::new(cfg).unwrap();
        let report = cmd_verify(&ctx, None).unwrap();
        assert!(report.passed(), "{}", report.to_text());
        let faulty = cmd_verify(&ctx, Some(Fault::PerturbedDiagonal)).unwrap();
        assert!(faulty.failing().contains(&"single_scenario_oracle"), "{}", faulty.to_text());
    }
}
