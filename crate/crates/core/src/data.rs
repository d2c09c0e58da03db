//! Network and scenario files, seeded sampling of `P` from a scenario pool,
//! and a synthetic wind-scenario generator.
//!
//! File conventions:
//! - `network.json` holds powers in MW and costs in $/MWh (start-up in $,
//!   no-load in $/h); everything is converted to per-unit of `base_mva` on
//!   load. Line susceptances are already per-unit.
//! - `scenarios.csv` is long format with header
//!   `scenario_id,period,farm_id,value_pu`; periods are 1-based.
//! - Floats are written with the shortest representation that parses back
//!   to the same value, so export/load round trips are exact.
//!
//! Draws use xoshiro256** seeded through splitmix64 (the reference
//! `seed_from_u64`). A bounded index `k < range` is taken as the high 64 bits
//! of `next_u64() * range`. Without replacement the first `n` steps of a
//! Fisher-Yates shuffle are run over `0..pool_size`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scenario::{equiprobable_from_vectors, DiscreteDistribution};
use crate::suc::{Demand, Generator, Line, Network, SucInstance, WindFarm};

pub const FORMAT_VERSION: u32 = 1;
pub const SCENARIO_HEADER: [&str; 4] = ["scenario_id", "period", "farm_id", "value_pu"];

/// Bundled 24-bus network (MW units).
pub const RTS24_JSON: &str = include_str!("../data/rts24.json");

// ---------------------------------------------------------------- network

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format_version: u32,
    base_mva: f64,
    horizon: usize,
    /// $/MWh.
    shed_cost: f64,
    /// $/MWh.
    slack_cost: f64,
    buses: Vec<BusRecord>,
    lines: Vec<LineRecord>,
    generators: Vec<GeneratorRecord>,
    demands: Vec<DemandRecord>,
    wind_farms: Vec<WindRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    from: usize,
    to: usize,
    susceptance_pu: f64,
    capacity_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRecord {
    id: String,
    bus: usize,
    p_min_mw: f64,
    p_max_mw: f64,
    ramp_up_mw: f64,
    ramp_down_mw: f64,
    min_up: usize,
    min_down: usize,
    initial_on: bool,
    initial_periods: usize,
    initial_output_mw: f64,
    /// $ per start.
    startup_cost: f64,
    /// $/h while committed.
    no_load_cost: f64,
    /// $/MWh.
    energy_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandRecord {
    id: String,
    bus: usize,
    profile_mw: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindRecord {
    id: String,
    bus: usize,
    capacity_mw: f64,
}

/// Inverse of a correctly rounded scaling: a value `c` near `guess` with
/// `forward(c) == target`, preferring the shortest decimal form. Falls back
/// to `guess` when no neighbor maps back exactly.
fn exact_preimage(target: f64, guess: f64, forward: impl Fn(f64) -> f64) -> f64 {
    if !guess.is_finite() || guess == 0.0 {
        return guess;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut c = guess;
    for _ in 0..4 {
        c = next_down(c);
    }
    for _ in 0..9 {
        if forward(c) == target {
            let len = c.to_string().len();
            if best.map_or(true, |(l, _)| len < l) {
                best = Some((len, c));
            }
        }
        c = next_up(c);
    }
    best.map_or(guess, |(_, c)| c)
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

fn to_pu(mw: f64, base: f64) -> f64 {
    mw / base
}

fn from_pu(pu: f64, base: f64) -> f64 {
    exact_preimage(pu, pu * base, |c| c / base)
}

fn cost_to_pu(per_mwh: f64, base: f64) -> f64 {
    per_mwh * base
}

fn cost_from_pu(per_pu: f64, base: f64) -> f64 {
    exact_preimage(per_pu, per_pu / base, |c| c * base)
}

fn schema(msg: String) -> Error {
    Error::SchemaViolation(msg)
}

fn instance_from_file(file: NetworkFile) -> Result<SucInstance> {
    if file.format_version != FORMAT_VERSION {
        return Err(schema(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let b = file.base_mva;
    if !(b > 0.0 && b.is_finite()) {
        return Err(schema(format!("base_mva must be positive, got {b}")));
    }
    let inst = SucInstance {
        network: Network {
            buses: file.buses.iter().map(|r| r.id).collect(),
            lines: file
                .lines
                .iter()
                .map(|l| Line {
                    from: l.from,
                    to: l.to,
                    susceptance: l.susceptance_pu,
                    flow_limit: to_pu(l.capacity_mw, b),
                })
                .collect(),
            demands: file
                .demands
                .iter()
                .map(|d| Demand {
                    id: d.id.clone(),
                    bus: d.bus,
                    profile: d.profile_mw.iter().map(|&v| to_pu(v, b)).collect(),
                })
                .collect(),
        },
        generators: file
            .generators
            .iter()
            .map(|g| Generator {
                id: g.id.clone(),
                bus: g.bus,
                p_min: to_pu(g.p_min_mw, b),
                p_max: to_pu(g.p_max_mw, b),
                ramp_up: to_pu(g.ramp_up_mw, b),
                ramp_down: to_pu(g.ramp_down_mw, b),
                min_up: g.min_up,
                min_down: g.min_down,
                initial_on: g.initial_on,
                initial_periods: g.initial_periods,
                initial_output: to_pu(g.initial_output_mw, b),
                startup_cost: g.startup_cost,
                fixed_cost: g.no_load_cost,
                energy_cost: cost_to_pu(g.energy_cost, b),
            })
            .collect(),
        wind_farms: file
            .wind_farms
            .iter()
            .map(|w| WindFarm {
                id: w.id.clone(),
                bus: w.bus,
                capacity: to_pu(w.capacity_mw, b),
            })
            .collect(),
        horizon: file.horizon,
        shed_cost: cost_to_pu(file.shed_cost, b),
        slack_cost: cost_to_pu(file.slack_cost, b),
        base_mva: b,
    };
    inst.validate().map_err(|e| match e {
        Error::InvalidInstance(msg) => schema(msg),
        other => other,
    })?;
    Ok(inst)
}

fn file_from_instance(inst: &SucInstance) -> NetworkFile {
    let b = inst.base_mva;
    NetworkFile {
        format_version: FORMAT_VERSION,
        base_mva: b,
        horizon: inst.horizon,
        shed_cost: cost_from_pu(inst.shed_cost, b),
        slack_cost: cost_from_pu(inst.slack_cost, b),
        buses: inst.network.buses.iter().map(|&id| BusRecord { id }).collect(),
        lines: inst
            .network
            .lines
            .iter()
            .map(|l| LineRecord {
                from: l.from,
                to: l.to,
                susceptance_pu: l.susceptance,
                capacity_mw: from_pu(l.flow_limit, b),
            })
            .collect(),
        generators: inst
            .generators
            .iter()
            .map(|g| GeneratorRecord {
                id: g.id.clone(),
                bus: g.bus,
                p_min_mw: from_pu(g.p_min, b),
                p_max_mw: from_pu(g.p_max, b),
                ramp_up_mw: from_pu(g.ramp_up, b),
                ramp_down_mw: from_pu(g.ramp_down, b),
                min_up: g.min_up,
                min_down: g.min_down,
                initial_on: g.initial_on,
                initial_periods: g.initial_periods,
                initial_output_mw: from_pu(g.initial_output, b),
                startup_cost: g.startup_cost,
                no_load_cost: g.fixed_cost,
                energy_cost: cost_from_pu(g.energy_cost, b),
            })
            .collect(),
        demands: inst
            .network
            .demands
            .iter()
            .map(|d| DemandRecord {
                id: d.id.clone(),
                bus: d.bus,
                profile_mw: d.profile.iter().map(|&v| from_pu(v, b)).collect(),
            })
            .collect(),
        wind_farms: inst
            .wind_farms
            .iter()
            .map(|w| WindRecord {
                id: w.id.clone(),
                bus: w.bus,
                capacity_mw: from_pu(w.capacity, b),
            })
            .collect(),
    }
}

pub fn parse_network(json: &str) -> Result<SucInstance> {
    let file: NetworkFile = serde_json::from_str(json).map_err(|e| {
        schema(format!("network file, line {} column {}: {e}", e.line(), e.column()))
    })?;
    instance_from_file(file)
}

pub fn network_to_json(inst: &SucInstance) -> String {
    let mut s = serde_json::to_string_pretty(&file_from_instance(inst)).expect("network serializes");
    s.push('\n');
    s
}

pub fn load_network(path: &Path) -> Result<SucInstance> {
    parse_network(&read_file(path)?)
}

pub fn export_network(inst: &SucInstance, path: &Path) -> Result<()> {
    write_atomic(path, network_to_json(inst).as_bytes())
}

/// The bundled 24-bus system over `horizon` periods (the first `horizon`
/// hours of its daily profile), with every cost coefficient scaled by an
/// independent factor in `[1 - delta, 1 + delta]` to break ties between
/// identical units.
pub fn load_rts24(horizon: usize, delta: f64, seed: u64) -> Result<SucInstance> {
    let mut inst = parse_network(RTS24_JSON)?;
    truncate_horizon(&mut inst, horizon)?;
    if delta > 0.0 {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        inst.perturb_costs(delta, &mut rng);
    }
    Ok(inst)
}

/// Keeps the first `horizon` periods.
pub fn truncate_horizon(inst: &mut SucInstance, horizon: usize) -> Result<()> {
    if horizon == 0 || horizon > inst.horizon {
        return Err(Error::Config(format!(
            "horizon {horizon} must be in 1..={}",
            inst.horizon
        )));
    }
    inst.horizon = horizon;
    for d in &mut inst.network.demands {
        d.profile.truncate(horizon);
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- scenarios

/// Wind scenarios for a fixed set of farms. Each entry is farm-major
/// (`farm * horizon + t`), in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPool {
    pub farm_ids: Vec<String>,
    pub capacities: Vec<f64>,
    pub horizon: usize,
    pub base_mva: f64,
    pub entries: Vec<Vec<f64>>,
}

impl ScenarioPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.farm_ids.len() * self.horizon
    }

    fn check(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(schema("scenario pool is empty".into()));
        }
        for (s, row) in self.entries.iter().enumerate() {
            if row.len() != self.dim() {
                return Err(schema(format!("scenario {} has {} values, expected {}", s + 1, row.len(), self.dim())));
            }
            for (j, cap) in self.capacities.iter().enumerate() {
                for t in 0..self.horizon {
                    let v = row[j * self.horizon + t];
                    if !v.is_finite() || v < 0.0 {
                        return Err(schema(format!(
                            "scenario {}, period {}, farm {}: invalid value {v}",
                            s + 1,
                            t + 1,
                            self.farm_ids[j]
                        )));
                    }
                    if v > *cap {
                        return Err(Error::CapacityExceeded {
                            farm: self.farm_ids[j].clone(),
                            value: v,
                            capacity: *cap,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the pool matches the farms and horizon of `inst`.
    pub fn check_against(&self, inst: &SucInstance) -> Result<()> {
        let ids: Vec<&str> = inst.wind_farms.iter().map(|w| w.id.as_str()).collect();
        if ids != self.farm_ids.iter().map(String::as_str).collect::<Vec<_>>() || self.horizon != inst.horizon {
            return Err(Error::Config(format!(
                "scenario pool covers farms {:?} over {} periods; instance has {:?} over {}",
                self.farm_ids, self.horizon, ids, inst.horizon
            )));
        }
        Ok(())
    }
}

fn pool_skeleton(inst: &SucInstance) -> ScenarioPool {
    ScenarioPool {
        farm_ids: inst.wind_farms.iter().map(|w| w.id.clone()).collect(),
        capacities: inst.wind_farms.iter().map(|w| w.capacity).collect(),
        horizon: inst.horizon,
        base_mva: inst.base_mva,
        entries: Vec::new(),
    }
}

/// Reads a long-format scenario file for the farms and horizon of `inst`.
/// Scenario ids may be any integers; scenarios are ordered by id and every
/// `(period, farm)` pair must appear exactly once per scenario.
pub fn load_scenarios(path: &Path, inst: &SucInstance) -> Result<ScenarioPool> {
    parse_scenarios(&read_file(path)?, inst)
}

pub fn parse_scenarios(text: &str, inst: &SucInstance) -> Result<ScenarioPool> {
    parse_into(text, pool_skeleton(inst))
}

/// Reads a scenario file without a network: farms are taken in order of
/// first appearance, the horizon is the largest period and no capacity
/// bound applies.
pub fn load_scenarios_unbounded(path: &Path) -> Result<ScenarioPool> {
    parse_scenarios_unbounded(&read_file(path)?)
}

pub fn parse_scenarios_unbounded(text: &str) -> Result<ScenarioPool> {
    let mut farm_ids: Vec<String> = Vec::new();
    let mut horizon = 0;
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(format!("scenario file: {e}")))?;
        if let Some(p) = rec.get(1).and_then(|v| v.trim().parse::<usize>().ok()) {
            horizon = horizon.max(p);
        }
        let id = rec.get(2).unwrap_or("").trim();
        if !farm_ids.iter().any(|f| f == id) {
            farm_ids.push(id.to_string());
        }
    }
    let pool = ScenarioPool {
        capacities: vec![f64::INFINITY; farm_ids.len()],
        farm_ids,
        horizon,
        base_mva: 1.0,
        entries: Vec::new(),
    };
    parse_into(text, pool)
}

fn parse_into(text: &str, mut pool: ScenarioPool) -> Result<ScenarioPool> {
    let farm_pos: BTreeMap<&str, usize> = pool.farm_ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let big_t = pool.horizon;
    let dim = pool.dim();
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| schema(format!("scenario header: {e}")))?;
    if header.iter().collect::<Vec<_>>() != SCENARIO_HEADER {
        return Err(schema(format!(
            "scenario header must be {}, got {}",
            SCENARIO_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| schema(format!("scenario line {line}: {e}")))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let sid: i64 = field(0)
            .parse()
            .map_err(|_| schema(format!("scenario line {line}, scenario_id: not an integer")))?;
        let period: usize = field(1)
            .parse()
            .map_err(|_| schema(format!("scenario line {line}, period: not a positive integer")))?;
        if period == 0 || period > big_t {
            return Err(schema(format!("scenario line {line}, period: {period} outside 1..={big_t}")));
        }
        let j = *farm_pos
            .get(field(2))
            .ok_or_else(|| schema(format!("scenario line {line}, farm_id: unknown farm {}", field(2))))?;
        let value: f64 = field(3)
            .parse()
            .map_err(|_| schema(format!("scenario line {line}, value_pu: not a number")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(schema(format!("scenario line {line}, value_pu: invalid wind value {value}")));
        }
        let slot = &mut rows.entry(sid).or_insert_with(|| vec![None; dim])[j * big_t + period - 1];
        if slot.is_some() {
            return Err(schema(format!(
                "scenario line {line}: duplicate entry for scenario {sid}, period {period}, farm {}",
                field(2)
            )));
        }
        *slot = Some(value);
    }
    for (sid, row) in rows {
        let full: Option<Vec<f64>> = row.into_iter().collect();
        pool.entries
            .push(full.ok_or_else(|| schema(format!("scenario {sid} is missing some (period, farm) entries")))?);
    }
    pool.check()?;
    Ok(pool)
}

/// Long-format CSV, scenarios numbered from 1, rows ordered by scenario,
/// period, then farm.
pub fn scenarios_to_csv(pool: &ScenarioPool) -> String {
    let mut out = String::from("scenario_id,period,farm_id,value_pu\n");
    for (s, row) in pool.entries.iter().enumerate() {
        for t in 0..pool.horizon {
            for (j, id) in pool.farm_ids.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", s + 1, t + 1, id, row[j * pool.horizon + t]));
            }
        }
    }
    out
}

pub fn export_scenarios(pool: &ScenarioPool, path: &Path) -> Result<()> {
    write_atomic(path, scenarios_to_csv(pool).as_bytes())
}

// ---------------------------------------------------------------- draws

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawSpec {
    pub seed: u64,
    pub n: usize,
    #[serde(default)]
    pub replacement: bool,
}

/// Uniform index in `0..range` from the high half of a 128-bit product.
fn bounded(rng: &mut Xoshiro256StarStar, range: usize) -> usize {
    ((rng.next_u64() as u128 * range as u128) >> 64) as usize
}

/// 0-based pool rows selected by `spec`.
pub fn draw_indices(pool_size: usize, spec: &DrawSpec) -> Result<Vec<usize>> {
    if spec.n == 0 {
        return Err(Error::InvalidDrawSpec("sample size must be >= 1".into()));
    }
    if pool_size == 0 {
        return Err(Error::InvalidDrawSpec("pool is empty".into()));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    if spec.replacement {
        return Ok((0..spec.n).map(|_| bounded(&mut rng, pool_size)).collect());
    }
    if spec.n > pool_size {
        return Err(Error::InvalidDrawSpec(format!(
            "cannot draw {} of {pool_size} scenarios without replacement",
            spec.n
        )));
    }
    let mut idx: Vec<usize> = (0..pool_size).collect();
    for k in 0..spec.n {
        let j = k + bounded(&mut rng, pool_size - k);
        idx.swap(k, j);
    }
    idx.truncate(spec.n);
    Ok(idx)
}

/// Equiprobable distribution over the drawn rows, in draw order.
pub fn draw(pool: &ScenarioPool, spec: &DrawSpec) -> Result<DiscreteDistribution> {
    let idx = draw_indices(pool.len(), spec)?;
    equiprobable_from_vectors(idx.iter().map(|&i| pool.entries[i].clone()).collect())
}

// ---------------------------------------------------------------- synthesis

/// Parameters of the synthetic generator. The marginal of every entry is
/// `capacity * Beta` with the given mean and variance (capacity-factor
/// units); `rho` is the lag-1 autocorrelation and `sigma` the cross-farm
/// correlation of the Gaussian latents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub mean: f64,
    pub variance: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            mean: 0.35,
            variance: 0.04,
            rho: 0.9,
            sigma: 0.6,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.mean > 0.0 && self.mean < 1.0) {
            return bad(format!("mean {} must be in (0, 1)", self.mean));
        }
        if !(self.variance >= 0.0 && self.variance < self.mean * (1.0 - self.mean)) {
            return bad(format!(
                "variance {} must be in [0, mean * (1 - mean))",
                self.variance
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho {} must be in [0, 1)", self.rho));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return bad(format!("sigma {} must be in [0, 1]", self.sigma));
        }
        Ok(())
    }
}

/// Seeded synthetic pool for the farms and horizon of `inst`.
///
/// Recipe: a common factor `c_t` and per-farm factors `e_jt` each follow a
/// stationary Gaussian AR(1) with coefficient `rho`; the latent is
/// `z_jt = sqrt(sigma) c_t + sqrt(1 - sigma) e_jt`, mapped to `[0, 1]`
/// through the normal CDF and then the Beta quantile function, and scaled by
/// the farm capacity.
pub fn synth_scenarios(inst: &SucInstance, count: usize, seed: u64, params: &SynthParams) -> Result<ScenarioPool> {
    params.validate()?;
    if count == 0 {
        return Err(Error::InvalidParams("count must be >= 1".into()));
    }
    let mut pool = pool_skeleton(inst);
    let (nf, big_t) = (pool.farm_ids.len(), pool.horizon);
    if params.variance == 0.0 {
        let row: Vec<f64> = (0..nf)
            .flat_map(|j| std::iter::repeat(params.mean * pool.capacities[j]).take(big_t))
            .collect();
        pool.entries = vec![row; count];
        return Ok(pool);
    }
    let k = params.mean * (1.0 - params.mean) / params.variance - 1.0;
    let beta = Beta::new(params.mean * k, (1.0 - params.mean) * k).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let innov = (1.0 - params.rho * params.rho).sqrt();
    let (ws, wi) = (params.sigma.sqrt(), (1.0 - params.sigma).sqrt());
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for _ in 0..count {
        let mut row = vec![0.0; nf * big_t];
        let mut common = 0.0;
        let mut own = vec![0.0; nf];
        for t in 0..big_t {
            let step = |prev: f64, eps: f64| if t == 0 { eps } else { params.rho * prev + innov * eps };
            common = step(common, rng.sample(normal));
            for j in 0..nf {
                own[j] = step(own[j], rng.sample(normal));
                let u = normal.cdf(ws * common + wi * own[j]);
                let x = beta.inverse_cdf(u.clamp(0.0, 1.0)).clamp(0.0, 1.0);
                row[j * big_t + t] = (x * pool.capacities[j]).min(pool.capacities[j]);
            }
        }
        pool.entries.push(row);
    }
    pool.check()?;
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suc::desk_instance;

    #[test]
    fn desk_round_trip() {
        let inst = desk_instance();
        let json = network_to_json(&inst);
        let back = parse_network(&json).unwrap();
        assert_eq!(back, inst);
        assert_eq!(network_to_json(&back), json);
    }

    #[test]
    fn rts24_shape_and_canonical_form() {
        let inst = parse_network(RTS24_JSON).unwrap();
        assert_eq!(inst.network.buses.len(), 24);
        assert_eq!(inst.network.lines.len(), 38);
        assert_eq!(inst.generators.len(), 32);
        assert_eq!(inst.wind_farms.len(), 6);
        assert_eq!(network_to_json(&inst), RTS24_JSON);
        let peak: f64 = inst.network.demands.iter().map(|d| d.profile[17]).sum();
        assert!((peak * inst.base_mva - 2850.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_generator_bus_is_named() {
        let json = network_to_json(&desk_instance()).replacen("\"bus\": 1,", "\"bus\": 7,", 1);
        match parse_network(&json) {
            Err(Error::SchemaViolation(msg)) => assert!(msg.contains("unknown bus 7"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_network("{\"format_version\": 1,\n \"base_mva\": \"x\"}") {
            Err(Error::SchemaViolation(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_network(Path::new("/nonexistent/network.json")),
            Err(Error::MissingFile(_))
        ));
    }

    fn csv_rows(values: &[f64]) -> String {
        let mut s = String::from("scenario_id,period,farm_id,value_pu\n");
        for (k, v) in values.iter().enumerate() {
            s.push_str(&format!("{},1,W1,{v}\n{},2,W1,{v}\n", k + 1, k + 1));
        }
        s
    }

    #[test]
    fn scenario_file_checks() {
        let inst = desk_instance();
        let vals: Vec<f64> = (0..100).map(|k| k as f64 / 100.0).collect();
        let pool = parse_scenarios(&csv_rows(&vals), &inst).unwrap();
        assert_eq!(pool.len(), 100);
        assert_eq!(scenarios_to_csv(&pool), csv_rows(&vals));
        assert!(matches!(
            parse_scenarios(&csv_rows(&[-0.1]), &inst),
            Err(Error::SchemaViolation(_))
        ));
        assert!(matches!(
            parse_scenarios(&csv_rows(&[1.5]), &inst),
            Err(Error::CapacityExceeded { .. })
        ));
        let partial = "scenario_id,period,farm_id,value_pu\n1,1,W1,0.5\n";
        assert!(matches!(parse_scenarios(partial, &inst), Err(Error::SchemaViolation(_))));
    }

    fn pool(size: usize) -> ScenarioPool {
        ScenarioPool {
            farm_ids: vec!["W".into()],
            capacities: vec![1.0],
            horizon: 1,
            base_mva: 100.0,
            entries: (0..size).map(|k| vec![k as f64 / size as f64]).collect(),
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let spec = DrawSpec {
            seed: 7,
            n: 5,
            replacement: false,
        };
        assert_eq!(draw_indices(50, &spec).unwrap(), draw_indices(50, &spec).unwrap());
        let d = draw(&pool(50), &spec).unwrap();
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn full_draw_is_a_permutation() {
        let spec = DrawSpec {
            seed: 3,
            n: 20,
            replacement: false,
        };
        let mut idx = draw_indices(20, &spec).unwrap();
        assert_ne!(idx, (0..20).collect::<Vec<_>>());
        idx.sort();
        assert_eq!(idx, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn recorded_draws() {
        // Fixture recorded at first implementation; pins the generator.
        let a = draw_indices(200, &DrawSpec { seed: 1, n: 6, replacement: false }).unwrap();
        let b = draw_indices(200, &DrawSpec { seed: 2, n: 6, replacement: false }).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, RECORDED_SEED1);
        assert_eq!(b, RECORDED_SEED2);
    }

    const RECORDED_SEED1: [usize; 6] = [140, 104, 115, 80, 0, 32];
    const RECORDED_SEED2: [usize; 6] = [20, 145, 38, 150, 138, 51];

    #[test]
    fn invalid_draw_specs() {
        let too_many = DrawSpec {
            seed: 0,
            n: 11,
            replacement: false,
        };
        assert!(matches!(draw_indices(10, &too_many), Err(Error::InvalidDrawSpec(_))));
        let with = DrawSpec {
            replacement: true,
            ..too_many
        };
        assert_eq!(draw_indices(10, &with).unwrap().len(), 11);
        let zero = DrawSpec { n: 0, ..too_many };
        assert!(matches!(draw_indices(10, &zero), Err(Error::InvalidDrawSpec(_))));
    }

    #[test]
    fn synth_bounds_and_degenerate() {
        let inst = desk_instance();
        let p = synth_scenarios(&inst, 1, 5, &SynthParams::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.entries[0].iter().all(|&v| (0.0..=1.0).contains(&v)));
        let flat = SynthParams {
            variance: 0.0,
            ..SynthParams::default()
        };
        let p = synth_scenarios(&inst, 3, 5, &flat).unwrap();
        assert!(p.entries.iter().flatten().all(|&v| v == 0.35));
        let bad = SynthParams {
            rho: 1.0,
            ..SynthParams::default()
        };
        assert!(matches!(synth_scenarios(&inst, 3, 5, &bad), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn synth_independence_without_correlation() {
        let mut inst = desk_instance();
        inst.wind_farms.push(WindFarm {
            id: "W2".into(),
            bus: 1,
            capacity: 1.0,
        });
        let params = SynthParams {
            rho: 0.0,
            sigma: 0.0,
            ..SynthParams::default()
        };
        let pool = synth_scenarios(&inst, 10_000, 11, &params).unwrap();
        let corr = |a: usize, b: usize| {
            let xs: Vec<f64> = pool.entries.iter().map(|r| r[a]).collect();
            let ys: Vec<f64> = pool.entries.iter().map(|r| r[b]).collect();
            let n = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
            cov / (vx * vy).sqrt()
        };
        // lag-1 within a farm, and across farms in the same period
        assert!(corr(0, 1).abs() < 0.05);
        assert!(corr(0, 2).abs() < 0.05);
        let mean: f64 = pool.entries.iter().map(|r| r[0]).sum::<f64>() / 10_000.0;
        assert!((mean - 0.35).abs() < 0.01);
    }

    #[test]
    fn synth_correlation_shows_up() {
        let pool = synth_scenarios(&desk_instance(), 2000, 1, &SynthParams::default()).unwrap();
        let xs: Vec<f64> = pool.entries.iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = pool.entries.iter().map(|r| r[1]).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        assert!(cov / (vx * vy).sqrt() > 0.7);
    }
}
