//! Stochastic unit commitment: thermal commitment in the first stage, DC
//! dispatch with wind spillage, load shedding and nodal slack in the second.
//!
//! All powers are per-unit of `base_mva`; all cost coefficients are dollars
//! per per-unit power per period, so the objective is in dollars. Scenario
//! vectors hold wind output per farm and period, farm-major
//! (`index = farm * horizon + t`).

mod model;

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use model::{
    build_extensive_form, build_first_stage, build_second_stage, Commitment, FirstStageVars,
    SecondStageVars,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Ramp-up limit per period.
    pub ramp_up: f64,
    /// Ramp-down limit per period.
    pub ramp_down: f64,
    pub min_up: usize,
    pub min_down: usize,
    /// `U0`: on before the horizon starts.
    pub initial_on: bool,
    /// `T_U0`: periods already spent in the initial state.
    pub initial_periods: usize,
    /// `P0`.
    pub initial_output: f64,
    pub startup_cost: f64,
    pub fixed_cost: f64,
    pub energy_cost: f64,
}

impl Generator {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInstance(format!("generator {}: {msg}", self.id)));
        let nums = [
            self.p_min,
            self.p_max,
            self.ramp_up,
            self.ramp_down,
            self.initial_output,
            self.startup_cost,
            self.fixed_cost,
            self.energy_cost,
        ];
        if nums.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if !(0.0 <= self.p_min && self.p_min <= self.p_max) {
            return bad("requires 0 <= p_min <= p_max");
        }
        if self.ramp_up < 0.0 || self.ramp_down < 0.0 {
            return bad("negative ramp limit");
        }
        if self.min_up < 1 || self.min_down < 1 {
            return bad("minimum up/down times must be >= 1");
        }
        if self.initial_output < 0.0 || self.initial_output > self.p_max {
            return bad("initial output outside [0, p_max]");
        }
        if !self.initial_on && self.initial_output != 0.0 {
            return bad("initially off but initial output is nonzero");
        }
        // Ramps without start-up/shut-down exceptions: a unit must be able to
        // reach p_min in one period and leave it in one period, otherwise some
        // commitments admit no dispatch at all.
        if self.ramp_up < self.p_min || self.ramp_down < self.p_min {
            return bad("ramp limits below p_min break recourse feasibility");
        }
        if self.initial_on && self.initial_output - self.ramp_down > self.ramp_down {
            return bad("initial output too high to shut down at period 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: String,
    pub bus: usize,
    /// Load per period.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<usize>,
    pub lines: Vec<Line>,
    pub demands: Vec<Demand>,
}

impl Network {
    /// Lowest-numbered bus; its angle is fixed to zero.
    pub fn reference_bus(&self) -> usize {
        self.buses.iter().copied().min().unwrap_or(0)
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::InvalidInstance("network has no buses".into()));
        }
        let set: HashSet<usize> = self.buses.iter().copied().collect();
        if set.len() != self.buses.len() {
            return Err(Error::InvalidInstance("duplicate bus ids".into()));
        }
        for (k, l) in self.lines.iter().enumerate() {
            if !set.contains(&l.from) || !set.contains(&l.to) {
                return Err(Error::InvalidInstance(format!(
                    "line {} references unknown bus",
                    k + 1
                )));
            }
            if l.from == l.to {
                return Err(Error::InvalidInstance(format!("line {} is a self-loop", k + 1)));
            }
            if !(l.susceptance > 0.0) || !(l.flow_limit > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "line {} needs positive susceptance and flow limit",
                    k + 1
                )));
            }
        }
        for d in &self.demands {
            if !set.contains(&d.bus) {
                return Err(Error::InvalidInstance(format!(
                    "demand {} references unknown bus {}",
                    d.id, d.bus
                )));
            }
            if d.profile.len() != horizon {
                return Err(Error::InvalidInstance(format!(
                    "demand {} has {} periods, horizon is {horizon}",
                    d.id,
                    d.profile.len()
                )));
            }
            if d.profile.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "demand {} has a negative or non-finite load",
                    d.id
                )));
            }
        }
        // connectivity
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for l in &self.lines {
            adj.entry(l.from).or_default().push(l.to);
            adj.entry(l.to).or_default().push(l.from);
        }
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([self.buses[0]]);
        seen.insert(self.buses[0]);
        while let Some(b) = queue.pop_front() {
            for &nb in adj.get(&b).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(nb) {
                    queue.push_back(nb);
                }
            }
        }
        if seen.len() != self.buses.len() {
            return Err(Error::InvalidInstance("network is not connected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub id: String,
    pub bus: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SucInstance {
    pub network: Network,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    pub horizon: usize,
    /// Load-shedding cost per per-unit and period.
    pub shed_cost: f64,
    /// Nodal excess-slack cost per per-unit and period.
    pub slack_cost: f64,
    pub base_mva: f64,
}

impl SucInstance {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInstance("horizon must be >= 1".into()));
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidInstance("base MVA must be positive".into()));
        }
        if !(self.shed_cost >= 0.0) || !(self.slack_cost >= 0.0) {
            return Err(Error::InvalidInstance("negative shedding or slack cost".into()));
        }
        self.network.validate(self.horizon)?;
        let buses: HashSet<usize> = self.network.buses.iter().copied().collect();
        for g in &self.generators {
            g.validate()?;
            if !buses.contains(&g.bus) {
                return Err(Error::InvalidInstance(format!(
                    "generator {} references unknown bus {}",
                    g.id, g.bus
                )));
            }
        }
        for w in &self.wind_farms {
            if !buses.contains(&w.bus) {
                return Err(Error::InvalidInstance(format!(
                    "wind farm {} references unknown bus {}",
                    w.id, w.bus
                )));
            }
            if !(w.capacity >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "wind farm {} has negative capacity",
                    w.id
                )));
            }
        }
        Ok(())
    }

    /// Length of one scenario vector: farms times periods.
    pub fn scenario_dim(&self) -> usize {
        self.wind_farms.len() * self.horizon
    }

    /// Wind output of farm `j` (0-based) in period `t` (0-based).
    pub fn wind(&self, scenario: &[f64], j: usize, t: usize) -> f64 {
        scenario[j * self.horizon + t]
    }

    pub fn check_scenario(&self, scenario: &[f64]) -> Result<()> {
        if scenario.len() != self.scenario_dim() {
            return Err(Error::DimensionMismatch {
                id: 0,
                expected: self.scenario_dim(),
                found: scenario.len(),
            });
        }
        for (j, w) in self.wind_farms.iter().enumerate() {
            for t in 0..self.horizon {
                let v = self.wind(scenario, j, t);
                if !(0.0..=w.capacity + 1e-9).contains(&v) {
                    return Err(Error::CapacityExceeded {
                        farm: w.id.clone(),
                        value: v,
                        capacity: w.capacity,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("instance serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Number of first-stage binaries (`u`, `y`, `z` per generator and period).
    pub fn first_stage_len(&self) -> usize {
        3 * self.generators.len() * self.horizon
    }

    /// Multiplies every generator cost coefficient by an independent factor
    /// drawn uniformly from `[1 - delta, 1 + delta]`.
    pub fn perturb_costs<R: rand::Rng>(&mut self, delta: f64, rng: &mut R) {
        if delta <= 0.0 {
            return;
        }
        for g in &mut self.generators {
            for c in [&mut g.startup_cost, &mut g.fixed_cost, &mut g.energy_cost] {
                *c *= rng.gen_range(1.0 - delta..=1.0 + delta);
            }
        }
    }
}

/// Number of leading periods a generator must stay in its initial state:
/// `min(T, UT - T_U0)` if initially on, `min(T, DT - T_U0)` if off, clamped
/// at zero.
pub fn initial_lock_periods(g: &Generator, horizon: usize) -> usize {
    let need = if g.initial_on { g.min_up } else { g.min_down };
    need.saturating_sub(g.initial_periods).min(horizon)
}

/// Deterministic two-bus instance small enough for exhaustive commitment
/// enumeration (2 generators, 2 periods, 16 candidate commitments).
pub fn desk_instance() -> SucInstance {
    let base = 100.0;
    SucInstance {
        network: Network {
            buses: vec![1, 2],
            lines: vec![Line {
                from: 1,
                to: 2,
                susceptance: 10.0,
                flow_limit: 1.0,
            }],
            demands: vec![Demand {
                id: "D1".into(),
                bus: 2,
                profile: vec![1.2, 1.6],
            }],
        },
        generators: vec![
            Generator {
                id: "G1".into(),
                bus: 1,
                p_min: 0.2,
                p_max: 0.8,
                ramp_up: 0.8,
                ramp_down: 0.8,
                min_up: 2,
                min_down: 2,
                initial_on: true,
                initial_periods: 4,
                initial_output: 0.5,
                startup_cost: 500.0,
                fixed_cost: 100.0,
                energy_cost: 20.0 * base,
            },
            Generator {
                id: "G2".into(),
                bus: 1,
                p_min: 0.1,
                p_max: 0.6,
                ramp_up: 0.6,
                ramp_down: 0.6,
                min_up: 2,
                min_down: 2,
                initial_on: false,
                initial_periods: 4,
                initial_output: 0.0,
                startup_cost: 200.0,
                fixed_cost: 60.0,
                energy_cost: 45.0 * base,
            },
        ],
        wind_farms: vec![WindFarm {
            id: "W1".into(),
            bus: 2,
            capacity: 1.0,
        }],
        horizon: 2,
        shed_cost: 1500.0 * base,
        slack_cost: 1500.0 * base,
        base_mva: base,
    }
}
