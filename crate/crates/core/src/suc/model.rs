use std::collections::HashMap;

use super::{initial_lock_periods, SucInstance};
use crate::error::{Error, Result};
use crate::scenario::DiscreteDistribution;
use crate::solver::{Model, VarId};
use crate::stochprog::{ExtensiveModel, FirstStageDecision, TwoStageProblem};

const INF: f64 = f64::INFINITY;

/// Commitment binaries, each indexed `g * horizon + t`.
#[derive(Debug, Clone)]
pub struct FirstStageVars {
    pub u: Vec<VarId>,
    pub y: Vec<VarId>,
    pub z: Vec<VarId>,
}

impl FirstStageVars {
    /// Columns in decision-vector order: all `u`, then `y`, then `z`.
    pub fn ordered(&self) -> Vec<VarId> {
        self.u.iter().chain(&self.y).chain(&self.z).copied().collect()
    }
}

/// How the dispatch sees the on/off states.
#[derive(Debug, Clone, Copy)]
pub enum Commitment<'a> {
    /// Linked to first-stage columns of the same model.
    Linked(&'a FirstStageVars),
    /// Fixed `u` values (`g * horizon + t`); the fragment is then a pure LP.
    Fixed(&'a [f64]),
}

/// Dispatch columns of one scenario, each indexed `entity * horizon + t`.
#[derive(Debug, Clone)]
pub struct SecondStageVars {
    pub p: Vec<VarId>,
    pub shed: Vec<VarId>,
    pub slack: Vec<VarId>,
    pub spill: Vec<VarId>,
    pub theta: Vec<VarId>,
    pub flow: Vec<VarId>,
}

/// Adds the commitment variables, their cost and the state-transition,
/// initial-state and minimum up/down constraints.
pub fn build_first_stage(inst: &SucInstance, model: &mut Model) -> FirstStageVars {
    let big_t = inst.horizon;
    let n = inst.generators.len() * big_t;
    let mut u = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for g in &inst.generators {
        for _ in 0..big_t {
            u.push(model.add_binary(g.fixed_cost));
        }
    }
    for g in &inst.generators {
        for _ in 0..big_t {
            y.push(model.add_binary(g.startup_cost));
        }
    }
    for _ in 0..n {
        z.push(model.add_binary(0.0));
    }
    for (gi, g) in inst.generators.iter().enumerate() {
        let k = |t: usize| gi * big_t + t;
        let u0 = if g.initial_on { 1.0 } else { 0.0 };
        for t in 0..big_t {
            // y - z = u_t - u_{t-1}
            if t == 0 {
                model.add_eq(vec![(y[k(t)], 1.0), (z[k(t)], -1.0), (u[k(t)], -1.0)], -u0);
            } else {
                model.add_eq(
                    vec![
                        (y[k(t)], 1.0),
                        (z[k(t)], -1.0),
                        (u[k(t)], -1.0),
                        (u[k(t - 1)], 1.0),
                    ],
                    0.0,
                );
            }
            model.add_le(vec![(y[k(t)], 1.0), (z[k(t)], 1.0)], 1.0);
        }
        let lock = initial_lock_periods(g, big_t);
        for t in 0..lock {
            model.fix(u[k(t)], u0);
        }
        for t in lock..big_t {
            let up_start = (t + 1).saturating_sub(g.min_up);
            let mut terms: Vec<_> = (up_start..=t).map(|tau| (y[k(tau)], 1.0)).collect();
            terms.push((u[k(t)], -1.0));
            model.add_le(terms, 0.0);

            let down_start = (t + 1).saturating_sub(g.min_down);
            let mut terms: Vec<_> = (down_start..=t).map(|tau| (z[k(tau)], 1.0)).collect();
            terms.push((u[k(t)], 1.0));
            model.add_le(terms, 1.0);
        }
    }
    FirstStageVars { u, y, z }
}

/// Adds one scenario's dispatch problem with its objective scaled by
/// `weight`. Slack at every bus absorbs excess injection and shedding covers
/// any deficit, so the fragment is feasible for every admissible commitment.
pub fn build_second_stage(
    inst: &SucInstance,
    model: &mut Model,
    scenario: &[f64],
    weight: f64,
    commitment: Commitment,
) -> SecondStageVars {
    let big_t = inst.horizon;
    let net = &inst.network;
    let bus_pos: HashMap<usize, usize> = net.buses.iter().enumerate().map(|(k, &b)| (b, k)).collect();
    let nb = net.buses.len();

    let mut p = Vec::with_capacity(inst.generators.len() * big_t);
    for (gi, g) in inst.generators.iter().enumerate() {
        for t in 0..big_t {
            let cost = weight * g.energy_cost;
            match commitment {
                Commitment::Fixed(u) => {
                    let on = u[gi * big_t + t];
                    let mut lo = g.p_min * on;
                    let mut hi = g.p_max * on;
                    if t == 0 {
                        lo = lo.max((g.initial_output - g.ramp_down) * on);
                        hi = hi.min((g.initial_output + g.ramp_up) * on);
                    }
                    p.push(model.add_continuous(lo, hi, cost));
                }
                Commitment::Linked(fs) => {
                    let uv = fs.u[gi * big_t + t];
                    let pv = model.add_continuous(0.0, g.p_max, cost);
                    model.add_ge(vec![(pv, 1.0), (uv, -g.p_min)], 0.0);
                    model.add_le(vec![(pv, 1.0), (uv, -g.p_max)], 0.0);
                    if t == 0 {
                        model.add_ge(vec![(pv, 1.0), (uv, -(g.initial_output - g.ramp_down))], 0.0);
                        model.add_le(vec![(pv, 1.0), (uv, -(g.initial_output + g.ramp_up))], 0.0);
                    }
                    p.push(pv);
                }
            }
        }
        for t in 1..big_t {
            let (cur, prev) = (p[gi * big_t + t], p[gi * big_t + t - 1]);
            model.add_row(vec![(cur, 1.0), (prev, -1.0)], -g.ramp_down, g.ramp_up);
        }
    }

    let mut shed = Vec::with_capacity(net.demands.len() * big_t);
    for d in &net.demands {
        for t in 0..big_t {
            shed.push(model.add_continuous(0.0, d.profile[t], weight * inst.shed_cost));
        }
    }
    let mut slack = Vec::with_capacity(nb * big_t);
    for _ in 0..nb * big_t {
        slack.push(model.add_continuous(0.0, INF, weight * inst.slack_cost));
    }
    let mut spill = Vec::with_capacity(inst.wind_farms.len() * big_t);
    for j in 0..inst.wind_farms.len() {
        for t in 0..big_t {
            spill.push(model.add_continuous(0.0, inst.wind(scenario, j, t), 0.0));
        }
    }
    let reference = bus_pos[&net.reference_bus()];
    let mut theta = Vec::with_capacity(nb * big_t);
    for b in 0..nb {
        for _ in 0..big_t {
            let (lo, hi) = if b == reference { (0.0, 0.0) } else { (-INF, INF) };
            theta.push(model.add_continuous(lo, hi, 0.0));
        }
    }
    let mut flow = Vec::with_capacity(net.lines.len() * big_t);
    for l in &net.lines {
        let (a, b) = (bus_pos[&l.from], bus_pos[&l.to]);
        for t in 0..big_t {
            let f = model.add_continuous(-l.flow_limit, l.flow_limit, 0.0);
            model.add_eq(
                vec![
                    (f, 1.0),
                    (theta[a * big_t + t], -l.susceptance),
                    (theta[b * big_t + t], l.susceptance),
                ],
                0.0,
            );
            flow.push(f);
        }
    }

    // nodal balance:
    //   gen - out + in - slack - spill + shed = load - wind
    for t in 0..big_t {
        let mut terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
        let mut rhs = vec![0.0; nb];
        for (gi, g) in inst.generators.iter().enumerate() {
            terms[bus_pos[&g.bus]].push((p[gi * big_t + t], 1.0));
        }
        for (li, l) in net.lines.iter().enumerate() {
            terms[bus_pos[&l.from]].push((flow[li * big_t + t], -1.0));
            terms[bus_pos[&l.to]].push((flow[li * big_t + t], 1.0));
        }
        for b in 0..nb {
            terms[b].push((slack[b * big_t + t], -1.0));
        }
        for (j, w) in inst.wind_farms.iter().enumerate() {
            let b = bus_pos[&w.bus];
            terms[b].push((spill[j * big_t + t], -1.0));
            rhs[b] -= inst.wind(scenario, j, t);
        }
        for (di, d) in net.demands.iter().enumerate() {
            let b = bus_pos[&d.bus];
            terms[b].push((shed[di * big_t + t], 1.0));
            rhs[b] += d.profile[t];
        }
        for (row, r) in terms.into_iter().zip(rhs) {
            model.add_eq(row, r);
        }
    }

    SecondStageVars {
        p,
        shed,
        slack,
        spill,
        theta,
        flow,
    }
}

/// One first stage linked to a probability-weighted dispatch copy per scenario.
pub fn build_extensive_form(inst: &SucInstance, dist: &DiscreteDistribution) -> Result<ExtensiveModel> {
    let mut model = Model::new();
    let fs = build_first_stage(inst, &mut model);
    for (s, &pi) in dist.scenarios().iter().zip(dist.probabilities()) {
        inst.check_scenario(&s.values)?;
        build_second_stage(inst, &mut model, &s.values, pi, Commitment::Linked(&fs));
    }
    Ok(ExtensiveModel {
        first_stage: fs.ordered(),
        model,
    })
}

impl SucInstance {
    /// `f(x) = sum C_SU y + C_fix u` for a decision vector `[u, y, z]`.
    pub fn commitment_cost(&self, values: &[f64]) -> f64 {
        let n = self.generators.len() * self.horizon;
        let mut cost = 0.0;
        for (gi, g) in self.generators.iter().enumerate() {
            for t in 0..self.horizon {
                let k = gi * self.horizon + t;
                cost += g.fixed_cost * values[k] + g.startup_cost * values[n + k];
            }
        }
        cost
    }

    /// Checks a decision vector `[u, y, z]` against every first-stage
    /// constraint.
    pub fn check_commitment(&self, values: &[f64]) -> Result<()> {
        let big_t = self.horizon;
        let n = self.generators.len() * big_t;
        if values.len() != 3 * n {
            return Err(Error::DimensionMismatch {
                id: 0,
                expected: 3 * n,
                found: values.len(),
            });
        }
        let bad = |msg: String| Err(Error::InvalidInstance(format!("infeasible commitment: {msg}")));
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return bad("non-binary value".into());
        }
        let (u, rest) = values.split_at(n);
        let (y, z) = rest.split_at(n);
        for (gi, g) in self.generators.iter().enumerate() {
            let k = |t: usize| gi * big_t + t;
            let u0 = if g.initial_on { 1.0 } else { 0.0 };
            for t in 0..big_t {
                let prev = if t == 0 { u0 } else { u[k(t - 1)] };
                if y[k(t)] - z[k(t)] != u[k(t)] - prev || y[k(t)] + z[k(t)] > 1.0 {
                    return bad(format!("state transition of {} at period {}", g.id, t + 1));
                }
            }
            let lock = initial_lock_periods(g, big_t);
            for t in 0..lock {
                if u[k(t)] != u0 {
                    return bad(format!("{} leaves its initial state in period {}", g.id, t + 1));
                }
            }
            for t in lock..big_t {
                let ups: f64 = ((t + 1).saturating_sub(g.min_up)..=t).map(|tau| y[k(tau)]).sum();
                let downs: f64 = ((t + 1).saturating_sub(g.min_down)..=t).map(|tau| z[k(tau)]).sum();
                if ups > u[k(t)] || downs > 1.0 - u[k(t)] {
                    return bad(format!("minimum up/down time of {} at period {}", g.id, t + 1));
                }
            }
        }
        Ok(())
    }

    /// Fixed-commitment dispatch LP for one scenario, with `f(x)` as the
    /// objective constant.
    pub fn fixed_dispatch_model(&self, values: &[f64], scenario: &[f64]) -> Result<(Model, SecondStageVars)> {
        self.check_scenario(scenario)?;
        let n = self.generators.len() * self.horizon;
        if values.len() != 3 * n {
            return Err(Error::DimensionMismatch {
                id: 0,
                expected: 3 * n,
                found: values.len(),
            });
        }
        let mut model = Model::new();
        model.add_objective_constant(self.commitment_cost(values));
        let vars = build_second_stage(self, &mut model, scenario, 1.0, Commitment::Fixed(&values[..n]));
        Ok((model, vars))
    }
}

impl TwoStageProblem for SucInstance {
    fn scenario_dim(&self) -> usize {
        SucInstance::scenario_dim(self)
    }

    fn build_extensive(&self, dist: &DiscreteDistribution) -> Result<ExtensiveModel> {
        build_extensive_form(self, dist)
    }

    fn build_fixed(&self, x: &FirstStageDecision, scenario: &[f64]) -> Result<Model> {
        Ok(self.fixed_dispatch_model(&x.values, scenario)?.0)
    }

    fn first_stage_cost(&self, values: &[f64]) -> f64 {
        self.commitment_cost(values)
    }

    fn check_decision(&self, values: &[f64]) -> Result<()> {
        self.check_commitment(values)
    }

    fn fingerprint(&self) -> String {
        SucInstance::fingerprint(self)
    }
}
