//! Oracles shared by the integration tests. They re-derive the unit
//! commitment formulation from scratch rather than reusing the library's
//! model builders.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use scenred::scenario::DiscreteDistribution;
use scenred::solver::{Backend, HighsBackend, Model, SolveOptions};
use scenred::suc::{Demand, Generator, Line, Network, SucInstance, WindFarm};

pub fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Whether the on/off path `u` of one unit respects its initial state and
/// minimum run lengths. A run may only end once it has lasted the minimum;
/// the initial run counts the periods spent before the horizon.
pub fn path_is_feasible(g: &Generator, u: &[bool]) -> bool {
    let mut state = g.initial_on;
    let mut run = g.initial_periods;
    for &on in u {
        if on != state {
            let need = if state { g.min_up } else { g.min_down };
            if run < need {
                return false;
            }
            state = on;
            run = 0;
        }
        run += 1;
    }
    true
}

/// `f(x)` from on/off paths.
pub fn commitment_cost(inst: &SucInstance, paths: &[Vec<bool>]) -> f64 {
    let mut cost = 0.0;
    for (g, u) in inst.generators.iter().zip(paths) {
        let mut prev = g.initial_on;
        for &on in u {
            if on {
                cost += g.fixed_cost;
            }
            if on && !prev {
                cost += g.startup_cost;
            }
            prev = on;
        }
    }
    cost
}

/// Cheapest dispatch for fixed on/off paths and one wind scenario, written
/// bus by bus with explicit angle variables.
pub fn dispatch_cost(inst: &SucInstance, paths: &[Vec<bool>], wind: &[f64]) -> f64 {
    let big_t = inst.horizon;
    let buses = &inst.network.buses;
    let reference = *buses.iter().min().unwrap();
    let mut m = Model::new();
    let mut pv = Vec::new();
    for t in 0..big_t {
        let theta: Vec<_> = buses
            .iter()
            .map(|&b| {
                if b == reference {
                    m.add_continuous(0.0, 0.0, 0.0)
                } else {
                    m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, 0.0)
                }
            })
            .collect();
        let pos = |b: usize| buses.iter().position(|&x| x == b).unwrap();
        let mut balance: Vec<Vec<(scenred::solver::VarId, f64)>> = vec![Vec::new(); buses.len()];
        let mut rhs = vec![0.0; buses.len()];
        for l in &inst.network.lines {
            // flow eliminated: B (theta_from - theta_to) within +-limit
            let (a, b) = (pos(l.from), pos(l.to));
            m.add_row(
                vec![(theta[a], l.susceptance), (theta[b], -l.susceptance)],
                -l.flow_limit,
                l.flow_limit,
            );
            balance[a].push((theta[a], -l.susceptance));
            balance[a].push((theta[b], l.susceptance));
            balance[b].push((theta[a], l.susceptance));
            balance[b].push((theta[b], -l.susceptance));
        }
        for (k, _) in buses.iter().enumerate() {
            let slack = m.add_continuous(0.0, f64::INFINITY, inst.slack_cost);
            balance[k].push((slack, -1.0));
        }
        for d in &inst.network.demands {
            let shed = m.add_continuous(0.0, d.profile[t], inst.shed_cost);
            balance[pos(d.bus)].push((shed, 1.0));
            rhs[pos(d.bus)] += d.profile[t];
        }
        for (j, w) in inst.wind_farms.iter().enumerate() {
            let avail = wind[j * big_t + t];
            let spill = m.add_continuous(0.0, avail, 0.0);
            balance[pos(w.bus)].push((spill, -1.0));
            rhs[pos(w.bus)] -= avail;
        }
        for (g, u) in inst.generators.iter().zip(paths) {
            let on = if u[t] { 1.0 } else { 0.0 };
            let p = m.add_continuous(g.p_min * on, g.p_max * on, g.energy_cost);
            balance[pos(g.bus)].push((p, 1.0));
            pv.push(p);
        }
        for (row, r) in balance.into_iter().zip(rhs) {
            m.add_eq(row, r);
        }
    }
    // ramps across periods, including the initial output
    let ng = inst.generators.len();
    for (gi, (g, u)) in inst.generators.iter().zip(paths).enumerate() {
        for t in 0..big_t {
            let p = pv[t * ng + gi];
            if t == 0 {
                let on = if u[0] { 1.0 } else { 0.0 };
                m.add_row(
                    vec![(p, 1.0)],
                    (g.initial_output - g.ramp_down) * on,
                    (g.initial_output + g.ramp_up) * on,
                );
            } else {
                let prev = pv[(t - 1) * ng + gi];
                m.add_row(vec![(p, 1.0), (prev, -1.0)], -g.ramp_down, g.ramp_up);
            }
        }
    }
    HighsBackend.solve(&m, &SolveOptions::default()).unwrap().objective
}

/// All feasible on/off path combinations.
pub fn feasible_commitments(inst: &SucInstance) -> Vec<Vec<Vec<bool>>> {
    let big_t = inst.horizon;
    let per_unit: Vec<Vec<Vec<bool>>> = inst
        .generators
        .iter()
        .map(|g| {
            (0..1usize << big_t)
                .map(|mask| (0..big_t).map(|t| mask >> t & 1 == 1).collect::<Vec<bool>>())
                .filter(|u| path_is_feasible(g, u))
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<Vec<bool>>> = vec![Vec::new()];
    for options in per_unit {
        let mut next = Vec::new();
        for partial in &out {
            for u in &options {
                let mut p = partial.clone();
                p.push(u.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Brute-force `z*(P)`: every feasible commitment, every scenario's dispatch.
pub fn enumerate_optimum(inst: &SucInstance, dist: &DiscreteDistribution) -> f64 {
    feasible_commitments(inst)
        .iter()
        .map(|paths| {
            commitment_cost(inst, paths)
                + dist
                    .scenarios()
                    .iter()
                    .zip(dist.probabilities())
                    .map(|(s, &pi)| pi * dispatch_cost(inst, paths, &s.values))
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random wind vectors within the farm capacities of `inst`.
pub fn random_scenarios(inst: &SucInstance, n: usize, rng: &mut impl Rng) -> DiscreteDistribution {
    let vectors = (0..n)
        .map(|_| {
            inst.wind_farms
                .iter()
                .flat_map(|w| (0..inst.horizon).map(|_| rng.gen_range(0.0..=w.capacity)).collect::<Vec<_>>())
                .collect()
        })
        .collect();
    DiscreteDistribution::new(vectors, vec![1.0 / n as f64; n]).unwrap()
}

/// Decision vector `[u, y, z]` for on/off paths, generator-major.
pub fn decision_vector(inst: &SucInstance, paths: &[Vec<bool>]) -> Vec<f64> {
    let n = inst.generators.len() * inst.horizon;
    let mut x = vec![0.0; 3 * n];
    for (gi, (g, u)) in inst.generators.iter().zip(paths).enumerate() {
        let mut prev = g.initial_on;
        for (t, &on) in u.iter().enumerate() {
            let k = gi * inst.horizon + t;
            x[k] = f64::from(u8::from(on));
            x[n + k] = f64::from(u8::from(on && !prev));
            x[2 * n + k] = f64::from(u8::from(!on && prev));
            prev = on;
        }
    }
    x
}

/// A random instance in the desk class: a path network of `buses` buses,
/// `gens` units, one wind farm and a short horizon. Every unit can start
/// and stop within one period, so every commitment has a dispatch.
pub fn random_instance(rng: &mut impl Rng, buses: usize, gens: usize, horizon: usize) -> SucInstance {
    let base = 100.0;
    let bus_ids: Vec<usize> = (1..=buses).collect();
    let lines = (1..buses)
        .map(|b| Line {
            from: b,
            to: b + 1,
            susceptance: rng.gen_range(5.0..20.0),
            flow_limit: rng.gen_range(0.4..1.5),
        })
        .collect();
    let generators = (0..gens)
        .map(|k| {
            let p_max: f64 = rng.gen_range(0.4..1.0);
            let p_min = p_max * rng.gen_range(0.1..0.5);
            let initial_on = rng.gen_bool(0.5);
            let initial_output = if initial_on { rng.gen_range(p_min..=p_max.min(2.0 * p_min)) } else { 0.0 };
            Generator {
                id: format!("G{}", k + 1),
                bus: rng.gen_range(1..=buses),
                p_min,
                p_max,
                ramp_up: p_max,
                ramp_down: p_max,
                min_up: rng.gen_range(1..=horizon),
                min_down: rng.gen_range(1..=horizon),
                initial_on,
                initial_periods: rng.gen_range(0..=2 * horizon),
                initial_output,
                startup_cost: rng.gen_range(50.0..600.0),
                fixed_cost: rng.gen_range(20.0..150.0),
                energy_cost: rng.gen_range(10.0..60.0) * base,
            }
        })
        .collect();
    let demands = vec![Demand {
        id: "D1".into(),
        bus: buses,
        profile: (0..horizon).map(|_| rng.gen_range(0.6..1.6)).collect(),
    }];
    let inst = SucInstance {
        network: Network {
            buses: bus_ids,
            lines,
            demands,
        },
        generators,
        wind_farms: vec![WindFarm {
            id: "W1".into(),
            bus: rng.gen_range(1..=buses),
            capacity: 1.0,
        }],
        horizon,
        shed_cost: 1500.0 * base,
        slack_cost: 1500.0 * base,
        base_mva: base,
    };
    inst.validate().expect("random instance is valid");
    inst
}
