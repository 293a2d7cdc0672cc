//! Ground truth for an environment: value iteration over the explicit
//! transition model, the greedy optimal policy, BFS distances and the
//! optimal testing performance (OTP).

use std::collections::{BTreeMap, VecDeque};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frozenlake::{CellKind, FlEnv, GridMap};
use crate::mdp::{episode_return, Action, Decision, Environment, Policy, State};
use crate::rng::RngStream;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Action values for every cell of the grid; terminal cells hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    size: usize,
    values: Vec<[f64; Action::COUNT]>,
    /// Max-norm change of each sweep.
    pub sweep_deltas: Vec<f64>,
}

impl QTable {
    fn index(&self, s: State) -> usize {
        s.y as usize * self.size + s.x as usize
    }

    pub fn q(&self, s: State, a: Action) -> f64 {
        self.values[self.index(s)][a.index()]
    }

    pub fn row(&self, s: State) -> &[f64; Action::COUNT] {
        &self.values[self.index(s)]
    }

    pub fn v(&self, s: State) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties to the lowest id.
    pub fn greedy(&self, s: State) -> Action {
        let row = self.row(s);
        let mut best = 0;
        for a in 1..Action::COUNT {
            if row[a] > row[best] {
                best = a;
            }
        }
        Action::ALL[best]
    }

    pub fn policy(&self) -> GreedyQPolicy<'_> {
        GreedyQPolicy { table: self }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyQPolicy<'a> {
    table: &'a QTable,
}

impl Policy for GreedyQPolicy<'_> {
    fn decide(&self, s: State) -> Decision {
        Decision::Act(self.table.greedy(s))
    }
}

/// Bellman backup of `(s, a)` against `q`.
fn backup(env: &FlEnv, q: &QTable, s: State, a: Action) -> f64 {
    env.transition_model(s, a)
        .iter()
        .map(|succ| {
            let future = if succ.terminal { 0.0 } else { q.v(succ.next) };
            succ.probability * (succ.reward + env.gamma() * future)
        })
        .sum()
}

/// Value iteration until the max-norm sweep change drops to `tol`.
pub fn value_iteration(env: &FlEnv, tol: f64) -> QTable {
    assert!(tol > 0.0, "tolerance must be positive");
    let size = env.size();
    let mut q = QTable {
        size,
        values: vec![[0.0; Action::COUNT]; size * size],
        sweep_deltas: Vec::new(),
    };
    let frozen = env.initial_states().to_vec();
    // Convergence stalls for gamma = 1 with cycles; cap the sweep count.
    for _ in 0..100_000 {
        let mut next = q.values.clone();
        let mut delta: f64 = 0.0;
        for &s in &frozen {
            let i = q.index(s);
            for a in Action::ALL {
                let v = backup(env, &q, s, a);
                delta = delta.max((v - q.values[i][a.index()]).abs());
                next[i][a.index()] = v;
            }
        }
        q.values = next;
        q.sweep_deltas.push(delta);
        if delta <= tol {
            break;
        }
    }
    q
}

/// Largest `|Q(s,a) - backup(s,a)|` over all frozen cells.
pub fn bellman_residual(env: &FlEnv, q: &QTable) -> f64 {
    env.initial_states()
        .iter()
        .flat_map(|&s| Action::ALL.map(|a| (backup(env, q, s, a) - q.q(s, a)).abs()))
        .fold(0.0, f64::max)
}

/// Hole-avoiding shortest move counts from every frozen cell to the goal.
pub fn bfs_distances(map: &GridMap) -> Result<BTreeMap<State, u32>> {
    let goal = map.goal();
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::from([(goal, 0u32)]);
    let mut seen = vec![false; map.size() * map.size()];
    seen[goal.y as usize * map.size() + goal.x as usize] = true;
    while let Some((s, d)) = queue.pop_front() {
        if s != goal {
            dist.insert(s, d);
        }
        for a in Action::ALL {
            let n = map.neighbour(s, a);
            let k = n.y as usize * map.size() + n.x as usize;
            if !seen[k] && map.cell(n) == CellKind::Frozen {
                seen[k] = true;
                queue.push_back((n, d + 1));
            }
        }
    }
    let unreachable: Vec<String> = map
        .frozen_cells()
        .into_iter()
        .filter(|s| !dist.contains_key(s))
        .map(|s| s.to_string())
        .collect();
    if !unreachable.is_empty() {
        return Err(Error::Map(format!("goal unreachable from {}", unreachable.join(", "))));
    }
    Ok(dist)
}

/// Test sequence: one enumeration of the initial states for deterministic
/// environments, `repetitions` enumerations otherwise.
pub fn build_z(env: &FlEnv, repetitions: usize) -> Vec<State> {
    let reps = if env.is_deterministic() { 1 } else { repetitions.max(1) };
    let starts = env.initial_states();
    starts.iter().copied().cycle().take(starts.len() * reps).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OtpResult {
    pub otp: f64,
    /// Mean return of the optimal policy per distinct start state.
    #[serde(serialize_with = "state_value_list")]
    pub per_start_returns: BTreeMap<State, f64>,
}

#[derive(Serialize)]
struct StateValue {
    x: i32,
    y: i32,
    value: f64,
}

/// JSON object keys must be strings, so state maps are written as records.
fn state_value_list<S: Serializer>(map: &BTreeMap<State, f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(map.len()))?;
    for (s, &value) in map {
        seq.serialize_element(&StateValue { x: s.x, y: s.y, value })?;
    }
    seq.end()
}

/// Performance of the value-iteration policy on `z`. Deterministic
/// environments use the exact optimal values; stochastic ones average
/// rollouts driven by `rng`.
pub fn compute_otp(env: &FlEnv, q: &QTable, z: &[State], rng: &mut RngStream) -> Result<OtpResult> {
    if z.is_empty() {
        return Err(Error::Config("test sequence z is empty".into()));
    }
    let mut sums: BTreeMap<State, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    for &s in z {
        let g = if env.is_deterministic() {
            q.v(s)
        } else {
            episode_return(env, &q.policy(), s, rng).expect("greedy Q policy never returns null")
        };
        total += g;
        let e = sums.entry(s).or_insert((0.0, 0));
        e.0 += g;
        e.1 += 1;
    }
    Ok(OtpResult {
        otp: total / z.len() as f64,
        per_start_returns: sums.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect(),
    })
}

/// OTP estimated purely from rollouts of the optimal policy.
pub fn rollout_otp(env: &FlEnv, q: &QTable, z: &[State], rng: &mut RngStream) -> Result<f64> {
    crate::mdp::evaluate_performance(env, &q.policy(), z, rng)
}
