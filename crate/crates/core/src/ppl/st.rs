//! Strength-based rulesets: linear payoff prediction per rule, variance
//! tracking, Monte-Carlo reinforcement and double-max inference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frozenlake::FlEnv;
use crate::mdp::{Action, Decision, Environment, State, STATE_DIM};
use crate::rng::RngStream;
use crate::rule::{build_action_sets, HasGene, RuleGene};

use super::config::{GaConfig, Variant};
use super::individual::{Individual, PplRule};

pub const INPUT_DIM: usize = STATE_DIM + 1;

/// `[x0, s_1, ..., s_d]`.
pub fn augment(s: State, x0: f64) -> [f64; INPUT_DIM] {
    let c = s.coords();
    [x0, f64::from(c[0]), f64::from(c[1])]
}

fn dot(a: &[f64; INPUT_DIM], b: &[f64; INPUT_DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StRule {
    pub gene: RuleGene,
    pub weights: [f64; INPUT_DIM],
    pub variance: f64,
}

impl StRule {
    pub fn new(gene: RuleGene) -> Self {
        Self {
            gene,
            weights: [0.0; INPUT_DIM],
            variance: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64; INPUT_DIM]) -> f64 {
        dot(&self.weights, x)
    }

    /// Prediction minus one standard deviation of the payoff estimate.
    pub fn strength(&self, s: State, x0: f64) -> f64 {
        self.strength_at(&augment(s, x0))
    }

    fn strength_at(&self, x: &[f64; INPUT_DIM]) -> f64 {
        self.predict(x) - self.variance.sqrt()
    }

    /// NLMS step towards `payoff`, then the variance update using the
    /// post-update prediction.
    pub fn update(&mut self, payoff: f64, x: &[f64; INPUT_DIM], eta: f64) {
        let err = payoff - self.predict(x);
        let scale = eta / dot(x, x) * err;
        for (w, xi) in self.weights.iter_mut().zip(x) {
            *w += scale * xi;
        }
        let residual = self.predict(x) - payoff;
        self.variance = (1.0 - eta) * self.variance + eta * residual * residual;
    }
}

impl HasGene for StRule {
    fn gene(&self) -> &RuleGene {
        &self.gene
    }

    fn gene_mut(&mut self) -> &mut RuleGene {
        &mut self.gene
    }
}

/// Double max: each action is advocated by the strongest rule of its action
/// set, then the strongest advocated action wins (ties to the lowest id).
pub fn infer_st(rules: &[StRule], s: State, x0: f64) -> Decision {
    let x = augment(s, x0);
    let mut best: [Option<f64>; Action::COUNT] = [None; Action::COUNT];
    for r in rules.iter().filter(|r| r.gene.matches(s)) {
        let slot = &mut best[r.gene.action.index()];
        let st = r.strength_at(&x);
        if slot.is_none_or(|b| st > b) {
            *slot = Some(st);
        }
    }
    pick_action(&best)
}

fn pick_action(advocated: &[Option<f64>; Action::COUNT]) -> Decision {
    let mut choice: Option<(Action, f64)> = None;
    for (a, st) in Action::ALL.iter().zip(advocated) {
        if let Some(st) = *st {
            if choice.is_none_or(|(_, b)| st > b) {
                choice = Some((*a, st));
            }
        }
    }
    choice.map_or(Decision::Null, |(a, _)| Decision::Act(a))
}

/// Applies the NLMS/variance update to every rule of `action_set`.
pub fn update_action_set(rules: &mut [StRule], action_set: &[usize], payoff: f64, s: State, eta: f64, x0: f64) {
    let x = augment(s, x0);
    for &i in action_set {
        rules[i].update(payoff, &x, eta);
    }
}

/// Payoff credited to each step of a trajectory, in the order the backward
/// pass produces them (last step first). Step `i` of `T` receives
/// `gamma^(T-1-i) * sum_{k>=i} r_k`.
pub fn backward_payoffs(rewards: &[f64], gamma: f64) -> Vec<(usize, f64)> {
    let t = rewards.len();
    let mut out = Vec::with_capacity(t);
    let mut r_sum = 0.0;
    let mut discount = 1.0;
    for i in (0..t).rev() {
        r_sum += rewards[i];
        // discount == gamma^(T-1-i)
        out.push((i, discount * r_sum));
        discount *= gamma;
    }
    out
}

#[derive(Debug, Clone)]
struct ReinfStep {
    state: State,
    action_set: Vec<usize>,
    reward: f64,
}

/// Rolls the ruleset out from `start`, recording the action set behind each
/// chosen action. Stops at a terminal cell, at `t_max`, or on a null decision.
fn gen_trajectory(rules: &[StRule], env: &FlEnv, start: State, x0: f64, rng: &mut RngStream) -> Vec<ReinfStep> {
    let mut steps = Vec::new();
    let mut s = start;
    for _ in 0..env.t_max() {
        let mut sets = build_action_sets(rules, s);
        let x = augment(s, x0);
        let mut advocated = [None; Action::COUNT];
        for (slot, set) in advocated.iter_mut().zip(&sets) {
            *slot = set
                .iter()
                .map(|&i| rules[i].strength_at(&x))
                .fold(None, |m: Option<f64>, v| {
                    Some(m.map_or(v, |m| if v > m { v } else { m }))
                });
        }
        let Decision::Act(a) = pick_action(&advocated) else {
            break;
        };
        let t = env.step(s, a, rng);
        steps.push(ReinfStep {
            state: s,
            action_set: std::mem::take(&mut sets[a.index()]),
            reward: t.reward,
        });
        if t.terminal {
            break;
        }
        s = t.next;
    }
    steps
}

/// Monte-Carlo reinforcement of rule payoff estimates from
/// `cfg.num_reinf_rollouts` trajectories with random starts.
pub fn reinforce_rules(idv: &mut Individual<StRule>, env: &FlEnv, cfg: &GaConfig, rng: &mut RngStream) {
    let starts = env.initial_states();
    for _ in 0..cfg.num_reinf_rollouts {
        let start = starts[rng.gen_range(0..starts.len())];
        let traj = gen_trajectory(&idv.rules, env, start, cfg.x0, rng);
        let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
        for (i, payoff) in backward_payoffs(&rewards, env.gamma()) {
            let step = &traj[i];
            update_action_set(&mut idv.rules, &step.action_set, payoff, step.state, cfg.eta, cfg.x0);
        }
    }
}

impl PplRule for StRule {
    const VARIANT: Variant = Variant::St;

    fn from_gene(gene: RuleGene) -> Self {
        StRule::new(gene)
    }

    fn infer(rules: &[Self], s: State, x0: f64) -> Decision {
        infer_st(rules, s, x0)
    }

    /// Whole rules (with their learned parameters) are exchanged.
    fn crossover(a: &mut [Self], b: &mut [Self], rng: &mut RngStream) {
        for (ra, rb) in a.iter_mut().zip(b.iter_mut()) {
            if rng.gen_bool(0.5) {
                std::mem::swap(ra, rb);
            }
        }
    }

    fn prepare(idv: &mut Individual<Self>, env: &FlEnv, cfg: &GaConfig, rng: &mut RngStream) {
        reinforce_rules(idv, env, cfg, rng);
    }
}
