//! XCSF baseline: interval conditions, linear computed prediction trained by
//! RLS with forgetting, accuracy-based fitness, action-set GA with
//! subsumption, and the explore/exploit training loop with teletransportation.

mod classifier;
mod config;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use classifier::{rls_step, scaled_identity, Classifier, Matrix};
pub use config::XcsConfig;

use crate::error::Result;
use crate::frozenlake::FlEnv;
use crate::mdp::{Action, Decision, Environment, Policy, State, STATE_DIM};
use crate::ppl::st::augment;
use crate::rng::RngStream;
use crate::rule::{Bounds, UbrCondition};

/// Per-action system prediction; `None` where no classifier advocates the action.
pub type PredictionArray = [Option<f64>; Action::COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Explore,
    Exploit,
}

#[derive(Debug, Clone)]
struct PreviousStep {
    state: State,
    reward: f64,
    action_set: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Episode {
    state: State,
    mode: Mode,
    steps: usize,
    previous: Option<PreviousStep>,
}

/// Outcome of one training time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub ga_invocations: u64,
    pub episode_ended: bool,
}

#[derive(Debug, Clone)]
pub struct Xcs {
    cfg: XcsConfig,
    bounds: Bounds,
    gamma: f64,
    noise_tracking: bool,
    population: Vec<Classifier>,
    time: u64,
    ga_invocations: u64,
    next_id: u64,
    episode: Option<Episode>,
}

impl Xcs {
    pub fn new(cfg: XcsConfig, env: &FlEnv) -> Result<Self> {
        cfg.validate()?;
        let noise_tracking = cfg.noise_tracking.unwrap_or(!env.is_deterministic());
        Ok(Self {
            bounds: Bounds::grid(env.size()),
            gamma: env.gamma(),
            noise_tracking,
            cfg,
            population: Vec::new(),
            time: 0,
            ga_invocations: 0,
            next_id: 0,
            episode: None,
        })
    }

    pub fn config(&self) -> &XcsConfig {
        &self.cfg
    }

    pub fn population(&self) -> &[Classifier] {
        &self.population
    }

    /// Replaces the population (snapshot restore, tests).
    pub fn set_population(&mut self, mut population: Vec<Classifier>) {
        population.sort_by_key(|c| c.id);
        self.next_id = population.iter().map(|c| c.id + 1).max().unwrap_or(0);
        self.population = population;
    }

    pub fn numerosity_sum(&self) -> u64 {
        self.population.iter().map(|c| u64::from(c.numerosity)).sum()
    }

    /// Number of GA events (one breeding of two children each) so far.
    pub fn ga_invocation_count(&self) -> u64 {
        self.ga_invocations
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    fn x(&self, s: State) -> [f64; 3] {
        augment(s, self.cfg.x0)
    }

    /// Indices of classifiers matching `s`; no covering.
    pub fn match_set(&self, s: State) -> Vec<usize> {
        (0..self.population.len())
            .filter(|&i| self.population[i].matches(s))
            .collect()
    }

    /// Match set for `s`, covering every action that has no matching classifier.
    pub fn match_set_with_covering(&mut self, s: State, rng: &mut RngStream) -> Vec<usize> {
        loop {
            let m = self.match_set(s);
            let mut present = [false; Action::COUNT];
            for &i in &m {
                present[self.population[i].action.index()] = true;
            }
            let missing: Vec<Action> = Action::ALL.into_iter().filter(|a| !present[a.index()]).collect();
            if missing.is_empty() {
                return m;
            }
            let action = missing[rng.gen_range(0..missing.len())];
            let cl = self.covering_classifier(s, action, rng);
            self.population.push(cl);
            self.enforce_population_bound(rng);
        }
    }

    fn covering_classifier(&mut self, s: State, action: Action, rng: &mut RngStream) -> Classifier {
        let mut alleles = [[0; 2]; STATE_DIM];
        for (d, (pair, &v)) in alleles.iter_mut().zip(s.coords().iter()).enumerate() {
            let lo = v - rng.gen_range(0..=self.cfg.r0);
            let hi = v + rng.gen_range(0..=self.cfg.r0);
            *pair = [self.bounds.clamp(d, lo), self.bounds.clamp(d, hi)];
        }
        let id = self.fresh_id();
        Classifier {
            id,
            condition: UbrCondition::new(alleles),
            action,
            weights: [0.0; 3],
            rls: scaled_identity(self.cfg.delta_rls),
            error: self.cfg.epsilon_i,
            noise: self.cfg.mu_i,
            fitness: self.cfg.fitness_i,
            numerosity: 1,
            experience: 0,
            action_set_size: 1.0,
            timestamp: self.time,
        }
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Fitness-weighted mean prediction per action over `match_set`.
    pub fn prediction_array(&self, match_set: &[usize], s: State) -> PredictionArray {
        prediction_array(match_set.iter().map(|&i| &self.population[i]), s, self.cfg.x0)
    }

    /// Greedy testing policy over the frozen population (no covering, no learning).
    pub fn greedy_policy(&self) -> GreedyXcsPolicy<'_> {
        GreedyXcsPolicy { xcs: self }
    }

    pub fn greedy_decision(&self, s: State) -> Decision {
        let m = self.match_set(s);
        argmax(&self.prediction_array(&m, s))
    }

    /// Advances training by one time step. A new episode starts (random mode,
    /// random initial state) whenever the previous one has ended.
    pub fn train_step(&mut self, env: &FlEnv, rng: &mut RngStream) -> StepReport {
        let ga_before = self.ga_invocations;
        let mut ep = match self.episode.take() {
            Some(ep) => ep,
            None => {
                let starts = env.initial_states();
                Episode {
                    state: starts[rng.gen_range(0..starts.len())],
                    mode: if rng.gen_bool(0.5) {
                        Mode::Explore
                    } else {
                        Mode::Exploit
                    },
                    steps: 0,
                    previous: None,
                }
            }
        };
        let s = ep.state;
        let m = self.match_set_with_covering(s, rng);
        let pa = self.prediction_array(&m, s);
        let action = match ep.mode {
            Mode::Explore if rng.gen_bool(self.cfg.explore_eps) => {
                let options: Vec<Action> = Action::ALL.into_iter().filter(|a| pa[a.index()].is_some()).collect();
                options[rng.gen_range(0..options.len())]
            }
            _ => argmax(&pa).action().expect("covering guarantees a non-empty match set"),
        };
        let action_set: Vec<u64> = m
            .iter()
            .map(|&i| &self.population[i])
            .filter(|c| c.action == action)
            .map(|c| c.id)
            .collect();

        if let Some(prev) = ep.previous.take() {
            let max_q = pa.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            let payoff = prev.reward + self.gamma * max_q;
            self.update_set(&prev.action_set, prev.state, payoff);
            self.run_ga(&prev.action_set, rng);
        }

        let t = env.step(s, action, rng);
        ep.steps += 1;
        self.time += 1;
        let mut ended = true;
        if t.terminal {
            self.update_set(&action_set, s, t.reward);
            self.run_ga(&action_set, rng);
        } else if ep.steps < env.t_max() {
            ep.previous = Some(PreviousStep {
                state: s,
                reward: t.reward,
                action_set,
            });
            ep.state = t.next;
            self.episode = Some(ep);
            ended = false;
        }
        StepReport {
            ga_invocations: self.ga_invocations - ga_before,
            episode_ended: ended,
        }
    }

    fn resolve(&self, ids: &[u64]) -> Vec<usize> {
        // ids are pushed in population order, which never reorders
        // survivors, so a merge walk suffices.
        let mut out = Vec::with_capacity(ids.len());
        let mut k = 0;
        for (i, c) in self.population.iter().enumerate() {
            while k < ids.len() && ids[k] < c.id {
                k += 1;
            }
            if k < ids.len() && ids[k] == c.id {
                out.push(i);
            }
        }
        out
    }

    /// Reinforcement of an action set towards `payoff`.
    fn update_set(&mut self, ids: &[u64], s: State, payoff: f64) {
        let set = self.resolve(ids);
        if set.is_empty() {
            return;
        }
        let x = self.x(s);
        let num_sum: f64 = set.iter().map(|&i| f64::from(self.population[i].numerosity)).sum();
        let cfg = &self.cfg;
        for &i in &set {
            let cl = &mut self.population[i];
            cl.experience += 1;
            let abs_err = (payoff - cl.predict(&x)).abs();
            let target_err = if self.noise_tracking {
                cl.noise += cfg.beta_epsilon * (abs_err - cl.noise);
                (abs_err - cl.noise).max(0.0)
            } else {
                abs_err
            };
            let exp = cl.experience as f64;
            if exp < 1.0 / cfg.beta {
                cl.error += (target_err - cl.error) / exp;
                cl.action_set_size += (num_sum - cl.action_set_size) / exp;
            } else {
                cl.error += cfg.beta * (target_err - cl.error);
                cl.action_set_size += cfg.beta * (num_sum - cl.action_set_size);
            }
            cl.rls_update(&x, payoff, cfg.lambda_rls, cfg.delta_rls);
        }
        self.update_fitness(&set);
    }

    fn update_fitness(&mut self, set: &[usize]) {
        let cfg = &self.cfg;
        let kappa: Vec<f64> = set
            .iter()
            .map(|&i| {
                let e = self.population[i].error;
                if e < cfg.epsilon_0 {
                    1.0
                } else {
                    cfg.alpha * (e / cfg.epsilon_0).powf(-cfg.nu)
                }
            })
            .collect();
        let acc_sum: f64 = set
            .iter()
            .zip(&kappa)
            .map(|(&i, k)| k * f64::from(self.population[i].numerosity))
            .sum();
        if acc_sum <= 0.0 {
            return;
        }
        for (&i, k) in set.iter().zip(&kappa) {
            let cl = &mut self.population[i];
            let rel = k * f64::from(cl.numerosity) / acc_sum;
            cl.fitness += cfg.beta * (rel - cl.fitness);
        }
    }

    /// Runs the GA in the action set if its mean time stamp lags by more than θ_GA.
    fn run_ga(&mut self, ids: &[u64], rng: &mut RngStream) {
        let set = self.resolve(ids);
        if set.is_empty() {
            return;
        }
        let num_sum: f64 = set.iter().map(|&i| f64::from(self.population[i].numerosity)).sum();
        let ts_mean: f64 = set
            .iter()
            .map(|&i| self.population[i].timestamp as f64 * f64::from(self.population[i].numerosity))
            .sum::<f64>()
            / num_sum;
        if (self.time as f64) - ts_mean <= self.cfg.theta_ga as f64 {
            return;
        }
        for &i in &set {
            self.population[i].timestamp = self.time;
        }
        self.ga_invocations += 1;

        let p1 = self.select_parent(&set, rng);
        let p2 = self.select_parent(&set, rng);
        let mut c1 = self.offspring_of(p1);
        let mut c2 = self.offspring_of(p2);
        if rng.gen_bool(self.cfg.chi) {
            crossover_conditions(&mut c1.condition, &mut c2.condition, rng);
            let error = (c1.error + c2.error) / 2.0;
            let fitness = (c1.fitness + c2.fitness) / 2.0;
            let mut weights = [0.0; 3];
            for (w, (a, b)) in weights.iter_mut().zip(c1.weights.iter().zip(&c2.weights)) {
                *w = (a + b) / 2.0;
            }
            for c in [&mut c1, &mut c2] {
                c.error = error;
                c.fitness = fitness;
                c.weights = weights;
            }
        }
        for c in [&mut c1, &mut c2] {
            c.fitness *= 0.1;
            self.mutate(c, rng);
        }
        let parents = [self.population[p1].id, self.population[p2].id];
        for child in [c1, c2] {
            self.insert_offspring(child, &parents);
        }
        self.enforce_population_bound(rng);
    }

    /// Tournament on a `tau` fraction of the action set's microclassifiers,
    /// won by the highest microclassifier fitness.
    fn select_parent(&self, set: &[usize], rng: &mut RngStream) -> usize {
        let total: u32 = set.iter().map(|&i| self.population[i].numerosity).sum();
        let size = ((self.cfg.tau * f64::from(total)).round() as u32).max(1);
        let mut best: Option<usize> = None;
        for _ in 0..size {
            let mut pick = rng.gen_range(0..total);
            let mut chosen = set[0];
            for &i in set {
                let n = self.population[i].numerosity;
                if pick < n {
                    chosen = i;
                    break;
                }
                pick -= n;
            }
            let better =
                best.is_none_or(|b| self.population[chosen].micro_fitness() > self.population[b].micro_fitness());
            if better {
                best = Some(chosen);
            }
        }
        best.expect("tournament size is at least one")
    }

    fn offspring_of(&mut self, parent: usize) -> Classifier {
        let id = self.fresh_id();
        let p = &self.population[parent];
        Classifier {
            id,
            condition: p.condition,
            action: p.action,
            weights: p.weights,
            rls: scaled_identity(self.cfg.delta_rls),
            error: p.error,
            noise: p.noise,
            fitness: p.micro_fitness(),
            numerosity: 1,
            experience: 0,
            action_set_size: p.action_set_size,
            timestamp: self.time,
        }
    }

    /// Interval alleles shift by a uniform integer in `[-m0, m0]`, clamped;
    /// the action changes to a different one.
    fn mutate(&self, cl: &mut Classifier, rng: &mut RngStream) {
        for (d, pair) in cl.condition.alleles.iter_mut().enumerate() {
            for allele in pair.iter_mut() {
                if rng.gen_bool(self.cfg.mu_mut) {
                    let shift = rng.gen_range(-self.cfg.m0..=self.cfg.m0);
                    *allele = self.bounds.clamp(d, *allele + shift);
                }
            }
        }
        if rng.gen_bool(self.cfg.mu_mut) {
            cl.action = crate::rule::other_action(cl.action, rng);
        }
    }

    fn could_subsume(&self, cl: &Classifier) -> bool {
        cl.experience > self.cfg.theta_sub && cl.error < self.cfg.epsilon_0
    }

    fn insert_offspring(&mut self, child: Classifier, parents: &[u64; 2]) {
        for pid in parents {
            if let Some(p) = self.population.iter().position(|c| c.id == *pid) {
                let parent = &self.population[p];
                if parent.action == child.action
                    && self.could_subsume(parent)
                    && parent.condition.is_more_general_or_equal(&child.condition)
                {
                    self.population[p].numerosity += 1;
                    return;
                }
            }
        }
        self.insert(child);
    }

    /// Adds a classifier, merging into an existing macroclassifier with the
    /// same condition and action.
    fn insert(&mut self, cl: Classifier) {
        let key = cl.condition.canonical();
        if let Some(existing) = self
            .population
            .iter_mut()
            .find(|c| c.action == cl.action && c.condition.canonical() == key)
        {
            existing.numerosity += cl.numerosity;
        } else {
            self.population.push(cl);
        }
    }

    fn enforce_population_bound(&mut self, rng: &mut RngStream) {
        while self.numerosity_sum() > self.cfg.n as u64 {
            self.delete_one(rng);
        }
    }

    /// Roulette deletion proportional to action-set size estimate times
    /// numerosity, boosted for experienced low-fitness classifiers.
    fn delete_one(&mut self, rng: &mut RngStream) {
        let num_sum = self.numerosity_sum() as f64;
        let mean_fitness = self.population.iter().map(|c| c.fitness).sum::<f64>() / num_sum;
        let votes: Vec<f64> = self
            .population
            .iter()
            .map(|c| {
                let mut v = c.action_set_size * f64::from(c.numerosity);
                let f = c.micro_fitness();
                if c.experience > self.cfg.theta_del && f > 0.0 && f < self.cfg.delta * mean_fitness {
                    v *= mean_fitness / f;
                }
                v
            })
            .collect();
        let total: f64 = votes.iter().sum();
        let mut point = rng.gen::<f64>() * total;
        let mut victim = votes.len() - 1;
        for (i, v) in votes.iter().enumerate() {
            if point < *v {
                victim = i;
                break;
            }
            point -= v;
        }
        if self.population[victim].numerosity > 1 {
            self.population[victim].numerosity -= 1;
        } else {
            self.population.remove(victim);
        }
    }
}

/// Uniform crossover over the interval alleles.
fn crossover_conditions(a: &mut UbrCondition, b: &mut UbrCondition, rng: &mut RngStream) {
    for (pa, pb) in a.alleles.iter_mut().zip(b.alleles.iter_mut()) {
        for (xa, xb) in pa.iter_mut().zip(pb.iter_mut()) {
            if rng.gen_bool(0.5) {
                std::mem::swap(xa, xb);
            }
        }
    }
}

/// `Q(s, a) = sum f * p(s) / sum f` over the classifiers advocating `a`.
pub fn prediction_array<'a, I>(classifiers: I, s: State, x0: f64) -> PredictionArray
where
    I: IntoIterator<Item = &'a Classifier>,
{
    let x = augment(s, x0);
    let mut num = [0.0; Action::COUNT];
    let mut den = [0.0; Action::COUNT];
    for c in classifiers {
        let a = c.action.index();
        num[a] += c.fitness * c.predict(&x);
        den[a] += c.fitness;
    }
    let mut pa = [None; Action::COUNT];
    for a in 0..Action::COUNT {
        if den[a] > 0.0 {
            pa[a] = Some(num[a] / den[a]);
        }
    }
    pa
}

/// Highest-valued action, ties to the lowest id; `Null` if the array is empty.
pub fn argmax(pa: &PredictionArray) -> Decision {
    let mut best: Option<(Action, f64)> = None;
    for (a, v) in Action::ALL.iter().zip(pa) {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((*a, v));
            }
        }
    }
    best.map_or(Decision::Null, |(a, _)| Decision::Act(a))
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyXcsPolicy<'a> {
    xcs: &'a Xcs,
}

impl Policy for GreedyXcsPolicy<'_> {
    fn decide(&self, state: State) -> Decision {
        self.xcs.greedy_decision(state)
    }
}

#[cfg(test)]
mod tests;
