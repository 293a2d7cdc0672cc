//! Generational GA over fixed-length rulesets.

use rand::Rng;

use crate::error::Result;
use crate::frozenlake::FlEnv;
use crate::mdp::{evaluate_performance, State};
use crate::rng::RngStream;
use crate::rule::MutationScheme;

use super::config::GaConfig;
use super::individual::{crossover, Individual, PplRule};

/// A PPL population with its GA bookkeeping.
#[derive(Debug, Clone)]
pub struct Population<R> {
    pub individuals: Vec<Individual<R>>,
    /// Breeding rounds performed since initialisation.
    pub ga_invocations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationReport {
    pub best_performance: f64,
    pub breeding_rounds: u64,
}

impl<R: PplRule> Population<R> {
    /// Random initial population, reinforced (ST) and evaluated on `z`.
    pub fn initialise(env: &FlEnv, cfg: &GaConfig, z: &[State], rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let scheme = MutationScheme::for_grid(env.size())?;
        let mut individuals: Vec<Individual<R>> = (0..cfg.pop_size)
            .map(|_| Individual::random(cfg, &scheme, rng))
            .collect();
        for idv in &mut individuals {
            evaluate(idv, env, cfg, z, rng)?;
        }
        Ok(Self {
            individuals,
            ga_invocations: 0,
        })
    }

    pub fn from_individuals(individuals: Vec<Individual<R>>) -> Self {
        Self {
            individuals,
            ga_invocations: 0,
        }
    }

    pub fn best(&self) -> Option<&Individual<R>> {
        self.individuals.iter().reduce(|best, idv| {
            if idv.fitness_or_zero() > best.fitness_or_zero() {
                idv
            } else {
                best
            }
        })
    }

    pub fn best_performance(&self) -> f64 {
        self.best().map_or(0.0, Individual::fitness_or_zero)
    }

    /// One generation: `pop_size / 2` breeding rounds, full generational
    /// replacement, then reinforcement and evaluation of every offspring.
    pub fn run_generation(
        &mut self,
        env: &FlEnv,
        cfg: &GaConfig,
        z: &[State],
        rng: &mut RngStream,
    ) -> Result<GenerationReport> {
        let scheme = MutationScheme::for_grid(env.size())?;
        let rounds = cfg.pop_size / 2;
        let mut offspring = Vec::with_capacity(cfg.pop_size);
        for _ in 0..rounds {
            let a = tournament(&self.individuals, cfg.tourn_size, rng);
            let b = tournament(&self.individuals, cfg.tourn_size, rng);
            let (mut ca, mut cb) = if rng.gen_bool(cfg.p_cross) {
                crossover(&self.individuals[a], &self.individuals[b], rng)
            } else {
                (
                    Individual::new(self.individuals[a].rules.clone()),
                    Individual::new(self.individuals[b].rules.clone()),
                )
            };
            ca.mutate(cfg.p_mut, &scheme, rng);
            cb.mutate(cfg.p_mut, &scheme, rng);
            offspring.push(ca);
            offspring.push(cb);
            self.ga_invocations += 1;
        }
        for idv in &mut offspring {
            evaluate(idv, env, cfg, z, rng)?;
        }
        self.individuals = offspring;
        Ok(GenerationReport {
            best_performance: self.best_performance(),
            breeding_rounds: rounds as u64,
        })
    }
}

/// Reinforces (ST) and then scores an individual on the test sequence.
pub fn evaluate<R: PplRule>(
    idv: &mut Individual<R>,
    env: &FlEnv,
    cfg: &GaConfig,
    z: &[State],
    rng: &mut RngStream,
) -> Result<f64> {
    R::prepare(idv, env, cfg, rng);
    let perf = evaluate_performance(env, &idv.policy(cfg.x0), z, rng)?;
    idv.fitness = Some(perf);
    Ok(perf)
}

/// Index of the fittest of `size` uniformly drawn entrants (with replacement);
/// ties go to the earliest drawn.
pub fn tournament<R>(pop: &[Individual<R>], size: usize, rng: &mut RngStream) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..size {
        let c = rng.gen_range(0..pop.len());
        if pop[c].fitness.unwrap_or(0.0) > pop[best].fitness.unwrap_or(0.0) {
            best = c;
        }
    }
    best
}
