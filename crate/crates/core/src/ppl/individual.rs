use crate::frozenlake::FlEnv;
use crate::mdp::{Decision, Policy, State};
use crate::rng::RngStream;
use crate::rule::{HasGene, MutationScheme, RuleGene};

use super::config::{GaConfig, Variant};

/// Rule types a Pittsburgh ruleset can be built from.
pub trait PplRule: HasGene + Clone + Send + Sync {
    const VARIANT: Variant;

    /// A fresh rule with default learned parameters.
    fn from_gene(gene: RuleGene) -> Self;

    fn infer(rules: &[Self], s: State, x0: f64) -> Decision;

    /// Variant-specific uniform crossover, in place.
    fn crossover(a: &mut [Self], b: &mut [Self], rng: &mut RngStream);

    /// Learning performed right before fitness evaluation.
    fn prepare(_idv: &mut Individual<Self>, _env: &FlEnv, _cfg: &GaConfig, _rng: &mut RngStream) {}
}

/// A fixed-length ruleset together with its last evaluated fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual<R> {
    pub rules: Vec<R>,
    pub fitness: Option<f64>,
}

impl<R: PplRule> Individual<R> {
    pub fn new(rules: Vec<R>) -> Self {
        Self { rules, fitness: None }
    }

    pub fn random(cfg: &GaConfig, scheme: &MutationScheme, rng: &mut RngStream) -> Self {
        let rules = (0..cfg.idv_size)
            .map(|_| R::from_gene(crate::rule::random_rule(&scheme.bounds, rng)))
            .collect();
        Self::new(rules)
    }

    pub fn decide(&self, s: State, x0: f64) -> Decision {
        R::infer(&self.rules, s, x0)
    }

    pub fn policy(&self, x0: f64) -> RulesetPolicy<'_, R> {
        RulesetPolicy { rules: &self.rules, x0 }
    }

    pub fn mutate(&mut self, p_mut: f64, scheme: &MutationScheme, rng: &mut RngStream) {
        for r in &mut self.rules {
            crate::rule::mutate_in_place(r.gene_mut(), p_mut, scheme, rng);
        }
    }

    pub fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

/// Borrowed view of a ruleset usable as a [`Policy`].
#[derive(Debug, Clone, Copy)]
pub struct RulesetPolicy<'a, R> {
    rules: &'a [R],
    x0: f64,
}

impl<R: PplRule> Policy for RulesetPolicy<'_, R> {
    fn decide(&self, state: State) -> Decision {
        R::infer(self.rules, state, self.x0)
    }
}

/// Uniform crossover of two equal-length rulesets; returns the two children.
pub fn crossover<R: PplRule>(
    a: &Individual<R>,
    b: &Individual<R>,
    rng: &mut RngStream,
) -> (Individual<R>, Individual<R>) {
    assert_eq!(a.rules.len(), b.rules.len(), "crossover parents differ in length");
    let mut ca = Individual::new(a.rules.clone());
    let mut cb = Individual::new(b.rules.clone());
    R::crossover(&mut ca.rules, &mut cb.rules, rng);
    (ca, cb)
}
