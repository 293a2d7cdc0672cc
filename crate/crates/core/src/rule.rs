//! Hyperrectangular rule conditions in unordered-bound form, rule genotypes
//! and the variation primitives shared by the Pittsburgh learners.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, State, STATE_DIM};
use crate::rng::RngStream;

/// One interval per state dimension, stored as an unordered allele pair.
/// The pair `(p, q)` covers `[min(p, q), max(p, q)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UbrCondition {
    pub alleles: [[i32; 2]; STATE_DIM],
}

impl UbrCondition {
    pub fn new(alleles: [[i32; 2]; STATE_DIM]) -> Self {
        Self { alleles }
    }

    pub fn lower(&self, dim: usize) -> i32 {
        let [p, q] = self.alleles[dim];
        p.min(q)
    }

    pub fn upper(&self, dim: usize) -> i32 {
        let [p, q] = self.alleles[dim];
        p.max(q)
    }

    #[inline]
    pub fn matches(&self, s: State) -> bool {
        s.coords()
            .iter()
            .enumerate()
            .all(|(d, &v)| self.lower(d) <= v && v <= self.upper(d))
    }

    /// True when every interval of `self` encloses the matching interval of `other`.
    pub fn is_more_general_or_equal(&self, other: &UbrCondition) -> bool {
        (0..STATE_DIM).all(|d| self.lower(d) <= other.lower(d) && other.upper(d) <= self.upper(d))
    }

    /// Canonical (ordered) form; two conditions match the same states iff their
    /// canonical forms are equal.
    pub fn canonical(&self) -> UbrCondition {
        let mut alleles = self.alleles;
        for pair in &mut alleles {
            pair.sort_unstable();
        }
        UbrCondition { alleles }
    }

    /// Number of states covered.
    pub fn volume(&self) -> i64 {
        (0..STATE_DIM)
            .map(|d| i64::from(self.upper(d) - self.lower(d) + 1))
            .product()
    }
}

/// Per-dimension allele range `[0, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max: [i32; STATE_DIM],
}

impl Bounds {
    /// Bounds of a square grid of side `size`.
    pub fn grid(size: usize) -> Self {
        Self {
            max: [size as i32 - 1; STATE_DIM],
        }
    }

    pub fn width(&self, dim: usize) -> usize {
        self.max[dim] as usize + 1
    }

    pub fn clamp(&self, dim: usize, v: i32) -> i32 {
        v.clamp(0, self.max[dim])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleGene {
    pub condition: UbrCondition,
    pub action: Action,
}

impl RuleGene {
    pub fn matches(&self, s: State) -> bool {
        self.condition.matches(s)
    }
}

/// Gives generic code access to the genotype inside richer rule types.
pub trait HasGene {
    fn gene(&self) -> &RuleGene;
    fn gene_mut(&mut self) -> &mut RuleGene;
}

impl HasGene for RuleGene {
    fn gene(&self) -> &RuleGene {
        self
    }

    fn gene_mut(&mut self) -> &mut RuleGene {
        self
    }
}

/// Success probability of a geometric variable on `{1, 2, ...}` that puts at
/// least 99% of its mass on `[1, floor(w / 2)]`: `1 - 0.01^(1 / floor(w / 2))`.
pub fn geometric_param(width: usize) -> Result<f64> {
    if width < 2 {
        return Err(Error::Config(format!(
            "dimension width must be at least 2, got {width}"
        )));
    }
    let k = (width / 2) as f64;
    Ok(1.0 - 0.01f64.powf(1.0 / k))
}

/// Draws mutation magnitudes from a geometric distribution supported on integers `>= 1`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricMutator {
    p: f64,
    failures: Geometric,
}

impl GeometricMutator {
    pub fn for_width(width: usize) -> Result<Self> {
        let p = geometric_param(width)?;
        Ok(Self {
            p,
            failures: Geometric::new(p).map_err(|e| Error::Config(e.to_string()))?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sample_magnitude(&self, rng: &mut RngStream) -> i32 {
        // rand_distr counts failures before the first success (support 0..).
        let k = self.failures.sample(rng);
        i32::try_from(k.saturating_add(1)).unwrap_or(i32::MAX)
    }

    /// Signed noise `±Geo(p)` with an equiprobable sign.
    pub fn sample_noise(&self, rng: &mut RngStream) -> i32 {
        let m = self.sample_magnitude(rng);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    }
}

/// Per-dimension mutators plus the allele bounds they clamp to.
#[derive(Debug, Clone, Copy)]
pub struct MutationScheme {
    pub bounds: Bounds,
    pub mutators: [GeometricMutator; STATE_DIM],
}

impl MutationScheme {
    pub fn new(bounds: Bounds) -> Result<Self> {
        let mut mutators = [GeometricMutator::for_width(bounds.width(0))?; STATE_DIM];
        for (d, m) in mutators.iter_mut().enumerate().skip(1) {
            *m = GeometricMutator::for_width(bounds.width(d))?;
        }
        Ok(Self { bounds, mutators })
    }

    pub fn for_grid(size: usize) -> Result<Self> {
        Self::new(Bounds::grid(size))
    }
}

/// Mutates each allele independently with probability `p_mut`.
pub fn mutate_rule(rule: &RuleGene, p_mut: f64, scheme: &MutationScheme, rng: &mut RngStream) -> RuleGene {
    let mut out = *rule;
    mutate_in_place(&mut out, p_mut, scheme, rng);
    out
}

pub(crate) fn mutate_in_place(rule: &mut RuleGene, p_mut: f64, scheme: &MutationScheme, rng: &mut RngStream) {
    if p_mut <= 0.0 {
        return;
    }
    for (d, pair) in rule.condition.alleles.iter_mut().enumerate() {
        for allele in pair.iter_mut() {
            if rng.gen_bool(p_mut) {
                let noise = scheme.mutators[d].sample_noise(rng);
                *allele = scheme.bounds.clamp(d, allele.saturating_add(noise));
            }
        }
    }
    if rng.gen_bool(p_mut) {
        rule.action = other_action(rule.action, rng);
    }
}

/// Uniform draw from every action except `a`.
pub fn other_action(a: Action, rng: &mut RngStream) -> Action {
    let offset = rng.gen_range(1..Action::COUNT);
    Action::ALL[(a.index() + offset) % Action::COUNT]
}

pub fn random_action(rng: &mut RngStream) -> Action {
    Action::ALL[rng.gen_range(0..Action::COUNT)]
}

/// Condition alleles uniform over their bounds, action uniform over all actions.
pub fn random_rule(bounds: &Bounds, rng: &mut RngStream) -> RuleGene {
    let mut alleles = [[0; 2]; STATE_DIM];
    for (d, pair) in alleles.iter_mut().enumerate() {
        for allele in pair.iter_mut() {
            *allele = rng.gen_range(0..=bounds.max[d]);
        }
    }
    RuleGene {
        condition: UbrCondition::new(alleles),
        action: random_action(rng),
    }
}

/// Rule indices grouped by advocated action, restricted to rules matching `s`.
pub fn build_action_sets<R: HasGene>(rules: &[R], s: State) -> [Vec<usize>; Action::COUNT] {
    let mut sets: [Vec<usize>; Action::COUNT] = Default::default();
    for (i, r) in rules.iter().enumerate() {
        let g = r.gene();
        if g.matches(s) {
            sets[g.action.index()].push(i);
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cond_x(p: i32, q: i32) -> UbrCondition {
        UbrCondition::new([[p, q], [0, 3]])
    }

    #[test]
    fn matching_examples() {
        assert!(cond_x(3, 1).matches(State::new(2, 0)));
        assert!(cond_x(1, 3).matches(State::new(2, 0)));
        assert!(!cond_x(1, 3).matches(State::new(0, 0)));
        assert!(cond_x(2, 2).matches(State::new(2, 3)));
    }

    #[test]
    fn swap_invariance_full_enumeration() {
        let m = 4;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let base = UbrCondition::new([[a, b], [c, d]]);
                        let variants = [
                            UbrCondition::new([[b, a], [c, d]]),
                            UbrCondition::new([[a, b], [d, c]]),
                            UbrCondition::new([[b, a], [d, c]]),
                        ];
                        for x in 0..m {
                            for y in 0..m {
                                let s = State::new(x, y);
                                for v in &variants {
                                    assert_eq!(base.matches(s), v.matches(s));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn geometric_param_examples() {
        assert!((geometric_param(4).unwrap() - 0.9).abs() < 1e-12);
        assert!((geometric_param(8).unwrap() - 0.683772233983162).abs() < 1e-12);
        assert!((geometric_param(12).unwrap() - 0.535841116638722).abs() < 1e-12);
        assert!(geometric_param(1).is_err());
        assert!(geometric_param(0).is_err());
    }

    #[test]
    fn geometric_param_strictly_decreasing() {
        // Strict between widths with different floor(w/2).
        let ps: Vec<f64> = (1..40).map(|k| geometric_param(2 * k).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_mutation_is_identity() {
        let scheme = MutationScheme::for_grid(8).unwrap();
        let mut rng = RngStream::new(3);
        for _ in 0..100 {
            let r = random_rule(&scheme.bounds, &mut rng);
            assert_eq!(mutate_rule(&r, 0.0, &scheme, &mut rng), r);
        }
    }

    #[test]
    fn full_mutation_always_changes_action() {
        let scheme = MutationScheme::for_grid(4).unwrap();
        let mut rng = RngStream::new(4);
        for _ in 0..1000 {
            let r = random_rule(&scheme.bounds, &mut rng);
            assert_ne!(mutate_rule(&r, 1.0, &scheme, &mut rng).action, r.action);
        }
    }

    #[test]
    fn other_action_is_uniform_over_rest() {
        let mut rng = RngStream::new(9);
        let mut counts = [0usize; 4];
        for _ in 0..30_000 {
            counts[other_action(Action::Down, &mut rng).index()] += 1;
        }
        assert_eq!(counts[Action::Down.index()], 0);
        for (i, &c) in counts.iter().enumerate() {
            if i != Action::Down.index() {
                assert!((c as f64 / 10_000.0 - 1.0).abs() < 0.05, "{counts:?}");
            }
        }
    }

    #[test]
    fn random_rules_respect_bounds_and_seed() {
        let b = Bounds::grid(4);
        let mut rng = RngStream::new(1);
        for _ in 0..1000 {
            let r = random_rule(&b, &mut rng);
            assert!(r.condition.alleles.iter().flatten().all(|&v| (0..=3).contains(&v)));
        }
        let a = random_rule(&b, &mut RngStream::new(77));
        let c = random_rule(&b, &mut RngStream::new(77));
        assert_eq!(a, c);
    }

    #[test]
    fn random_alleles_pass_chi_square() {
        // 4 equiprobable values, df = 3; critical value at alpha = 0.01 is 11.345.
        let b = Bounds::grid(4);
        let mut rng = RngStream::new(21);
        let n = 100_000;
        let mut counts = [[0f64; 4]; 4];
        let mut actions = [0f64; 4];
        for _ in 0..n {
            let r = random_rule(&b, &mut rng);
            for (slot, &v) in r.condition.alleles.iter().flatten().enumerate() {
                counts[slot][v as usize] += 1.0;
            }
            actions[r.action.index()] += 1.0;
        }
        let expected = n as f64 / 4.0;
        let chi = |c: &[f64; 4]| c.iter().map(|o| (o - expected).powi(2) / expected).sum::<f64>();
        for c in counts.iter().chain(std::iter::once(&actions)) {
            assert!(chi(c) < 11.345, "chi-square {} for {c:?}", chi(c));
        }
    }

    #[test]
    fn action_sets_examples() {
        let rules = vec![RuleGene {
            condition: UbrCondition::new([[0, 0], [0, 0]]),
            action: Action::Right,
        }];
        let sets = build_action_sets(&rules, State::new(3, 3));
        assert!(sets.iter().all(Vec::is_empty));
        let sets = build_action_sets(&rules, State::new(0, 0));
        assert_eq!(sets[2], vec![0]);
        assert!(sets[0].is_empty() && sets[1].is_empty() && sets[3].is_empty());
    }

    #[test]
    fn action_sets_match_naive_double_loop() {
        let b = Bounds::grid(4);
        let mut rng = RngStream::new(2);
        for _ in 0..1000 {
            let rules: Vec<RuleGene> = (0..7).map(|_| random_rule(&b, &mut rng)).collect();
            for y in 0..4 {
                for x in 0..4 {
                    let s = State::new(x, y);
                    let sets = build_action_sets(&rules, s);
                    for a in Action::ALL {
                        let mut naive = Vec::new();
                        for (i, r) in rules.iter().enumerate() {
                            let [[p0, q0], [p1, q1]] = r.condition.alleles;
                            let inside =
                                (p0.min(q0)..=p0.max(q0)).contains(&x) && (p1.min(q1)..=p1.max(q1)).contains(&y);
                            if inside && r.action == a {
                                naive.push(i);
                            }
                        }
                        assert_eq!(sets[a.index()], naive);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mutation_stays_in_bounds(seed in any::<u64>(), size in 2usize..16, p_mut in 0.0f64..=1.0) {
            let scheme = MutationScheme::for_grid(size).unwrap();
            let mut rng = RngStream::new(seed);
            let mut r = random_rule(&scheme.bounds, &mut rng);
            for _ in 0..50 {
                r = mutate_rule(&r, p_mut, &scheme, &mut rng);
                for (d, pair) in r.condition.alleles.iter().enumerate() {
                    for &v in pair {
                        prop_assert!((0..=scheme.bounds.max[d]).contains(&v));
                    }
                }
            }
        }

        #[test]
        fn canonical_form_preserves_matching(a in 0i32..6, b in 0i32..6, c in 0i32..6, d in 0i32..6, x in 0i32..6, y in 0i32..6) {
            let cond = UbrCondition::new([[a, b], [c, d]]);
            prop_assert_eq!(cond.matches(State::new(x, y)), cond.canonical().matches(State::new(x, y)));
        }
    }
}
