//! Decision-list rulesets: the first matching rule decides.

use rand::Rng;

use crate::mdp::{Decision, State};
use crate::rng::RngStream;
use crate::rule::RuleGene;

use super::config::Variant;
use super::individual::PplRule;

/// Action of the lowest-index rule matching `s`, or `Null`.
pub fn infer_dl(rules: &[RuleGene], s: State) -> Decision {
    rules
        .iter()
        .find(|r| r.matches(s))
        .map_or(Decision::Null, |r| Decision::Act(r.action))
}

impl PplRule for RuleGene {
    const VARIANT: Variant = Variant::Dl;

    fn from_gene(gene: RuleGene) -> Self {
        gene
    }

    fn infer(rules: &[Self], s: State, _x0: f64) -> Decision {
        infer_dl(rules, s)
    }

    /// Per-allele uniform crossover; cut points may fall inside a rule.
    fn crossover(a: &mut [Self], b: &mut [Self], rng: &mut RngStream) {
        for (ra, rb) in a.iter_mut().zip(b.iter_mut()) {
            for (pa, pb) in ra.condition.alleles.iter_mut().zip(rb.condition.alleles.iter_mut()) {
                for (xa, xb) in pa.iter_mut().zip(pb.iter_mut()) {
                    if rng.gen_bool(0.5) {
                        std::mem::swap(xa, xb);
                    }
                }
            }
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut ra.action, &mut rb.action);
            }
        }
    }
}

/// Allele-level crossover with an explicit swap mask (one flag per allele,
/// `2 * STATE_DIM + 1` flags per rule, action last).
pub fn crossover_dl_with_mask(a: &mut [RuleGene], b: &mut [RuleGene], mask: &[bool]) {
    let per_rule = 2 * crate::mdp::STATE_DIM + 1;
    assert_eq!(mask.len(), a.len() * per_rule);
    for (i, (ra, rb)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
        let m = &mask[i * per_rule..(i + 1) * per_rule];
        let mut k = 0;
        for (pa, pb) in ra.condition.alleles.iter_mut().zip(rb.condition.alleles.iter_mut()) {
            for (xa, xb) in pa.iter_mut().zip(pb.iter_mut()) {
                if m[k] {
                    std::mem::swap(xa, xb);
                }
                k += 1;
            }
        }
        if m[k] {
            std::mem::swap(&mut ra.action, &mut rb.action);
        }
    }
}
