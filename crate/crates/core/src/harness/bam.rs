use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frozenlake::FlEnv;
use crate::mdp::{Action, Decision, Environment, State};
use crate::ppl::{infer_dl, infer_st};
use crate::snapshot::{Snapshot, SystemKind};
use crate::xcsf::{argmax, prediction_array};

/// Best-action-map statistics of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestActionMapStats {
    /// Row-major `M x M` grid; `None` on holes and the goal.
    pub density: Vec<Vec<Option<f64>>>,
    /// `|R|`: rules (PPL) or macroclassifiers (XCS).
    pub ruleset_size: usize,
    /// `|R_BA|`: distinct rules appearing in some state's best action set.
    pub bam_size: usize,
}

impl BestActionMapStats {
    pub fn density_at(&self, s: State) -> Option<f64> {
        self.density[s.y as usize][s.x as usize]
    }
}

/// For every non-terminal state, the rules matching it that advocate the
/// system's testing decision form the best action set.
pub fn best_action_map(snapshot: &Snapshot, env: &FlEnv) -> BestActionMapStats {
    let m = env.size();
    let mut density = vec![vec![None; m]; m];
    let mut used = BTreeSet::new();
    let dl = snapshot.dl_rules();
    let st = snapshot.st_rules();
    let cls = snapshot.classifiers();
    for &s in env.initial_states() {
        let decision = match snapshot.system {
            SystemKind::PplDl => infer_dl(&dl, s),
            SystemKind::PplSt => infer_st(&st, s, snapshot.x0),
            SystemKind::Xcs => argmax(&prediction_array(cls.iter().filter(|c| c.matches(s)), s, snapshot.x0)),
        };
        let count = match decision {
            Decision::Null => 0,
            Decision::Act(a) => {
                let members: Vec<usize> = matching(snapshot, s, a).collect();
                used.extend(members.iter().copied());
                members.len()
            }
        };
        density[s.y as usize][s.x as usize] = Some(count as f64);
    }
    BestActionMapStats {
        density,
        ruleset_size: snapshot.rules.len(),
        bam_size: used.len(),
    }
}

fn matching(snapshot: &Snapshot, s: State, a: Action) -> impl Iterator<Item = usize> + '_ {
    snapshot
        .rules
        .iter()
        .enumerate()
        .filter(move |(_, r)| r.action == a && r.condition.matches(s))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppl::StRule;
    use crate::rule::{RuleGene, UbrCondition};

    fn st(alleles: [[i32; 2]; 2], action: Action, w0: f64) -> StRule {
        StRule {
            gene: RuleGene {
                condition: UbrCondition::new(alleles),
                action,
            },
            weights: [w0, 0.0, 0.0],
            variance: 0.0,
        }
    }

    #[test]
    fn empty_snapshot_has_zero_density() {
        let env = FlEnv::standard(4, 0.0).unwrap();
        let stats = best_action_map(&Snapshot::from_st(&env, &[], 10.0), &env);
        assert_eq!(stats.bam_size, 0);
        assert_eq!(stats.ruleset_size, 0);
        for s in env.map().states() {
            let expected = if env.is_terminal(s) { None } else { Some(0.0) };
            assert_eq!(stats.density_at(s), expected);
        }
    }

    #[test]
    fn counts_rules_of_the_chosen_action_only() {
        let env = FlEnv::standard(4, 0.0).unwrap();
        let rules = vec![
            st([[0, 3], [0, 3]], Action::Down, 0.05),
            st([[0, 1], [0, 0]], Action::Down, 0.04),
            st([[0, 0], [0, 0]], Action::Right, 0.01),
            // Matches nowhere useful and never wins.
            st([[3, 3], [3, 3]], Action::Up, 0.09),
        ];
        let stats = best_action_map(&Snapshot::from_st(&env, &rules, 10.0), &env);
        assert_eq!(stats.ruleset_size, 4);
        assert_eq!(stats.density_at(State::new(0, 0)), Some(2.0));
        assert_eq!(stats.density_at(State::new(2, 0)), Some(1.0));
        assert_eq!(stats.bam_size, 2);
        assert!(stats.bam_size <= stats.ruleset_size);
    }
}
