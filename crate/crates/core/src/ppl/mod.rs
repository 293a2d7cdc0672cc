//! Pittsburgh policy learners: a canonical generational GA over fixed-length
//! rulesets, with decision-list (DL) and strength-based (ST) inference.

mod config;
pub mod dl;
pub mod ga;
mod individual;
pub mod st;

pub use config::{GaConfig, Variant};
pub use dl::infer_dl;
pub use ga::{GenerationReport, Population};
pub use individual::{crossover, Individual, PplRule, RulesetPolicy};
pub use st::{backward_payoffs, infer_st, reinforce_rules, update_action_set, StRule};
