//! Pittsburgh (PPL-DL, PPL-ST) and Michigan (XCSF) learning classifier
//! systems, the FrozenLake environments they are benchmarked on, and the
//! epoch-based comparison harness.

pub mod config;
pub mod error;
pub mod frozenlake;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod ppl;
pub mod rng;
pub mod rule;
pub mod snapshot;
pub mod xcsf;

pub use error::{Error, Result};
pub use frozenlake::{FlEnv, GridMap};
pub use mdp::{Action, Decision, Environment, Policy, State};
pub use rng::RngStream;
pub use snapshot::{Snapshot, SystemKind};
