//! Fair-comparison engine: epochs counted in GA invocations, per-epoch
//! testing, trial drivers, statistics and best-action-map analysis.

mod bam;
mod experiment;
mod export;
mod stats;

use serde::{Deserialize, Serialize};

pub use bam::{best_action_map, BestActionMapStats};
pub use experiment::{
    env_key, env_oracle, run_experiment, trial_seed, EnvOracle, EnvResults, EnvSetup, Experiment, ExperimentResults,
};
pub use export::{
    export_results, read_final_ftp, write_bam, write_stats, ExportMeta, ExportPaths, FtpTable, Heatmap, HeatmapFile,
};
pub use stats::{compare_ftp, mann_whitney_u, mean_std, Comparison, FtpSummary, MannWhitney, Verdict, FAMILY_ALPHA};

use crate::error::{Error, Result};
use crate::frozenlake::FlEnv;
use crate::mdp::{evaluate_performance, State};
use crate::ppl::{GaConfig, Population, PplRule, StRule};
use crate::rng::RngStream;
use crate::rule::RuleGene;
use crate::snapshot::{Snapshot, SystemKind};
use crate::xcsf::{Xcs, XcsConfig};

/// Training steps after which an XCS trial that has not reached its GA
/// budget is abandoned.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// Episodes one PPL-ST generation may consume: `pop * (rollouts + |z|)`.
pub fn episodes_per_gen(pop_size: u64, num_reinf_rollouts: u64, z_len: u64) -> u64 {
    pop_size * (num_reinf_rollouts + z_len)
}

/// GA invocations in one PPL generation.
pub fn epoch_size(ppl_pop_size: usize) -> Result<u64> {
    if ppl_pop_size == 0 || !ppl_pop_size.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "population size must be even and positive, got {ppl_pop_size}"
        )));
    }
    Ok(ppl_pop_size as u64 / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub performance: f64,
    pub otp_fraction: f64,
    /// Cumulative GA invocations when the epoch was tested.
    pub ga_invocations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub system: SystemKind,
    pub trial: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub ftp: f64,
    pub bam: Option<BestActionMapStats>,
    pub snapshot: Snapshot,
}

impl TrialResult {
    fn finish(
        system: SystemKind,
        trial: usize,
        seed: u64,
        epochs: Vec<EpochRecord>,
        snapshot: Snapshot,
        env: &FlEnv,
    ) -> Self {
        let ftp = epochs.last().map_or(0.0, |e| e.otp_fraction);
        let bam = Some(best_action_map(&snapshot, env));
        Self {
            system,
            trial,
            seed,
            epochs,
            ftp,
            bam,
            snapshot,
        }
    }
}

/// Everything a trial needs besides its seed.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub env: &'a FlEnv,
    pub z: &'a [State],
    pub otp: f64,
    pub epochs: usize,
}

impl TrialSetup<'_> {
    fn record(&self, epoch: usize, performance: f64, ga_invocations: u64) -> EpochRecord {
        EpochRecord {
            epoch,
            performance,
            otp_fraction: performance / self.otp,
            ga_invocations,
        }
    }
}

/// Runs one PPL trial: the evaluated random population is not an epoch;
/// each of the following `setup.epochs` generations is.
pub fn run_ppl_trial<R: SnapshotRule>(
    setup: TrialSetup<'_>,
    cfg: &GaConfig,
    trial: usize,
    seed: u64,
) -> Result<(TrialResult, Population<R>)> {
    let mut rng = RngStream::new(seed);
    let mut pop = Population::<R>::initialise(setup.env, cfg, setup.z, &mut rng)?;
    let mut epochs = Vec::with_capacity(setup.epochs);
    for k in 1..=setup.epochs {
        let report = pop.run_generation(setup.env, cfg, setup.z, &mut rng)?;
        epochs.push(setup.record(k, report.best_performance, pop.ga_invocations));
    }
    let best = pop.best().map(|b| b.rules.clone()).unwrap_or_default();
    let snapshot = R::snapshot(setup.env, &best, cfg.x0);
    Ok((
        TrialResult::finish(R::SYSTEM, trial, seed, epochs, snapshot, setup.env),
        pop,
    ))
}

/// Snapshot support for the two PPL rule kinds.
pub trait SnapshotRule: PplRule {
    const SYSTEM: SystemKind;
    fn snapshot(env: &FlEnv, rules: &[Self], x0: f64) -> Snapshot;
}

impl SnapshotRule for RuleGene {
    const SYSTEM: SystemKind = SystemKind::PplDl;
    fn snapshot(env: &FlEnv, rules: &[Self], _x0: f64) -> Snapshot {
        Snapshot::from_dl(env, rules)
    }
}

impl SnapshotRule for StRule {
    const SYSTEM: SystemKind = SystemKind::PplSt;
    fn snapshot(env: &FlEnv, rules: &[Self], x0: f64) -> Snapshot {
        Snapshot::from_st(env, rules, x0)
    }
}

/// Trains XCS one time step at a time and tests the frozen population each
/// time the GA counter crosses a multiple of `threshold`.
pub fn run_xcs_trial(
    setup: TrialSetup<'_>,
    cfg: &XcsConfig,
    threshold: u64,
    step_cap: u64,
    trial: usize,
    seed: u64,
) -> Result<(TrialResult, Xcs)> {
    if threshold == 0 {
        return Err(Error::Config("epoch threshold must be positive".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut xcs = Xcs::new(cfg.clone(), setup.env)?;
    let mut epochs = Vec::with_capacity(setup.epochs);
    let mut steps = 0u64;
    while epochs.len() < setup.epochs {
        if steps >= step_cap {
            return Err(Error::Aborted(format!(
                "xcs trial {trial} reached {} of {} epochs within {step_cap} steps ({} GA invocations)",
                epochs.len(),
                setup.epochs,
                xcs.ga_invocation_count()
            )));
        }
        xcs.train_step(setup.env, &mut rng);
        steps += 1;
        while epochs.len() < setup.epochs && xcs.ga_invocation_count() >= (epochs.len() as u64 + 1) * threshold {
            let perf = evaluate_performance(setup.env, &xcs.greedy_policy(), setup.z, &mut rng)?;
            epochs.push(setup.record(epochs.len() + 1, perf, xcs.ga_invocation_count()));
        }
    }
    let snapshot = Snapshot::from_xcs(setup.env, xcs.population(), cfg.x0);
    Ok((
        TrialResult::finish(SystemKind::Xcs, trial, seed, epochs, snapshot, setup.env),
        xcs,
    ))
}
