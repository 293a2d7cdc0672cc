use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frozenlake::FlEnv;
use crate::mdp::State;
use crate::oracle::{bfs_distances, build_z, compute_otp, value_iteration, OtpResult, QTable, DEFAULT_TOLERANCE};
use crate::ppl::{GaConfig, StRule};
use crate::rng::RngStream;
use crate::rule::RuleGene;
use crate::snapshot::SystemKind;
use crate::xcsf::XcsConfig;

use super::{epoch_size, run_ppl_trial, run_xcs_trial, TrialResult, TrialSetup};

/// One environment of an experiment with the system parameters used on it.
#[derive(Debug, Clone)]
pub struct EnvSetup {
    pub env: FlEnv,
    pub ga: GaConfig,
    pub xcs: XcsConfig,
}

impl EnvSetup {
    /// `M:p`, e.g. `8:0.3`.
    pub fn key(&self) -> String {
        env_key(&self.env)
    }
}

pub fn env_key(env: &FlEnv) -> String {
    format!("{}:{}", env.size(), env.p_slip())
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub envs: Vec<EnvSetup>,
    pub systems: Vec<SystemKind>,
    pub trials: usize,
    pub epochs: usize,
    /// Enumerations of the initial states in `z` for stochastic environments.
    pub mu_rep: usize,
    pub master_seed: u64,
    pub otp_seed: u64,
    pub step_cap: u64,
}

/// Value-iteration ground truth and test sequence of one environment.
#[derive(Debug, Clone)]
pub struct EnvOracle {
    pub q: QTable,
    pub z: Vec<State>,
    pub otp: OtpResult,
}

pub fn env_oracle(env: &FlEnv, mu_rep: usize, otp_seed: u64) -> Result<EnvOracle> {
    bfs_distances(env.map())?;
    let q = value_iteration(env, DEFAULT_TOLERANCE);
    let z = build_z(env, mu_rep);
    let otp = compute_otp(env, &q, &z, &mut RngStream::new(otp_seed))?;
    Ok(EnvOracle { q, z, otp })
}

/// Seed of one trial; independent of which other systems or environments run.
pub fn trial_seed(master: u64, env: &FlEnv, system: SystemKind, trial: usize) -> u64 {
    let digest = Sha256::digest(format!("{}/{system}/{trial}", env_key(env)).as_bytes());
    let stream = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    RngStream::derived(master, stream).next_u64()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvResults {
    pub key: String,
    pub grid_size: usize,
    pub p_slip: f64,
    pub otp: f64,
    /// Ordered by system, then trial.
    pub trials: Vec<TrialResult>,
}

impl EnvResults {
    pub fn by_system(&self, system: SystemKind) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(move |t| t.system == system)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResults {
    pub envs: Vec<EnvResults>,
}

fn run_trial(
    setup: &EnvSetup,
    oracle: &EnvOracle,
    exp: &Experiment,
    system: SystemKind,
    trial: usize,
) -> Result<TrialResult> {
    let ts = TrialSetup {
        env: &setup.env,
        z: &oracle.z,
        otp: oracle.otp.otp,
        epochs: exp.epochs,
    };
    let seed = trial_seed(exp.master_seed, &setup.env, system, trial);
    Ok(match system {
        SystemKind::PplDl => run_ppl_trial::<RuleGene>(ts, &setup.ga, trial, seed)?.0,
        SystemKind::PplSt => run_ppl_trial::<StRule>(ts, &setup.ga, trial, seed)?.0,
        SystemKind::Xcs => {
            let threshold = epoch_size(setup.ga.pop_size)?;
            run_xcs_trial(ts, &setup.xcs, threshold, exp.step_cap, trial, seed)?.0
        }
    })
}

/// Runs every (environment, system, trial) triple on a pool of `workers`
/// threads. Results do not depend on the worker count.
pub fn run_experiment(exp: &Experiment, workers: usize) -> Result<ExperimentResults> {
    if exp.trials == 0 || exp.epochs == 0 {
        return Err(Error::Config("trials and epochs must be positive".into()));
    }
    let oracles: Vec<EnvOracle> = exp
        .envs
        .iter()
        .map(|s| env_oracle(&s.env, exp.mu_rep, exp.otp_seed))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, SystemKind, usize)> = (0..exp.envs.len())
        .flat_map(|e| {
            exp.systems
                .iter()
                .flat_map(move |&s| (0..exp.trials).map(move |t| (e, s, t)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Aborted(format!("cannot start worker pool: {e}")))?;
    let results: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(e, s, t)| run_trial(&exp.envs[e], &oracles[e], exp, s, t))
            .collect::<Result<_>>()
    })?;
    let mut envs: Vec<EnvResults> = exp
        .envs
        .iter()
        .zip(&oracles)
        .map(|(s, o)| EnvResults {
            key: s.key(),
            grid_size: s.env.size(),
            p_slip: s.env.p_slip(),
            otp: o.otp.otp,
            trials: Vec::new(),
        })
        .collect();
    for ((e, _, _), r) in jobs.into_iter().zip(results) {
        envs[e].trials.push(r);
    }
    Ok(ExperimentResults { envs })
}
