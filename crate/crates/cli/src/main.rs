//! `lcs-bench`: run comparisons, compute oracles, analyse snapshots and
//! recompute statistics.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcs_bench::config::{config_hash, digest_hex, parse_systems, EnvSpec, ExperimentConfig};
use lcs_bench::harness::{
    best_action_map, env_oracle, export_results, read_final_ftp, run_experiment, write_bam, write_stats, ExportMeta,
};
use lcs_bench::mdp::Action;
use lcs_bench::{Environment, Error, FlEnv, Result, Snapshot, State};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "lcs-bench",
    version,
    about = "Pittsburgh vs Michigan LCS benchmark on FrozenLake"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured (system x environment x trial) grid and export results.
    Run(RunArgs),
    /// Value iteration, optimal policy and OTP for each configured environment.
    Oracle(OracleArgs),
    /// Best-action-map statistics of trained snapshots.
    Analyze(AnalyzeArgs),
    /// FTP summary and significance tests from an existing per-epoch CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "LCS_BENCH_OUT", default_value = "results")]
    out: PathBuf,
    /// Environments as SIZE:P_SLIP, comma separated (e.g. 4:0,4:0.3).
    #[arg(long, value_delimiter = ',')]
    envs: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Systems to run, comma separated (ppl-dl, ppl-st, xcs).
    #[arg(long, value_delimiter = ',')]
    systems: Option<Vec<String>>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Seed of the OTP rollouts on stochastic environments.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Snapshot JSON files.
    #[arg(required = true)]
    snapshots: Vec<PathBuf>,
    #[arg(long, env = "LCS_BENCH_OUT", default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Per-epoch CSV written by `run`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, env = "LCS_BENCH_OUT", default_value = "results")]
    out: PathBuf,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(envs) = &common.envs {
        cfg.envs = envs.iter().map(|s| s.parse::<EnvSpec>()).collect::<Result<_>>()?;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = &args.systems {
        cfg.systems = parse_systems(s.iter().map(String::as_str))?;
    }
    let workers = match args.workers {
        Some(0) => return Err(Error::Config("--workers must be positive".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let exp = cfg.build()?;
    let meta = ExportMeta::new(config_hash(&exp), exp.master_seed);
    eprintln!(
        "running {} system(s) x {} environment(s) x {} trial(s), {} epochs, {workers} worker(s)",
        exp.systems.len(),
        exp.envs.len(),
        exp.trials,
        exp.epochs
    );
    let results = run_experiment(&exp, workers)?;
    let paths = export_results(&results, &meta, &args.common.out)?;
    for env in &results.envs {
        for system in &exp.systems {
            let ftp: Vec<f64> = env.by_system(*system).map(|t| t.ftp).collect();
            let (mean, std) = lcs_bench::harness::mean_std(&ftp);
            println!(
                "{} {system}: FTP {mean:.4} +/- {std:.4} over {} trial(s)",
                env.key,
                ftp.len()
            );
        }
    }
    println!("per-epoch results: {}", paths.epochs.display());
    println!("FTP summary: {}", paths.ftp.display());
    match &paths.significance {
        Some(p) => println!("significance: {}", p.display()),
        None => println!("significance: skipped (needs at least 2 trials per system)"),
    }
    println!("heatmaps: {}", paths.heatmaps.display());
    Ok(())
}

fn grid<T: Clone>(env: &FlEnv, f: impl Fn(State) -> T) -> Vec<Vec<Option<T>>> {
    let m = env.size() as i32;
    (0..m)
        .map(|y| {
            (0..m)
                .map(|x| {
                    let s = State::new(x, y);
                    (!env.is_terminal(s)).then(|| f(s))
                })
                .collect()
        })
        .collect()
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(s) = args.seed {
        cfg.otp_seed = s;
    }
    let exp = cfg.build()?;
    let meta = ExportMeta::new(config_hash(&exp), exp.otp_seed);
    let mut envs = Vec::new();
    for setup in &exp.envs {
        let env = &setup.env;
        let o = env_oracle(env, exp.mu_rep, exp.otp_seed)?;
        println!("{}: OTP {:.10} over |z| = {}", setup.key(), o.otp.otp, o.z.len());
        envs.push(json!({
            "env": setup.key(),
            "grid_size": env.size(),
            "p_slip": env.p_slip(),
            "gamma": env.gamma(),
            "z_len": o.z.len(),
            "otp": o.otp,
            "v": grid(env, |s| o.q.v(s)),
            "q": grid(env, |s| *o.q.row(s)),
            "policy": grid(env, |s| u8::from(o.q.greedy(s))),
        }));
    }
    let doc = json!({ "meta": meta, "action_ids": action_legend(), "envs": envs });
    let path = args.common.out.join("oracle.json");
    write(&path, &pretty(&doc))?;
    println!("oracle: {}", path.display());
    Ok(())
}

fn action_legend() -> serde_json::Value {
    json!(Action::ALL
        .iter()
        .map(|a| format!("{}={a:?}", u8::from(*a)))
        .collect::<Vec<_>>())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    for path in &args.snapshots {
        let snap = Snapshot::load(path)?;
        let env = snap
            .env
            .build()
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let stats = best_action_map(&snap, &env);
        let bytes = std::fs::read(path).map_err(|source| Error::Read {
            path: path.clone(),
            source,
        })?;
        let seed = snap.meta.as_ref().map_or(0, |m| m.master_seed);
        let meta = ExportMeta::new(digest_hex(&bytes), seed);
        let (json_path, csv_path) = write_bam(&stats, snap.system, path, &meta, &args.out)?;
        println!(
            "{} [{}]: |R| = {}, |R_BA| = {} -> {}, {}",
            path.display(),
            snap.system,
            stats.ruleset_size,
            stats.bam_size,
            json_path.display(),
            csv_path.display()
        );
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).map_err(|source| Error::Read {
        path: args.input.clone(),
        source,
    })?;
    let (ftp, seed) = read_final_ftp(&text)?;
    let meta = ExportMeta::new(digest_hex(text.as_bytes()), seed.unwrap_or(0));
    let (summary, sig) = write_stats(&ftp, &meta, &args.out)?;
    println!("FTP summary: {}", summary.display());
    println!("significance: {}", sig.display());
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialisation cannot fail");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Write {
            path: parent.to_owned(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
