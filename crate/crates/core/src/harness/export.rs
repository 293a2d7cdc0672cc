use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::SystemKind;

use super::experiment::{EnvResults, ExperimentResults};
use super::stats::{compare_ftp, mean_std};
use super::BestActionMapStats;

/// Provenance stamped into every emitted file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl ExportMeta {
    pub fn new(config_hash: impl Into<String>, master_seed: u64) -> Self {
        Self {
            tool: "lcs-bench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            master_seed,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# {} {} config_hash={} master_seed={}\n",
            self.tool, self.version, self.config_hash, self.master_seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub epochs: PathBuf,
    pub ftp: PathBuf,
    /// Absent when some system has fewer than two trials.
    pub significance: Option<PathBuf>,
    pub heatmaps: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Write {
            path: parent.to_owned(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

fn file_stem(env: &EnvResults) -> String {
    env.key.replace(':', "_")
}

/// Writes the per-epoch CSV, FTP summary CSV, significance CSV, heatmap
/// JSON and one snapshot per trial under `dir`.
pub fn export_results(results: &ExperimentResults, meta: &ExportMeta, dir: &Path) -> Result<ExportPaths> {
    let mut paths = ExportPaths {
        epochs: dir.join("epochs.csv"),
        ftp: dir.join("ftp.csv"),
        significance: None,
        heatmaps: dir.join("heatmaps.json"),
        snapshots: Vec::new(),
    };

    let mut epochs = meta.csv_header();
    epochs.push_str("env,system,trial,epoch,performance,otp_fraction\n");
    for env in &results.envs {
        for t in &env.trials {
            for e in &t.epochs {
                writeln!(
                    epochs,
                    "{},{},{},{},{},{}",
                    env.key, t.system, t.trial, e.epoch, e.performance, e.otp_fraction
                )
                .expect("writing to a string");
            }
        }
    }
    write_file(&paths.epochs, &epochs)?;

    let mut ftp = meta.csv_header();
    ftp.push_str("env,system,trials,mean_ftp,std_ftp,mean_ruleset_size,mean_bam_size\n");
    let mut sig = meta.csv_header();
    sig.push_str("env,system,other,u,p_value,alpha,verdict\n");
    let mut sig_complete = true;
    let mut heatmaps = Vec::new();
    for env in &results.envs {
        let mut per_system: BTreeMap<SystemKind, Vec<f64>> = BTreeMap::new();
        for t in &env.trials {
            per_system.entry(t.system).or_default().push(t.ftp);
        }
        for (&system, values) in &per_system {
            let (mean, std) = mean_std(values);
            let stats: Vec<&BestActionMapStats> = env.by_system(system).filter_map(|t| t.bam.as_ref()).collect();
            let mean_of = |f: fn(&BestActionMapStats) -> usize| {
                stats.iter().map(|s| f(s) as f64).sum::<f64>() / stats.len().max(1) as f64
            };
            let (rs, bs) = (mean_of(|s| s.ruleset_size), mean_of(|s| s.bam_size));
            writeln!(ftp, "{},{system},{},{mean},{std},{rs},{bs}", env.key, values.len()).expect("writing to a string");
            heatmaps.push(mean_heatmap(env, system, &stats, rs, bs));
        }
        match compare_ftp(&per_system) {
            Ok((_, comparisons)) => {
                for c in comparisons {
                    writeln!(
                        sig,
                        "{},ppl-st,{},{},{},{},{}",
                        env.key, c.other, c.u, c.p_value, c.alpha, c.verdict
                    )
                    .expect("writing to a string");
                }
            }
            Err(e) if e.is_config() => sig_complete = false,
            Err(e) => return Err(e),
        }
    }
    write_file(&paths.ftp, &ftp)?;
    if sig_complete {
        let p = dir.join("significance.csv");
        write_file(&p, &sig)?;
        paths.significance = Some(p);
    }

    let doc = HeatmapFile {
        meta: meta.clone(),
        maps: heatmaps,
    };
    write_file(&paths.heatmaps, &to_json(&doc))?;

    for env in &results.envs {
        for t in &env.trials {
            let p = dir
                .join("snapshots")
                .join(format!("{}_{}_t{}.json", file_stem(env), t.system, t.trial));
            let mut snap = t.snapshot.clone();
            snap.meta = Some(meta.clone());
            write_file(&p, &to_json(&snap))?;
            paths.snapshots.push(p);
        }
    }
    Ok(paths)
}

/// FTP values keyed by environment, then system.
pub type FtpTable = BTreeMap<String, BTreeMap<SystemKind, Vec<f64>>>;

/// Final-epoch `otp_fraction` per environment, system and trial, read back
/// from a per-epoch CSV. Also returns the master seed found in its header.
pub fn read_final_ftp(text: &str) -> Result<(FtpTable, Option<u64>)> {
    let mut seed = None;
    let mut last: BTreeMap<(String, SystemKind, usize), (usize, f64)> = BTreeMap::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let bad = |what: &str| Error::Schema(format!("epochs CSV line {}: {what}", i + 1));
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.split_whitespace().find_map(|t| t.strip_prefix("master_seed=")) {
                seed = v.parse().ok();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim() != "env,system,trial,epoch,performance,otp_fraction" {
                return Err(bad("unexpected header"));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let system: SystemKind = f[1].parse().map_err(|_| bad("unknown system"))?;
        let trial: usize = f[2].parse().map_err(|_| bad("bad trial"))?;
        let epoch: usize = f[3].parse().map_err(|_| bad("bad epoch"))?;
        let frac: f64 = f[5].parse().map_err(|_| bad("bad otp_fraction"))?;
        let slot = last.entry((f[0].to_owned(), system, trial)).or_insert((epoch, frac));
        if epoch >= slot.0 {
            *slot = (epoch, frac);
        }
    }
    if !header_seen {
        return Err(Error::Schema("epochs CSV has no header".into()));
    }
    let mut out = FtpTable::new();
    for ((env, system, _), (_, frac)) in last {
        out.entry(env).or_default().entry(system).or_default().push(frac);
    }
    Ok((out, seed))
}

/// Writes `ftp_summary.csv` and `significance.csv` from final FTP values.
pub fn write_stats(ftp: &FtpTable, meta: &ExportMeta, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let mut summary = meta.csv_header();
    summary.push_str("env,system,trials,mean_ftp,std_ftp\n");
    let mut sig = meta.csv_header();
    sig.push_str("env,system,other,u,p_value,alpha,verdict\n");
    for (env, per_system) in ftp {
        let (rows, comparisons) = compare_ftp(per_system)?;
        for r in rows {
            writeln!(summary, "{env},{},{},{},{}", r.system, r.trials, r.mean, r.std).expect("writing to a string");
        }
        for c in comparisons {
            writeln!(
                sig,
                "{env},ppl-st,{},{},{},{},{}",
                c.other, c.u, c.p_value, c.alpha, c.verdict
            )
            .expect("writing to a string");
        }
    }
    let (a, b) = (dir.join("ftp_summary.csv"), dir.join("significance.csv"));
    write_file(&a, &summary)?;
    write_file(&b, &sig)?;
    Ok((a, b))
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialisation cannot fail");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapFile {
    pub meta: ExportMeta,
    pub maps: Vec<Heatmap>,
}

/// Trial-averaged best-action-map densities of one system in one environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Heatmap {
    pub env: String,
    pub system: SystemKind,
    pub grid_size: usize,
    pub trials: usize,
    pub mean_ruleset_size: f64,
    pub mean_bam_size: f64,
    /// Row-major; `null` on terminal cells.
    pub density: Vec<Vec<Option<f64>>>,
}

fn mean_heatmap(env: &EnvResults, system: SystemKind, stats: &[&BestActionMapStats], rs: f64, bs: f64) -> Heatmap {
    let m = env.grid_size;
    let mut density = vec![vec![None; m]; m];
    if let Some(first) = stats.first() {
        for (y, row) in density.iter_mut().enumerate() {
            for (x, cell) in row.iter_mut().enumerate() {
                if first.density[y][x].is_some() {
                    let sum: f64 = stats.iter().filter_map(|s| s.density[y][x]).sum();
                    *cell = Some(sum / stats.len() as f64);
                }
            }
        }
    }
    Heatmap {
        env: env.key.clone(),
        system,
        grid_size: m,
        trials: stats.len(),
        mean_ruleset_size: rs,
        mean_bam_size: bs,
        density,
    }
}

#[derive(Serialize)]
struct BamFile<'a> {
    meta: &'a ExportMeta,
    source: String,
    system: SystemKind,
    #[serde(flatten)]
    stats: &'a BestActionMapStats,
}

/// Writes `<stem>.bam.json` and `<stem>.density.csv` for one analysed snapshot.
pub fn write_bam(
    stats: &BestActionMapStats,
    system: SystemKind,
    source: &Path,
    meta: &ExportMeta,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let stem = source
        .file_stem()
        .map_or_else(|| "snapshot".to_owned(), |s| s.to_string_lossy().into_owned());
    let json_path = dir.join(format!("{stem}.bam.json"));
    let csv_path = dir.join(format!("{stem}.density.csv"));
    let doc = BamFile {
        meta,
        source: source
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        system,
        stats,
    };
    write_file(&json_path, &to_json(&doc))?;
    let mut csv = meta.csv_header();
    csv.push_str("x,y,density\n");
    for (y, row) in stats.density.iter().enumerate() {
        for (x, d) in row.iter().enumerate() {
            if let Some(d) = d {
                writeln!(csv, "{x},{y},{d}").expect("writing to a string");
            }
        }
    }
    write_file(&csv_path, &csv)?;
    Ok((json_path, csv_path))
}
