//! Experiment configuration files.
//!
//! A config is a flat `key = value` file with `[env]`, `[ppl]`, `[xcs]` and
//! `[harness]` sections. Every key is optional; omitted ones take the grid
//! defaults. Unknown keys and ill-typed values are reported with their line.
//!
//! ```toml
//! [env]
//! envs = ["4:0", "4:0.3"]   # grid size : slip probability
//! # map_path = "maps/custom.txt"
//!
//! [ppl]
//! pop_size = 112
//!
//! [xcs]
//! n = 700
//!
//! [harness]
//! trials = 5
//! epochs = 250
//! mu_rep = 10
//! seed = 42
//! systems = ["ppl-dl", "ppl-st", "xcs"]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Spanned, Value};

use crate::error::{Error, Result};
use crate::frozenlake::{default_t_max, FlEnv, GridMap, DEFAULT_GAMMA};
use crate::harness::{EnvSetup, Experiment, DEFAULT_STEP_CAP};
use crate::mdp::Environment;
use crate::ppl::GaConfig;
use crate::snapshot::SystemKind;
use crate::xcsf::XcsConfig;

/// One environment of the suite: bundled (or configured) map plus slip probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub grid_size: usize,
    pub p_slip: f64,
}

impl std::str::FromStr for EnvSpec {
    type Err = Error;

    /// `M:p`, e.g. `8:0.3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("environment `{s}` is not of the form SIZE:P_SLIP, e.g. 4:0.3"));
        let (m, p) = s.trim().split_once(':').ok_or_else(bad)?;
        Ok(EnvSpec {
            grid_size: m.trim().parse().map_err(|_| bad())?,
            p_slip: p.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    env: RawEnv,
    #[serde(default)]
    ppl: BTreeMap<String, Spanned<Value>>,
    #[serde(default)]
    xcs: BTreeMap<String, Spanned<Value>>,
    #[serde(default)]
    harness: RawHarness,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    envs: Option<Vec<String>>,
    grid_size: Option<usize>,
    p_slip: Option<f64>,
    map_path: Option<PathBuf>,
    gamma: Option<f64>,
    t_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHarness {
    trials: Option<usize>,
    epochs: Option<usize>,
    mu_rep: Option<usize>,
    seed: Option<u64>,
    otp_seed: Option<u64>,
    systems: Option<Vec<String>>,
    step_cap: Option<u64>,
}

/// Parsed configuration before grid defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub envs: Vec<EnvSpec>,
    pub map_path: Option<PathBuf>,
    pub gamma: f64,
    pub t_max: Option<usize>,
    pub ppl_overrides: toml::Table,
    pub xcs_overrides: toml::Table,
    pub systems: Vec<SystemKind>,
    pub trials: usize,
    pub epochs: usize,
    pub mu_rep: usize,
    pub seed: u64,
    pub otp_seed: u64,
    pub step_cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            envs: vec![EnvSpec {
                grid_size: 4,
                p_slip: 0.0,
            }],
            map_path: None,
            gamma: DEFAULT_GAMMA,
            t_max: None,
            ppl_overrides: toml::Table::new(),
            xcs_overrides: toml::Table::new(),
            systems: SystemKind::ALL.to_vec(),
            trials: 5,
            epochs: 250,
            mu_rep: 30,
            seed: 0,
            otp_seed: 0,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Applies `overrides` to the serialised `defaults`, rejecting unknown keys.
fn apply_overrides<T: Serialize + DeserializeOwned>(
    defaults: &T,
    overrides: &toml::Table,
    extra_keys: &[&str],
    section: &str,
) -> Result<T> {
    let mut table = toml::Table::try_from(defaults).map_err(|e| Error::Config(e.to_string()))?;
    for (k, v) in overrides {
        if !table.contains_key(k) && !extra_keys.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown key `{k}` in [{section}]")));
        }
        table.insert(k.clone(), v.clone());
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{section}]: {}", e.message())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        if let Some(map) = &cfg.map_path {
            if map.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.map_path = Some(dir.join(map));
                }
            }
        }
        Ok(cfg)
    }

    /// Parses config text; `origin` is only used in diagnostics.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let at = |offset: usize, message: String| Error::ConfigAt {
            path: origin.to_owned(),
            line: line_of(text, offset),
            message,
        };
        let raw: RawFile = toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            at(offset, e.message().trim().to_owned())
        })?;
        let mut cfg = ExperimentConfig::default();

        if let Some(list) = raw.env.envs {
            if raw.env.grid_size.is_some() || raw.env.p_slip.is_some() {
                return Err(Error::Config(
                    "[env]: give either `envs` or `grid_size`/`p_slip`, not both".into(),
                ));
            }
            cfg.envs = list.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        } else if raw.env.grid_size.is_some() || raw.env.p_slip.is_some() {
            cfg.envs = vec![EnvSpec {
                grid_size: raw.env.grid_size.unwrap_or(4),
                p_slip: raw.env.p_slip.unwrap_or(0.0),
            }];
        }
        cfg.map_path = raw.env.map_path;
        cfg.gamma = raw.env.gamma.unwrap_or(cfg.gamma);
        cfg.t_max = raw.env.t_max;

        // Validate override keys and types against the defaults of a grid so
        // that errors can point at a line.
        for (section, entries, table) in [
            ("ppl", &raw.ppl, &mut cfg.ppl_overrides),
            ("xcs", &raw.xcs, &mut cfg.xcs_overrides),
        ] {
            for (k, v) in entries {
                let single: toml::Table = [(k.clone(), v.get_ref().clone())].into_iter().collect();
                let checked = if section == "ppl" {
                    apply_overrides(&GaConfig::for_grid(4), &single, &[], section).map(|_| ())
                } else {
                    apply_overrides(&XcsConfig::for_grid(4), &single, &["noise_tracking"], section).map(|_| ())
                };
                checked.map_err(|e| at(v.span().start, e.to_string()))?;
                table.insert(k.clone(), v.get_ref().clone());
            }
        }

        let h = raw.harness;
        cfg.trials = h.trials.unwrap_or(cfg.trials);
        cfg.epochs = h.epochs.unwrap_or(cfg.epochs);
        cfg.mu_rep = h.mu_rep.unwrap_or(cfg.mu_rep);
        cfg.seed = h.seed.unwrap_or(cfg.seed);
        cfg.otp_seed = h.otp_seed.unwrap_or(cfg.otp_seed);
        cfg.step_cap = h.step_cap.unwrap_or(cfg.step_cap);
        if let Some(systems) = h.systems {
            cfg.systems = parse_systems(systems.iter().map(String::as_str))?;
        }
        Ok(cfg)
    }

    /// Resolves maps and per-grid defaults into a runnable experiment.
    pub fn build(&self) -> Result<Experiment> {
        if self.envs.is_empty() {
            return Err(Error::Config("no environments configured".into()));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("no systems selected".into()));
        }
        if self.trials == 0 || self.epochs == 0 || self.mu_rep == 0 {
            return Err(Error::Config("trials, epochs and mu_rep must be positive".into()));
        }
        let custom = self.map_path.as_deref().map(GridMap::load).transpose()?;
        if let Some(map) = &custom {
            if !self.envs.iter().any(|e| e.grid_size == map.size()) {
                return Err(Error::Config(format!(
                    "map {} is {1}x{1} but no environment has grid size {1}",
                    self.map_path.as_deref().unwrap_or(Path::new("")).display(),
                    map.size()
                )));
            }
        }
        let mut envs = Vec::with_capacity(self.envs.len());
        for spec in &self.envs {
            let map = match &custom {
                Some(m) if m.size() == spec.grid_size => m.clone(),
                _ => GridMap::default_for(spec.grid_size)?,
            };
            let t_max = self.t_max.unwrap_or_else(|| default_t_max(spec.grid_size));
            let env = FlEnv::with_params(map, spec.p_slip, self.gamma, t_max)?;
            let ga = apply_overrides(&GaConfig::for_grid(spec.grid_size), &self.ppl_overrides, &[], "ppl")?;
            ga.validate()?;
            let xcs = apply_overrides(
                &XcsConfig::for_grid(spec.grid_size),
                &self.xcs_overrides,
                &["noise_tracking"],
                "xcs",
            )?;
            xcs.validate()?;
            envs.push(EnvSetup { env, ga, xcs });
        }
        Ok(Experiment {
            envs,
            systems: self.systems.clone(),
            trials: self.trials,
            epochs: self.epochs,
            mu_rep: self.mu_rep,
            master_seed: self.seed,
            otp_seed: self.otp_seed,
            step_cap: self.step_cap,
        })
    }
}

pub fn parse_systems<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Vec<SystemKind>> {
    let mut out: Vec<SystemKind> = Vec::new();
    for n in names {
        let k: SystemKind = n.parse()?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

/// SHA-256 over a canonical JSON rendering of everything that influences
/// results (worker count excluded).
pub fn config_hash(exp: &Experiment) -> String {
    let envs: Vec<_> = exp
        .envs
        .iter()
        .map(|s| {
            serde_json::json!({
                "key": s.key(),
                "map": s.env.map().to_string(),
                "gamma": s.env.gamma(),
                "t_max": s.env.t_max(),
                "ppl": s.ga,
                "xcs": s.xcs,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "envs": envs,
        "systems": exp.systems,
        "trials": exp.trials,
        "epochs": exp.epochs,
        "mu_rep": exp.mu_rep,
        "master_seed": exp.master_seed,
        "otp_seed": exp.otp_seed,
        "step_cap": exp.step_cap,
    });
    digest_hex(doc.to_string().as_bytes())
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
