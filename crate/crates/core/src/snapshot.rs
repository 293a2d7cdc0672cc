//! Rule-engine JSON snapshots of trained systems.
//!
//! Every rule is a record `{condition: [[p, q], ...], action, weights?,
//! variance?}`; XCS classifiers add their bookkeeping fields.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frozenlake::{FlEnv, GridMap};
use crate::harness::ExportMeta;
use crate::mdp::{Action, Decision, Environment, State};
use crate::ppl::{infer_dl, infer_st, StRule};
use crate::rule::{RuleGene, UbrCondition};
use crate::xcsf::{argmax, prediction_array, scaled_identity, Classifier};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemKind {
    #[serde(rename = "ppl-dl")]
    PplDl,
    #[serde(rename = "ppl-st")]
    PplSt,
    #[serde(rename = "xcs")]
    Xcs,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::PplDl, SystemKind::PplSt, SystemKind::Xcs];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::PplDl => "ppl-dl",
            SystemKind::PplSt => "ppl-st",
            SystemKind::Xcs => "xcs",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown system `{s}` (expected ppl-dl, ppl-st or xcs)")))
    }
}

/// XCS bookkeeping carried alongside the shared rule fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XcsFields {
    pub id: u64,
    pub error: f64,
    pub noise: f64,
    pub fitness: f64,
    pub numerosity: u32,
    pub experience: u64,
    pub action_set_size: f64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub condition: UbrCondition,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", flatten)]
    pub xcs: Option<XcsFields>,
}

/// Environment description embedded in a snapshot so it can be analysed alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub grid_size: usize,
    pub p_slip: f64,
    pub gamma: f64,
    pub t_max: usize,
    /// Map rows, top to bottom.
    pub map: Vec<String>,
}

impl EnvRecord {
    pub fn of(env: &FlEnv) -> Self {
        Self {
            grid_size: env.size(),
            p_slip: env.p_slip(),
            gamma: env.gamma(),
            t_max: env.t_max(),
            map: env.map().to_string().lines().map(str::to_owned).collect(),
        }
    }

    pub fn build(&self) -> Result<FlEnv> {
        let map = GridMap::parse(&self.map.join("\n"))?;
        if map.size() != self.grid_size {
            return Err(Error::Schema(format!(
                "map is {0}x{0} but grid_size is {1}",
                map.size(),
                self.grid_size
            )));
        }
        FlEnv::with_params(map, self.p_slip, self.gamma, self.t_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: u32,
    pub system: SystemKind,
    pub x0: f64,
    pub env: EnvRecord,
    pub rules: Vec<RuleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ExportMeta>,
}

impl Snapshot {
    pub fn from_dl(env: &FlEnv, rules: &[RuleGene]) -> Self {
        Self::new(
            SystemKind::PplDl,
            env,
            0.0,
            rules.iter().map(|r| RuleRecord {
                condition: r.condition,
                action: r.action,
                weights: None,
                variance: None,
                xcs: None,
            }),
        )
    }

    pub fn from_st(env: &FlEnv, rules: &[StRule], x0: f64) -> Self {
        Self::new(
            SystemKind::PplSt,
            env,
            x0,
            rules.iter().map(|r| RuleRecord {
                condition: r.gene.condition,
                action: r.gene.action,
                weights: Some(r.weights),
                variance: Some(r.variance),
                xcs: None,
            }),
        )
    }

    pub fn from_xcs(env: &FlEnv, population: &[Classifier], x0: f64) -> Self {
        Self::new(
            SystemKind::Xcs,
            env,
            x0,
            population.iter().map(|c| RuleRecord {
                condition: c.condition,
                action: c.action,
                weights: Some(c.weights),
                variance: None,
                xcs: Some(XcsFields {
                    id: c.id,
                    error: c.error,
                    noise: c.noise,
                    fitness: c.fitness,
                    numerosity: c.numerosity,
                    experience: c.experience,
                    action_set_size: c.action_set_size,
                    timestamp: c.timestamp,
                }),
            }),
        )
    }

    fn new(system: SystemKind, env: &FlEnv, x0: f64, rules: impl Iterator<Item = RuleRecord>) -> Self {
        Self {
            format: FORMAT_VERSION,
            system,
            x0,
            env: EnvRecord::of(env),
            rules: rules.collect(),
            meta: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        snap.validate()?;
        Ok(snap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialisation cannot fail")
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported snapshot format {}", self.format)));
        }
        let m = self.env.grid_size as i32;
        for (i, r) in self.rules.iter().enumerate() {
            if r.condition.alleles.iter().flatten().any(|&v| v < 0 || v >= m) {
                return Err(Error::Schema(format!("rule {i}: condition allele outside 0..{m}")));
            }
            let ok = match self.system {
                SystemKind::PplDl => true,
                SystemKind::PplSt => r.weights.is_some() && r.variance.is_some(),
                SystemKind::Xcs => r.weights.is_some() && r.xcs.is_some(),
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "rule {i}: fields missing for a {} snapshot",
                    self.system
                )));
            }
        }
        Ok(())
    }

    pub fn dl_rules(&self) -> Vec<RuleGene> {
        self.rules
            .iter()
            .map(|r| RuleGene {
                condition: r.condition,
                action: r.action,
            })
            .collect()
    }

    pub fn st_rules(&self) -> Vec<StRule> {
        self.rules
            .iter()
            .map(|r| StRule {
                gene: RuleGene {
                    condition: r.condition,
                    action: r.action,
                },
                weights: r.weights.unwrap_or_default(),
                variance: r.variance.unwrap_or_default(),
            })
            .collect()
    }

    pub fn classifiers(&self) -> Vec<Classifier> {
        self.rules
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let x = r.xcs.clone().unwrap_or(XcsFields {
                    id: i as u64,
                    error: 0.0,
                    noise: 0.0,
                    fitness: 0.0,
                    numerosity: 1,
                    experience: 0,
                    action_set_size: 1.0,
                    timestamp: 0,
                });
                Classifier {
                    id: x.id,
                    condition: r.condition,
                    action: r.action,
                    weights: r.weights.unwrap_or_default(),
                    rls: scaled_identity(1.0),
                    error: x.error,
                    noise: x.noise,
                    fitness: x.fitness,
                    numerosity: x.numerosity,
                    experience: x.experience,
                    action_set_size: x.action_set_size,
                    timestamp: x.timestamp,
                }
            })
            .collect()
    }

    /// Testing-time decision of the stored system.
    pub fn decide(&self, s: State) -> Decision {
        match self.system {
            SystemKind::PplDl => infer_dl(&self.dl_rules(), s),
            SystemKind::PplSt => infer_st(&self.st_rules(), s, self.x0),
            SystemKind::Xcs => {
                let cls = self.classifiers();
                argmax(&prediction_array(cls.iter().filter(|c| c.matches(s)), s, self.x0))
            }
        }
    }
}
