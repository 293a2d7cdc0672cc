use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which Pittsburgh policy learner to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Ordered decision list, first match wins.
    Dl,
    /// Unordered rules with learned strength and double-max inference.
    St,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Dl => "dl",
            Variant::St => "st",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dl" => Ok(Variant::Dl),
            "st" => Ok(Variant::St),
            other => Err(Error::Config(format!(
                "unknown PPL variant '{other}' (expected dl or st)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub idv_size: usize,
    pub tourn_size: usize,
    pub p_cross: f64,
    pub p_mut: f64,
    pub num_reinf_rollouts: usize,
    pub eta: f64,
    pub x0: f64,
}

impl GaConfig {
    /// Defaults for a grid of side `size`. Ruleset sizes are 7/21/42 for the
    /// bundled 4/8/12 grids; the population is sixteen times the ruleset size.
    pub fn for_grid(size: usize) -> Self {
        let idv_size = match size {
            4 => 7,
            8 => 21,
            12 => 42,
            m => (7 * m * m).div_ceil(16).max(1),
        };
        Self {
            pop_size: 16 * idv_size,
            idv_size,
            tourn_size: 3,
            p_cross: 0.7,
            p_mut: 0.01,
            num_reinf_rollouts: 10,
            eta: 0.1,
            x0: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.pop_size < 2 || !self.pop_size.is_multiple_of(2) {
            return fail(format!("pop_size must be even and >= 2, got {}", self.pop_size));
        }
        if self.idv_size == 0 {
            return fail("idv_size must be positive".into());
        }
        if self.tourn_size == 0 {
            return fail("tourn_size must be positive".into());
        }
        for (name, v) in [("p_cross", self.p_cross), ("p_mut", self.p_mut)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return fail(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if self.x0 == 0.0 || !self.x0.is_finite() {
            return fail(format!("x0 must be finite and non-zero, got {}", self.x0));
        }
        Ok(())
    }
}
