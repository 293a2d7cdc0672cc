use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// XCSF parameters. Field names follow the usual XCS symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XcsConfig {
    /// Population bound in microclassifiers.
    pub n: usize,
    pub beta: f64,
    pub alpha: f64,
    pub epsilon_0: f64,
    pub nu: f64,
    pub theta_ga: u64,
    pub theta_del: u64,
    pub theta_sub: u64,
    /// Tournament size as a fraction of the action set.
    pub tau: f64,
    pub chi: f64,
    pub mu_mut: f64,
    pub delta: f64,
    pub epsilon_i: f64,
    pub fitness_i: f64,
    pub x0: f64,
    pub delta_rls: f64,
    pub lambda_rls: f64,
    pub mu_i: f64,
    pub beta_epsilon: f64,
    /// Covering spread.
    pub r0: i32,
    /// Mutation spread.
    pub m0: i32,
    pub explore_eps: f64,
    /// Track environmental noise per classifier. `None` enables it exactly
    /// when the environment is stochastic.
    pub noise_tracking: Option<bool>,
}

impl XcsConfig {
    pub fn for_grid(size: usize) -> Self {
        let n = match size {
            4 => 700,
            8 => 2100,
            12 => 4200,
            m => 44 * m * m,
        };
        Self {
            n,
            beta: 0.1,
            alpha: 0.1,
            epsilon_0: 0.01,
            nu: 5.0,
            theta_ga: 50,
            theta_del: 50,
            theta_sub: 50,
            tau: 0.5,
            chi: 0.8,
            mu_mut: 0.04,
            delta: 0.1,
            epsilon_i: 1e-3,
            fitness_i: 1e-3,
            x0: 10.0,
            delta_rls: 10.0,
            lambda_rls: 0.999,
            mu_i: 1e-3,
            beta_epsilon: 0.05,
            r0: (size / 2) as i32,
            m0: (size / 4).max(1) as i32,
            explore_eps: 0.5,
            noise_tracking: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return fail("xcs n must be positive".into());
        }
        for (name, v) in [
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("tau", self.tau),
            ("chi", self.chi),
            ("mu_mut", self.mu_mut),
            ("delta", self.delta),
            ("beta_epsilon", self.beta_epsilon),
            ("explore_eps", self.explore_eps),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.lambda_rls > 0.0 && self.lambda_rls <= 1.0) {
            return fail(format!("lambda_rls must lie in (0, 1], got {}", self.lambda_rls));
        }
        if self.delta_rls <= 0.0 || self.epsilon_0 <= 0.0 || self.fitness_i <= 0.0 {
            return fail("delta_rls, epsilon_0 and fitness_i must be positive".into());
        }
        if self.x0 == 0.0 {
            return fail("x0 must be non-zero".into());
        }
        if self.r0 < 0 || self.m0 < 0 {
            return fail("r0 and m0 must be non-negative".into());
        }
        Ok(())
    }
}
