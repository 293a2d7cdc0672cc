//! Browser bindings: oracle inspection, step-wise training of one system and
//! episode traces of the trained rule set. Every export returns a JSON string.

use lcs_bench::harness::{best_action_map, env_oracle, epoch_size, EnvOracle};
use lcs_bench::mdp::evaluate_performance;
use lcs_bench::ppl::{GaConfig, Population, StRule};
use lcs_bench::rule::RuleGene;
use lcs_bench::xcsf::{Xcs, XcsConfig};
use lcs_bench::{Decision, Environment, Error, FlEnv, Result, RngStream, Snapshot, State, SystemKind};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn cells<T>(env: &FlEnv, f: impl Fn(State) -> T) -> Vec<Vec<Option<T>>> {
    let m = env.size() as i32;
    (0..m)
        .map(|y| {
            (0..m)
                .map(|x| State::new(x, y))
                .map(|s| (!env.is_terminal(s)).then(|| f(s)))
                .collect()
        })
        .collect()
}

fn map_rows(env: &FlEnv) -> Vec<String> {
    lcs_bench::snapshot::EnvRecord::of(env).map
}

/// Optimal values, greedy actions and OTP of a bundled grid.
pub fn oracle_report(grid_size: usize, p_slip: f64, mu_rep: usize, seed: u64) -> Result<String> {
    let env = FlEnv::standard(grid_size, p_slip)?;
    let o = env_oracle(&env, mu_rep.max(1), seed)?;
    Ok(json!({
        "map": map_rows(&env),
        "otp": o.otp.otp,
        "z_len": o.z.len(),
        "v": cells(&env, |s| o.q.v(s)),
        "policy": cells(&env, |s| u8::from(o.q.greedy(s))),
    })
    .to_string())
}

enum Learner {
    Dl(Population<RuleGene>),
    St(Population<StRule>),
    Xcs(Box<Xcs>),
}

/// One training run that the page advances an epoch batch at a time.
pub struct Session {
    env: FlEnv,
    oracle: EnvOracle,
    ga: GaConfig,
    x0: f64,
    threshold: u64,
    learner: Learner,
    rng: RngStream,
    curve: Vec<f64>,
}

impl Session {
    pub fn new(system: &str, grid_size: usize, p_slip: f64, seed: u64) -> Result<Self> {
        let system: SystemKind = system.parse()?;
        let env = FlEnv::standard(grid_size, p_slip)?;
        let oracle = env_oracle(&env, 2, seed)?;
        let ga = GaConfig::for_grid(grid_size);
        let xcs_cfg = XcsConfig::for_grid(grid_size);
        let mut rng = RngStream::new(seed);
        let learner = match system {
            SystemKind::PplDl => Learner::Dl(Population::initialise(&env, &ga, &oracle.z, &mut rng)?),
            SystemKind::PplSt => Learner::St(Population::initialise(&env, &ga, &oracle.z, &mut rng)?),
            SystemKind::Xcs => Learner::Xcs(Box::new(Xcs::new(xcs_cfg.clone(), &env)?)),
        };
        let x0 = if system == SystemKind::Xcs { xcs_cfg.x0 } else { ga.x0 };
        Ok(Self {
            threshold: epoch_size(ga.pop_size)?,
            env,
            oracle,
            ga,
            x0,
            learner,
            rng,
            curve: Vec::new(),
        })
    }

    /// Runs `epochs` more epochs and returns the learning curve so far plus
    /// the best-action-map density of the current rule set.
    pub fn advance(&mut self, epochs: usize) -> Result<String> {
        for _ in 0..epochs {
            let perf = match &mut self.learner {
                Learner::Dl(p) => {
                    p.run_generation(&self.env, &self.ga, &self.oracle.z, &mut self.rng)?
                        .best_performance
                }
                Learner::St(p) => {
                    p.run_generation(&self.env, &self.ga, &self.oracle.z, &mut self.rng)?
                        .best_performance
                }
                Learner::Xcs(x) => {
                    let target = (self.curve.len() as u64 + 1) * self.threshold;
                    while x.ga_invocation_count() < target {
                        x.train_step(&self.env, &mut self.rng);
                    }
                    evaluate_performance(&self.env, &x.greedy_policy(), &self.oracle.z, &mut self.rng)?
                }
            };
            self.curve.push(perf / self.oracle.otp.otp);
        }
        let snap = self.snapshot();
        let bam = best_action_map(&snap, &self.env);
        Ok(json!({
            "map": map_rows(&self.env),
            "epoch": self.curve.len(),
            "otp_fraction": self.curve,
            "ruleset_size": bam.ruleset_size,
            "bam_size": bam.bam_size,
            "density": bam.density,
            "decisions": cells(&self.env, |s| snap.decide(s).action().map(u8::from)),
        })
        .to_string())
    }

    fn snapshot(&self) -> Snapshot {
        match &self.learner {
            Learner::Dl(p) => Snapshot::from_dl(&self.env, p.best().map_or(&[][..], |b| &b.rules)),
            Learner::St(p) => Snapshot::from_st(&self.env, p.best().map_or(&[][..], |b| &b.rules), self.x0),
            Learner::Xcs(x) => Snapshot::from_xcs(&self.env, x.population(), self.x0),
        }
    }

    /// One greedy episode of the current rule set from `(x, y)`.
    pub fn trace(&self, x: i32, y: i32, seed: u64) -> Result<String> {
        let start = State::new(x, y);
        if !self.env.initial_states().contains(&start) {
            return Err(Error::Config(format!("{start} is not a start cell")));
        }
        let snap = self.snapshot();
        let mut rng = RngStream::new(seed);
        let (mut s, mut path, mut outcome) = (start, vec![[x, y]], "timeout");
        for _ in 0..self.env.t_max() {
            let Decision::Act(a) = snap.decide(s) else {
                outcome = "no rule";
                break;
            };
            let t = self.env.step(s, a, &mut rng);
            path.push([t.next.x, t.next.y]);
            s = t.next;
            if t.terminal {
                outcome = if t.reward > 0.0 { "goal" } else { "hole" };
                break;
            }
        }
        Ok(json!({ "path": path, "outcome": outcome }).to_string())
    }
}

fn js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn oracle(grid_size: usize, p_slip: f64, mu_rep: usize, seed: u64) -> Result<String, JsValue> {
    oracle_report(grid_size, p_slip, mu_rep, seed).map_err(js)
}

#[wasm_bindgen]
pub struct Trainer(Session);

#[wasm_bindgen]
impl Trainer {
    /// `system` is one of `ppl-dl`, `ppl-st`, `xcs`.
    #[wasm_bindgen(constructor)]
    pub fn new(system: &str, grid_size: usize, p_slip: f64, seed: u64) -> Result<Trainer, JsValue> {
        Session::new(system, grid_size, p_slip, seed).map(Trainer).map_err(js)
    }

    pub fn advance(&mut self, epochs: usize) -> Result<String, JsValue> {
        self.0.advance(epochs).map_err(js)
    }

    pub fn trace(&self, x: i32, y: i32, seed: u64) -> Result<String, JsValue> {
        self.0.trace(x, y, seed).map_err(js)
    }
}
