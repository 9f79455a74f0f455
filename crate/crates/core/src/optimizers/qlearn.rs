//! Tabular Q-learning. The state is (slot of day, SoC bucket, sign of the
//! forecast price slope); infeasible actions are masked during both training
//! and greedy evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entities::{BatteryAction, BatteryState};
use crate::environment::{Environment, SignalSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QParams {
    pub soc_buckets: usize,
    pub lr: f64,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams { soc_buckets: 10, lr: 0.8, gamma: 0.99, eps_start: 1.0, eps_end: 0.05, episodes: 500, seed: 0 }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.soc_buckets < 2 {
            return Err(Error::param("q.soc_buckets", "must be >= 2"));
        }
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return Err(Error::param("q.lr", "must lie in (0, 1]"));
        }
        if !unit(self.gamma) || !unit(self.eps_start) || !unit(self.eps_end) {
            return Err(Error::param("q", "gamma and epsilons must lie in [0, 1]"));
        }
        if self.eps_end > self.eps_start {
            return Err(Error::param("q.eps_end", "must not exceed eps_start"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolicy {
    pub slots_per_day: usize,
    pub soc_buckets: usize,
    /// Indexed by [`QPolicy::state_index`], then [`BatteryAction::index`].
    pub table: Vec<[f64; 3]>,
}

impl QPolicy {
    pub fn new(slots_per_day: usize, soc_buckets: usize) -> Self {
        QPolicy { slots_per_day, soc_buckets, table: vec![[0.0; 3]; slots_per_day * soc_buckets * 3] }
    }

    pub fn state_index(&self, slot: usize, bucket: usize, slope: i8) -> usize {
        (slot * self.soc_buckets + bucket) * 3 + (slope + 1) as usize
    }

    /// Discretized state of `env` at its current step.
    pub fn observe(&self, env: &Environment) -> usize {
        let t = env.state().t;
        let cfg = env.battery_config();
        let lo = cfg.soc_floor();
        let span = (cfg.soc_max - lo).max(1e-12);
        let x = ((env.state().battery.soc - lo) / span).clamp(0.0, 1.0);
        let bucket = ((x * self.soc_buckets as f64) as usize).min(self.soc_buckets - 1);
        let pf = &env.signals().price_forecast;
        let slope = if t + 1 < pf.len() { sign(pf[t + 1] - pf[t]) } else { 0 };
        self.state_index(env.slot_of_day(t) % self.slots_per_day, bucket, slope)
    }

    fn best(&self, s: usize, feasible: &[BatteryAction]) -> (BatteryAction, f64) {
        let row = &self.table[s];
        let mut best: Option<(BatteryAction, f64)> = None;
        for a in BatteryAction::PREFERENCE {
            if !feasible.contains(&a) {
                continue;
            }
            let q = row[a.index()];
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        best.unwrap_or((BatteryAction::Idle, row[BatteryAction::Idle.index()]))
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Greedy action among the environment's feasible actions; ties prefer idle.
pub fn act(policy: &QPolicy, env: &Environment) -> BatteryAction {
    act_masked(policy, env, &env.feasible_actions())
}

/// Greedy action restricted to `feasible`.
pub fn act_masked(policy: &QPolicy, env: &Environment, feasible: &[BatteryAction]) -> BatteryAction {
    policy.best(policy.observe(env), feasible).0
}

/// Train on whole days of `env`, cycling through them in order. Rewards
/// come from the forecast signals; the environment supplies the dynamics.
/// The environment is left reset to its first step.
pub fn train_q(env: &mut Environment, params: &QParams) -> Result<QPolicy> {
    params.validate()?;
    let spd = env.steps_per_day();
    let mut policy = QPolicy::new(spd, params.soc_buckets);
    let days: Vec<usize> = (0..env.len()).filter(|&t| env.slot_of_day(t) == 0 && t + spd <= env.len()).collect();
    if params.episodes > 0 && days.is_empty() {
        return Err(Error::InsufficientData(format!("training needs one full day of {spd} steps")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let initial = BatteryState::initial(env.battery_config());
    for ep in 0..params.episodes {
        let eps = if params.episodes > 1 {
            params.eps_start + (params.eps_end - params.eps_start) * ep as f64 / (params.episodes - 1) as f64
        } else {
            params.eps_start
        };
        let start = days[ep % days.len()];
        env.reset(start, initial)?;
        let model = env.horizon_model_at(start, spd, initial, SignalSource::Forecast)?;
        let mut s = policy.observe(env);
        let mut feasible = env.feasible_actions();
        while !env.is_done() {
            let a = if rng.random::<f64>() < eps {
                feasible[rng.random_range(0..feasible.len())]
            } else {
                policy.best(s, &feasible).0
            };
            let k = env.state().t - start;
            let r = model.rewards[k][a.index()];
            let out = env.step(&a.into())?;
            let mut target = r;
            let mut next = None;
            if !out.done {
                let n = policy.observe(env);
                feasible = env.feasible_actions();
                target += params.gamma * policy.best(n, &feasible).1;
                next = Some(n);
            }
            let q = &mut policy.table[s][a.index()];
            *q += params.lr * (target - *q);
            if let Some(n) = next {
                s = n;
            }
        }
    }
    env.reset_initial();
    Ok(policy)
}
