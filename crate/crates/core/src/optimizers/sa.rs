//! Simulated annealing over action sequences. Starts from all-idle, flips
//! one step per move and scores infeasible sequences with a large constant
//! penalty per violation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionPlan, HorizonModel};
use crate::entities::{BatteryAction, SOC_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SAParams {
    /// Initial temperature as a multiple of the mean absolute step reward.
    pub t_init: f64,
    /// Geometric cooling factor per iteration.
    pub cooling: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for SAParams {
    fn default() -> Self {
        SAParams { t_init: 1.0, cooling: 0.9997, iters: 20_000, seed: 0 }
    }
}

impl SAParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_init > 0.0 && self.t_init.is_finite()) {
            return Err(Error::param("sa.t_init", "must be > 0"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::param("sa.cooling", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

struct Score {
    value: f64,
    violations: usize,
}

/// Infeasible steps act as idle for the dynamics and count one violation.
fn score(model: &HorizonModel, actions: &[BatteryAction], violation_cost: f64) -> Score {
    let mut soc = model.initial.soc;
    let mut value = 0.0;
    let mut violations = 0;
    let min_eod = model.battery.soc_min_eod - SOC_TOL;
    for (t, &a) in actions.iter().enumerate() {
        match model.next_soc(soc, a) {
            Some(next) => {
                soc = next;
                value += model.rewards[t][a.index()];
            }
            None => {
                violations += 1;
                value += model.rewards[t][BatteryAction::Idle.index()];
            }
        }
        if model.day_end[t] && soc < min_eod {
            match model.eod_penalty {
                Some(p) => value -= p,
                None => violations += 1,
            }
        }
    }
    if let (Some(tail), None) = (model.tail_steps, model.eod_penalty) {
        if !model.floor_reachable(soc, tail) {
            violations += 1;
        }
    }
    Score { value: value - violation_cost * violations as f64, violations }
}

pub fn solve_sa(model: &HorizonModel, horizon_steps: usize, params: &SAParams) -> Result<ActionPlan> {
    params.validate()?;
    if horizon_steps > model.len() {
        return Err(Error::HorizonExceedsData { horizon: horizon_steps, available: model.len() });
    }
    let n = horizon_steps;
    let sub = HorizonModel {
        rewards: model.rewards[..n].to_vec(),
        day_end: model.day_end[..n].to_vec(),
        tail_steps: if n == model.len() { model.tail_steps } else { None },
        ..model.clone()
    };
    let max_abs: f64 = sub.rewards.iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum();
    let violation_cost = 10.0 * max_abs + 1.0;
    let mean_abs = if n > 0 { max_abs / n as f64 } else { 0.0 };
    let mut temp = params.t_init * mean_abs.max(1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut current = vec![BatteryAction::Idle; n];
    let mut cur = score(&sub, &current, violation_cost);
    let mut best: Option<(Vec<BatteryAction>, f64)> = (cur.violations == 0).then(|| (current.clone(), cur.value));

    if n > 0 {
        for _ in 0..params.iters {
            // half the moves swap two steps, which shifts energy in time
            // without changing the net charge and so rarely breaks bounds
            let t = rng.random_range(0..n);
            let u = if n > 1 && rng.random_bool(0.5) { rng.random_range(0..n) } else { t };
            let (old_t, old_u) = (current[t], current[u]);
            if u != t && old_t != old_u {
                current.swap(t, u);
            } else {
                let others: Vec<BatteryAction> = BatteryAction::ALL.into_iter().filter(|&a| a != old_t).collect();
                current[t] = others[rng.random_range(0..2)];
            }
            let cand = score(&sub, &current, violation_cost);
            let delta = cand.value - cur.value;
            if delta >= 0.0 || rng.random::<f64>() < (delta / temp).exp() {
                cur = cand;
                if cur.violations == 0 && best.as_ref().is_none_or(|(_, b)| cur.value > *b) {
                    best = Some((current.clone(), cur.value));
                }
            } else {
                current[u] = old_u;
                current[t] = old_t;
            }
            temp *= params.cooling;
        }
    }
    let (actions, _) = best.ok_or(Error::NoFeasibleFound(params.iters))?;
    let objective = sub.evaluate(&actions).expect("best plan is feasible");
    Ok(ActionPlan { actions, objective, horizon_steps: n })
}
