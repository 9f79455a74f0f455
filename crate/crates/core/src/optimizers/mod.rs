//! Planners over a horizon model: exact dynamic programming, simulated
//! annealing, receding-horizon control and tabular Q-learning.

pub mod exact;
pub mod mpc;
pub mod qlearn;
pub mod sa;

pub use exact::solve_exact;
pub use mpc::{mpc_decide, solve_mpc, InnerSolver, MpcParams, MpcTrajectory};
pub use qlearn::{act, act_masked, train_q, QParams, QPolicy};
pub use sa::{solve_sa, SAParams};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::entities::{BatteryAction, BatteryConfig, BatteryState, SOC_TOL};
use crate::error::Result;

/// Deterministic battery problem over a fixed horizon. Rewards are already
/// weighted (`r_net`) and indexed by [`BatteryAction::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonModel {
    pub battery: BatteryConfig,
    pub initial: BatteryState,
    pub dt_min: u32,
    pub rewards: Vec<[f64; 3]>,
    /// Steps after which the end-of-day floor applies.
    pub day_end: Vec<bool>,
    /// Weighted cost of missing the floor; `None` makes it a hard constraint.
    pub eod_penalty: Option<f64>,
    /// Steps left in the day after the horizon when it stops short of
    /// midnight: the final state must still be able to reach the floor.
    pub tail_steps: Option<usize>,
}

impl HorizonModel {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn next_soc(&self, soc: f64, action: BatteryAction) -> Option<f64> {
        self.battery.next_soc(soc, action, self.dt_min, self.initial.capacity_kwh)
    }

    /// Whether `soc` can still reach the end-of-day floor within `remaining`
    /// charging steps.
    pub fn floor_reachable(&self, soc: f64, remaining: usize) -> bool {
        floor_reachable(&self.battery, soc, self.initial.capacity_kwh, self.dt_min, remaining)
    }

    /// Left-to-right objective of `actions` (a prefix of the horizon).
    /// Returns `None` if any step is infeasible or a hard floor is missed.
    pub fn evaluate(&self, actions: &[BatteryAction]) -> Option<f64> {
        let mut soc = self.initial.soc;
        let mut total = 0.0;
        for (t, &a) in actions.iter().enumerate() {
            soc = self.next_soc(soc, a)?;
            total += self.rewards[t][a.index()];
            if self.day_end[t] && soc < self.battery.soc_min_eod - SOC_TOL {
                total -= self.eod_penalty?;
            }
        }
        if actions.len() == self.len() {
            if let Some(tail) = self.tail_steps {
                if self.eod_penalty.is_none() && !self.floor_reachable(soc, tail) {
                    return None;
                }
            }
        }
        Some(total)
    }
}

/// Conservative end-of-day check: charging alone, without crossing the cap,
/// lifts `soc` to the floor within `remaining` steps.
pub fn floor_reachable(cfg: &BatteryConfig, soc: f64, capacity_kwh: f64, dt_min: u32, remaining: usize) -> bool {
    let cs = cfg.charge_step(dt_min, capacity_kwh);
    let k = if cs > 0.0 { ((cfg.soc_max - soc) / cs + 1e-9).floor().max(0.0) as usize } else { 0 };
    soc + k.min(remaining) as f64 * cs >= cfg.soc_min_eod - SOC_TOL
}

/// A horizon of battery decisions and the objective they score on the
/// model they were planned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub actions: Vec<BatteryAction>,
    pub objective: f64,
    pub horizon_steps: usize,
}

impl ActionPlan {
    pub fn idle(horizon_steps: usize) -> Self {
        ActionPlan { actions: vec![BatteryAction::Idle; horizon_steps], objective: 0.0, horizon_steps }
    }

    /// Number of non-idle actions.
    pub fn active_steps(&self) -> usize {
        self.actions.iter().filter(|a| !a.is_idle()).count()
    }

    /// `slot,action_or_volume,objective_contrib` rows.
    pub fn write_csv<W: Write>(&self, model: &HorizonModel, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["slot", "action_or_volume", "objective_contrib"])?;
        for (t, a) in self.actions.iter().enumerate() {
            w.write_record([t.to_string(), a.to_string(), model.rewards[t][a.index()].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Exact,
    Sa,
    Mpc,
    Q,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [OptimizerKind::Exact, OptimizerKind::Sa, OptimizerKind::Mpc, OptimizerKind::Q];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Exact => "exact",
            OptimizerKind::Sa => "sa",
            OptimizerKind::Mpc => "mpc",
            OptimizerKind::Q => "q",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            crate::error::Error::param("optimizer", format!("unknown optimizer {s:?}; supported: exact, sa, mpc, q"))
        })
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::entities::DegradationConfig;

    pub fn unit_battery() -> BatteryConfig {
        BatteryConfig {
            capacity_kwh: 10.0,
            eta_ch: 1.0,
            eta_dis: 1.0,
            pmax_ch_kw: -5.0,
            pmax_dis_kw: 5.0,
            dod: 1.0,
            soc_max: 1.0,
            soc_min_eod: 0.0,
            soc_init: 0.5,
            degradation: DegradationConfig::default(),
        }
    }

    /// Price-only arbitrage model on hourly prices.
    pub fn price_model(cfg: BatteryConfig, prices: &[f64]) -> HorizonModel {
        let rewards = prices.iter().map(|p| BatteryAction::ALL.map(|a| p * cfg.grid_energy_kwh(a, 60))).collect();
        let mut day_end = vec![false; prices.len()];
        *day_end.last_mut().unwrap() = true;
        HorizonModel {
            battery: cfg,
            initial: BatteryState::initial(&cfg),
            dt_min: 60,
            rewards,
            day_end,
            eod_penalty: None,
            tail_steps: None,
        }
    }
}
