//! Receding-horizon control: plan on forecasts, execute the first action on
//! actuals, roll forward.

use serde::{Deserialize, Serialize};

use super::{solve_exact, solve_sa, ActionPlan, SAParams};
use crate::entities::BatteryAction;
use crate::environment::{Environment, RewardComponents};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    Exact,
    Sa(SAParams),
}

impl InnerSolver {
    pub fn solve(&self, model: &super::HorizonModel, horizon_steps: usize) -> Result<ActionPlan> {
        match self {
            InnerSolver::Exact => solve_exact(model, horizon_steps),
            InnerSolver::Sa(p) => solve_sa(model, horizon_steps, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub horizon_steps: usize,
    pub inner: InnerSolver,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams { horizon_steps: 24, inner: InnerSolver::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MpcTrajectory {
    pub actions: Vec<BatteryAction>,
    pub rewards: Vec<RewardComponents>,
    pub total: RewardComponents,
}

/// First action of a plan over the next `horizon_steps` (clipped to the
/// data). A horizon that stops short of midnight requires its last state to
/// keep the end-of-day floor reachable.
pub fn mpc_decide(env: &Environment, params: &MpcParams) -> Result<BatteryAction> {
    if params.horizon_steps == 0 {
        return Err(Error::param("mpc.horizon_steps", "must be positive"));
    }
    let t = env.state().t;
    let n = params.horizon_steps.min(env.len() - t);
    let mut model = env.horizon_model(n)?;
    let last = t + n - 1;
    if !env.is_day_end(last) && last + 1 < env.len() {
        model.tail_steps = Some(env.steps_per_day() - 1 - env.slot_of_day(last));
    }
    match params.inner.solve(&model, n) {
        Ok(plan) => Ok(plan.actions[0]),
        Err(Error::Infeasible | Error::NoFeasibleFound(_)) => {
            log::warn!("mpc: no feasible plan at step {t}; falling back to the safest feasible action");
            let feasible = env.feasible_actions();
            Ok(BatteryAction::PREFERENCE.into_iter().find(|a| feasible.contains(a)).unwrap_or(BatteryAction::Idle))
        }
        Err(e) => Err(e),
    }
}

/// Run the current episode to its end under receding-horizon control.
pub fn solve_mpc(env: &mut Environment, params: &MpcParams) -> Result<MpcTrajectory> {
    let mut out = MpcTrajectory::default();
    while !env.is_done() {
        let a = mpc_decide(env, params)?;
        let step = env.step(&a.into())?;
        out.total.accumulate(&step.reward);
        out.actions.push(a);
        out.rewards.push(step.reward);
    }
    Ok(out)
}
