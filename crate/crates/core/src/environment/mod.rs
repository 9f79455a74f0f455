//! Simulation environment: per-step rewards on actual signals, battery state
//! transitions, the end-of-day state-of-charge rule, and horizon models built
//! from forecasts for the planners.

pub mod formulation;

pub use formulation::{compose_penalty, compose_revenue, FormulationVars};

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contracts::{decision_slots, DecisionSlot};
use crate::entities::{
    battery_apply_action, battery_close_degradation_window, battery_feasible_actions, BatteryAction, BatteryConfig,
    BatteryState, SOC_TOL,
};
use crate::error::{Error, Result};
use crate::optimizers::{floor_reachable, HorizonModel};
use crate::scenarios::bidding::{self, Bid, BiddingLedger, BiddingSetup, Delivery};
use crate::scenarios::microgrid::{mg_step_reward, DispatchResult, MgStep};
use crate::timeseries::Timestamp;

pub const DEFAULT_HISTORY_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    #[serde(default = "one")]
    pub w_price: f64,
    #[serde(default)]
    pub w_carbon: f64,
    #[serde(default = "one")]
    pub w_deg: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { w_price: 1.0, w_carbon: 0.0, w_deg: 1.0 }
    }
}

impl ObjectiveWeights {
    pub fn new(w_price: f64, w_carbon: f64, w_deg: f64) -> Self {
        ObjectiveWeights { w_price, w_carbon, w_deg }
    }

    pub fn price_only() -> Self {
        ObjectiveWeights::new(1.0, 0.0, 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        ObjectiveWeights::new(self.w_price * k, self.w_carbon * k, self.w_deg * k)
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_price, self.w_carbon, self.w_deg];
        if ws.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights", "every weight must be finite and >= 0"));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::param("weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

/// Per-step reward triple plus contract/rule penalties and the weighted net.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub r_price: f64,
    pub r_carbon: f64,
    pub r_deg: f64,
    /// Penalties in currency, charged against the price term.
    pub penalty: f64,
    pub r_net: f64,
}

impl RewardComponents {
    /// `r_net = w_c·r_carbon + w_p·(r_price − penalty) − w_d·r_deg`.
    pub fn new(r_price: f64, r_carbon: f64, r_deg: f64, penalty: f64, w: &ObjectiveWeights) -> Self {
        RewardComponents {
            r_price,
            r_carbon,
            r_deg,
            penalty,
            r_net: w.w_carbon * r_carbon + w.w_price * (r_price - penalty) - w.w_deg * r_deg,
        }
    }

    pub fn accumulate(&mut self, other: &RewardComponents) {
        self.r_price += other.r_price;
        self.r_carbon += other.r_carbon;
        self.r_deg += other.r_deg;
        self.penalty += other.penalty;
        self.r_net += other.r_net;
    }
}

/// Energy arbitrage reward of one action on prices `p` and carbon `c`.
pub fn reward_components(
    action: BatteryAction,
    p: f64,
    c: f64,
    alpha: f64,
    cfg: &BatteryConfig,
    dt_min: u32,
    weights: &ObjectiveWeights,
) -> RewardComponents {
    let e = cfg.grid_energy_kwh(action, dt_min);
    RewardComponents::new(p * e, c * e, alpha * e.abs(), 0.0, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Ea,
    Mg,
    Bo,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::Ea => "ea",
            ScenarioKind::Mg => "mg",
            ScenarioKind::Bo => "bo",
        })
    }
}

/// How the end-of-day state-of-charge floor is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EodPolicy {
    /// Violating final-step actions are rejected.
    #[default]
    Mask,
    /// Violations are allowed at this currency cost.
    Penalty(f64),
}

/// Aligned per-step signals. Power series are in kW.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signals {
    pub start: Option<Timestamp>,
    pub dt_min: u32,
    pub price: Vec<f64>,
    pub price_forecast: Vec<f64>,
    pub carbon: Vec<f64>,
    pub carbon_forecast: Vec<f64>,
    pub generation: Vec<f64>,
    pub generation_forecast: Vec<f64>,
    pub demand: Vec<f64>,
    pub demand_forecast: Vec<f64>,
}

impl Signals {
    /// Price-only signals with zero carbon, generation and demand.
    pub fn prices(start: Timestamp, dt_min: u32, price: Vec<f64>, price_forecast: Vec<f64>) -> Self {
        let zeros = vec![0.0; price.len()];
        Signals {
            start: Some(start),
            dt_min,
            carbon: zeros.clone(),
            carbon_forecast: zeros.clone(),
            generation: zeros.clone(),
            generation_forecast: zeros.clone(),
            demand: zeros.clone(),
            demand_forecast: zeros,
            price,
            price_forecast,
        }
    }

    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.price.len();
        if n == 0 || self.start.is_none() {
            return Err(Error::InvalidSeries("environment needs at least one step".into()));
        }
        if self.dt_min == 0 || 1440 % self.dt_min != 0 {
            return Err(Error::param("dt_min", "must divide 1440"));
        }
        for s in [
            &self.price_forecast,
            &self.carbon,
            &self.carbon_forecast,
            &self.generation,
            &self.generation_forecast,
            &self.demand,
            &self.demand_forecast,
        ] {
            if s.len() != n {
                return Err(Error::LengthMismatch { left: n, right: s.len() });
            }
        }
        Ok(())
    }
}

/// Which copy of the signals a horizon model is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalSource {
    Forecast,
    Actual,
}

/// Everything an environment is built from.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub kind: ScenarioKind,
    pub battery_name: String,
    pub battery: BatteryConfig,
    pub signals: Signals,
    pub weights: ObjectiveWeights,
    pub eod: EodPolicy,
    pub history_len: usize,
    pub episode_days: usize,
    /// Microgrid only: sell surplus instead of curtailing it.
    pub mg_export: bool,
    pub bidding: Option<BiddingSetup>,
}

impl EnvSpec {
    pub fn arbitrage(battery: BatteryConfig, signals: Signals, weights: ObjectiveWeights) -> Self {
        EnvSpec {
            kind: ScenarioKind::Ea,
            battery_name: "battery".into(),
            battery,
            signals,
            weights,
            eod: EodPolicy::Mask,
            history_len: DEFAULT_HISTORY_LEN,
            episode_days: 1,
            mg_export: false,
            bidding: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Observation {
    pub price: f64,
    pub carbon: f64,
    pub demand: f64,
    pub generation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub now: Timestamp,
    pub battery: BatteryState,
    pub history: VecDeque<Observation>,
    pub ledger: Option<BiddingLedger>,
}

/// Decisions for one step: the battery action and any market bids.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub action: BatteryAction,
    pub bids: Vec<Bid>,
}

impl From<BatteryAction> for StepInput {
    fn from(action: BatteryAction) -> Self {
        StepInput { action, bids: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: RewardComponents,
    pub done: bool,
    pub dispatch: Option<DispatchResult>,
    pub delivery: Option<Delivery>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    spec: Arc<EnvSpec>,
    state: EnvState,
    episode_end: usize,
}

impl Environment {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.signals.validate()?;
        spec.battery.validate()?;
        spec.weights.validate()?;
        if spec.episode_days == 0 {
            return Err(Error::param("scenario.episode_days", "must be positive"));
        }
        if let EodPolicy::Penalty(x) = spec.eod {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::param("scenario.eod_policy", "penalty must be finite and >= 0"));
            }
        }
        if (spec.kind == ScenarioKind::Bo) != spec.bidding.is_some() {
            return Err(Error::config("scenario.kind", "bidding setup is required for, and only for, kind bo"));
        }
        let battery = BatteryState::initial(&spec.battery);
        let start = spec.signals.start.expect("validated");
        let ledger = spec.bidding.as_ref().map(|_| BiddingLedger::new(spec.steps_per_day()));
        let mut env = Environment {
            state: EnvState { t: 0, now: start, battery, history: VecDeque::new(), ledger },
            episode_end: 0,
            spec: Arc::new(spec),
        };
        env.episode_end = env.compute_episode_end(0);
        Ok(env)
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn kind(&self) -> ScenarioKind {
        self.spec.kind
    }

    pub fn battery_config(&self) -> &BatteryConfig {
        &self.spec.battery
    }

    pub fn weights(&self) -> &ObjectiveWeights {
        &self.spec.weights
    }

    pub fn signals(&self) -> &Signals {
        &self.spec.signals
    }

    pub fn dt_min(&self) -> u32 {
        self.spec.signals.dt_min
    }

    /// Total number of steps in the data.
    pub fn len(&self) -> usize {
        self.spec.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps_per_day(&self) -> usize {
        self.spec.steps_per_day()
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        self.spec.timestamp(t)
    }

    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        let m = ts.minutes_since(self.timestamp(0));
        let dt = self.dt_min() as i64;
        (m >= 0 && m % dt == 0 && ((m / dt) as usize) < self.len()).then_some((m / dt) as usize)
    }

    /// Position of step `t` within its calendar day.
    pub fn slot_of_day(&self, t: usize) -> usize {
        self.timestamp(t).minute_of_day() as usize / self.dt_min() as usize
    }

    /// Whether step `t` is the last one before midnight.
    pub fn is_day_end(&self, t: usize) -> bool {
        self.timestamp(t + 1).minute_of_day() == 0
    }

    pub fn episode_end(&self) -> usize {
        self.episode_end
    }

    pub fn is_done(&self) -> bool {
        self.state.t >= self.episode_end
    }

    fn compute_episode_end(&self, t: usize) -> usize {
        let spd = self.steps_per_day();
        let to_midnight = spd - self.slot_of_day(t);
        (t + to_midnight + (self.spec.episode_days - 1) * spd).min(self.len())
    }

    /// Start an episode at step `t` with the given battery state. The
    /// episode runs to the end of the configured number of calendar days.
    pub fn reset(&mut self, t: usize, battery: BatteryState) -> Result<()> {
        if t >= self.len() {
            return Err(Error::OutOfRange(format!("reset at step {t} of {}", self.len())));
        }
        self.state.t = t;
        self.state.now = self.timestamp(t);
        self.state.battery = battery;
        self.state.history.clear();
        self.episode_end = self.compute_episode_end(t);
        Ok(())
    }

    /// Reset to the first step with a fresh battery and empty ledger.
    pub fn reset_initial(&mut self) {
        self.state.ledger = self.spec.bidding.as_ref().map(|_| BiddingLedger::new(self.steps_per_day()));
        self.reset(0, BatteryState::initial(&self.spec.battery)).expect("non-empty");
    }

    /// Battery actions within bounds whose post-step state can still reach
    /// the end-of-day floor by charging. Falls back to the bound-feasible set
    /// when the floor is already out of reach.
    pub fn feasible_actions(&self) -> Vec<BatteryAction> {
        let cfg = &self.spec.battery;
        let st = &self.state.battery;
        let dt = self.dt_min();
        let bounded = battery_feasible_actions(st, cfg, dt);
        if matches!(self.spec.eod, EodPolicy::Penalty(_)) {
            return bounded;
        }
        let remaining = self.steps_per_day() - 1 - self.slot_of_day(self.state.t);
        let masked: Vec<BatteryAction> = bounded
            .iter()
            .copied()
            .filter(|&a| {
                let soc = cfg.next_soc(st.soc, a, dt, st.capacity_kwh).expect("bound-feasible");
                floor_reachable(cfg, soc, st.capacity_kwh, dt, remaining)
            })
            .collect();
        if masked.is_empty() {
            bounded
        } else {
            masked
        }
    }

    /// Market decisions whose deadline is the current step.
    pub fn due_decisions(&self) -> Vec<DecisionSlot> {
        match &self.spec.bidding {
            Some(setup) => decision_slots(&setup.unit, self.state.now)
                .into_iter()
                .filter(|d| d.deadline == self.state.now)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn step(&mut self, input: &StepInput) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        let spec = Arc::clone(&self.spec);
        let t = self.state.t;
        let now = self.state.now;
        let dt = self.dt_min();
        let cfg = &spec.battery;
        let sig = &spec.signals;

        if !input.bids.is_empty() && spec.bidding.is_none() {
            return Err(Error::param("bids", "this scenario has no markets to bid in"));
        }
        let applied = battery_apply_action(&self.state.battery, cfg, input.action, dt)?;
        let mut eod_penalty = 0.0;
        if self.is_day_end(t) && applied.state.soc < cfg.soc_min_eod - SOC_TOL {
            match spec.eod {
                EodPolicy::Mask => {
                    return Err(Error::InfeasibleAction {
                        action: input.action.to_string(),
                        soc: self.state.battery.soc,
                        reason: format!("end-of-day soc {} below minimum {}", applied.state.soc, cfg.soc_min_eod),
                    })
                }
                EodPolicy::Penalty(x) => eod_penalty = x,
            }
        }

        let alpha = self.state.battery.alpha;
        let h = dt as f64 / 60.0;
        let (mut reward, dispatch, delivery) = match spec.kind {
            ScenarioKind::Ea => (
                reward_components(input.action, sig.price[t], sig.carbon[t], alpha, cfg, dt, &spec.weights),
                None,
                None,
            ),
            ScenarioKind::Mg => {
                let step = MgStep {
                    price: sig.price[t],
                    carbon: sig.carbon[t],
                    demand_kwh: sig.demand[t] * h,
                    solar_kwh: sig.generation[t] * h,
                    alpha,
                    export: spec.mg_export,
                };
                let (r, d) = mg_step_reward(input.action, step, cfg, dt, &spec.weights);
                (r, Some(d), None)
            }
            ScenarioKind::Bo => {
                let setup = spec.bidding.as_ref().expect("checked at construction");
                let open = decision_slots(&setup.unit, now);
                let slot_of_day = self.slot_of_day(t);
                let day_end = self.is_day_end(t) || t + 1 == self.len();
                // work on a copy so a rejected step leaves the ledger untouched
                let mut ledger = self.state.ledger.clone().expect("bo ledger");
                bidding::place_bids(setup, &mut ledger, &open, &input.bids, now, |ts| spec.index_of(ts))?;
                let delivery = bidding::deliver_step(
                    setup,
                    &mut ledger,
                    bidding::StepContext {
                        t,
                        now,
                        slot_of_day,
                        day_end,
                        generation_kwh: sig.generation[t] * h,
                        demand_kwh: sig.demand[t] * h,
                        battery_flow_kwh: applied.grid_energy_kwh,
                        carbon: sig.carbon[t],
                    },
                )?;
                self.state.ledger = Some(ledger);
                let r = RewardComponents::new(
                    delivery.revenue - delivery.purchase_cost,
                    -sig.carbon[t] * delivery.deficit_kwh,
                    alpha * applied.grid_energy_kwh.abs(),
                    delivery.dsm_penalty + delivery.contract_penalty,
                    &spec.weights,
                );
                (r, None, Some(delivery))
            }
        };
        if eod_penalty > 0.0 {
            reward = RewardComponents::new(
                reward.r_price,
                reward.r_carbon,
                reward.r_deg,
                reward.penalty + eod_penalty,
                &spec.weights,
            );
        }

        let mut battery = applied.state;
        let window = cfg.degradation.window_steps;
        if (t + 1).is_multiple_of(window) {
            battery = battery_close_degradation_window(&battery, cfg)?;
        }
        self.state.battery = battery;
        if spec.history_len > 0 {
            if self.state.history.len() == spec.history_len {
                self.state.history.pop_front();
            }
            self.state.history.push_back(Observation {
                price: sig.price[t],
                carbon: sig.carbon[t],
                demand: sig.demand[t],
                generation: sig.generation[t],
            });
        }
        self.state.t = t + 1;
        self.state.now = self.timestamp(t + 1);
        Ok(StepOutcome { reward, done: self.is_done(), dispatch, delivery })
    }

    /// Planning model from the current state over the next `n` steps.
    pub fn horizon_model(&self, n: usize) -> Result<HorizonModel> {
        self.horizon_model_at(self.state.t, n, self.state.battery, SignalSource::Forecast)
    }

    /// Planning model over steps `[t0, t0 + n)` starting from `initial`.
    pub fn horizon_model_at(
        &self,
        t0: usize,
        n: usize,
        initial: BatteryState,
        source: SignalSource,
    ) -> Result<HorizonModel> {
        if n == 0 || t0 + n > self.len() {
            return Err(Error::HorizonExceedsData { horizon: n, available: self.len().saturating_sub(t0) });
        }
        let spec = &self.spec;
        let sig = &spec.signals;
        let cfg = &spec.battery;
        let dt = self.dt_min();
        let h = dt as f64 / 60.0;
        let pick = |actual: &Vec<f64>, fc: &Vec<f64>, t: usize| match source {
            SignalSource::Actual => actual[t],
            SignalSource::Forecast => fc[t],
        };
        let mut rewards = Vec::with_capacity(n);
        for t in t0..t0 + n {
            let p = pick(&sig.price, &sig.price_forecast, t);
            let c = pick(&sig.carbon, &sig.carbon_forecast, t);
            let row = BatteryAction::ALL.map(|a| match spec.kind {
                ScenarioKind::Ea => reward_components(a, p, c, initial.alpha, cfg, dt, &spec.weights).r_net,
                ScenarioKind::Mg => {
                    let step = MgStep {
                        price: p,
                        carbon: c,
                        demand_kwh: pick(&sig.demand, &sig.demand_forecast, t) * h,
                        solar_kwh: pick(&sig.generation, &sig.generation_forecast, t) * h,
                        alpha: initial.alpha,
                        export: spec.mg_export,
                    };
                    mg_step_reward(a, step, cfg, dt, &spec.weights).0.r_net
                }
                ScenarioKind::Bo => bidding::planning_reward(
                    spec.bidding.as_ref().expect("bo"),
                    a,
                    bidding::PlanningStep {
                        t,
                        generation_kwh: pick(&sig.generation, &sig.generation_forecast, t) * h,
                        demand_kwh: pick(&sig.demand, &sig.demand_forecast, t) * h,
                        alpha: initial.alpha,
                        source,
                    },
                    cfg,
                    dt,
                    &spec.weights,
                ),
            });
            rewards.push(row);
        }
        Ok(HorizonModel {
            battery: *cfg,
            initial,
            dt_min: dt,
            rewards,
            day_end: (t0..t0 + n).map(|t| self.is_day_end(t)).collect(),
            eod_penalty: match spec.eod {
                EodPolicy::Mask => None,
                EodPolicy::Penalty(x) => Some(spec.weights.w_price * x),
            },
            tail_steps: None,
        })
    }
}

impl EnvSpec {
    pub fn steps_per_day(&self) -> usize {
        (1440 / self.signals.dt_min) as usize
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        self.signals.start.expect("validated").add_minutes(t as i64 * self.signals.dt_min as i64)
    }

    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        let m = ts.minutes_since(self.timestamp(0));
        let dt = self.signals.dt_min as i64;
        (m >= 0 && m % dt == 0 && ((m / dt) as usize) < self.signals.len()).then_some((m / dt) as usize)
    }
}
