//! Storage dynamics: feasible action gating, the state-of-charge update and
//! the throughput-based degradation window.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on state-of-charge bound checks.
pub const SOC_TOL: f64 = 1e-9;

const WINDOW_EPS: f64 = 1e-12;

/// The three-level action set: charge at max rate, idle, discharge at max
/// rate. Encodes the binary pair `(C_t, D_t)` with `C_t + D_t <= 1`; finer
/// levels would be added as further fractional pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BatteryAction {
    #[serde(rename = "CHARGE_MAX")]
    Charge,
    Idle,
    #[serde(rename = "DISCHARGE_MAX")]
    Discharge,
}

impl BatteryAction {
    pub const ALL: [BatteryAction; 3] = [BatteryAction::Charge, BatteryAction::Idle, BatteryAction::Discharge];

    /// Tie-break order used by the planners: idle first, then discharge.
    pub const PREFERENCE: [BatteryAction; 3] = [BatteryAction::Idle, BatteryAction::Discharge, BatteryAction::Charge];

    pub fn index(self) -> usize {
        match self {
            BatteryAction::Charge => 0,
            BatteryAction::Idle => 1,
            BatteryAction::Discharge => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// `(C_t, D_t)`.
    pub fn flags(self) -> (f64, f64) {
        match self {
            BatteryAction::Charge => (1.0, 0.0),
            BatteryAction::Idle => (0.0, 0.0),
            BatteryAction::Discharge => (0.0, 1.0),
        }
    }

    pub fn is_idle(self) -> bool {
        self == BatteryAction::Idle
    }
}

impl fmt::Display for BatteryAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatteryAction::Charge => "CHARGE_MAX",
            BatteryAction::Idle => "IDLE",
            BatteryAction::Discharge => "DISCHARGE_MAX",
        })
    }
}

impl std::str::FromStr for BatteryAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CHARGE_MAX" | "CHARGE" | "C" => Ok(BatteryAction::Charge),
            "IDLE" | "I" => Ok(BatteryAction::Idle),
            "DISCHARGE_MAX" | "DISCHARGE" | "D" => Ok(BatteryAction::Discharge),
            other => Err(Error::param("action", format!("unknown action {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationConfig {
    /// Capacity lost per kWh discharged.
    #[serde(default)]
    pub fade_kwh_per_kwh_throughput: f64,
    /// Replacement cost of one kWh of capacity.
    #[serde(default)]
    pub replacement_cost_per_kwh: f64,
    /// Steps per degradation window.
    #[serde(default = "default_window")]
    pub window_steps: usize,
}

fn default_window() -> usize {
    24
}

impl Default for DegradationConfig {
    fn default() -> Self {
        DegradationConfig {
            fade_kwh_per_kwh_throughput: 0.0,
            replacement_cost_per_kwh: 0.0,
            window_steps: default_window(),
        }
    }
}

impl DegradationConfig {
    /// Degradation coefficient implied by the linear fade law; a window with
    /// any discharge always lands on this value.
    pub fn steady_alpha(&self) -> f64 {
        self.replacement_cost_per_kwh * self.fade_kwh_per_kwh_throughput
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Maximum charging power, non-positive by convention.
    pub pmax_ch_kw: f64,
    pub pmax_dis_kw: f64,
    pub dod: f64,
    pub soc_max: f64,
    /// Minimum state of charge required at the end of each day.
    pub soc_min_eod: f64,
    pub soc_init: f64,
    #[serde(default)]
    pub degradation: DegradationConfig,
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, name: &str, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(format!("battery.{name}"), why.to_string()))
            }
        };
        check(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite(), "capacity_kwh", "must be > 0")?;
        check(self.eta_ch > 0.0 && self.eta_ch <= 1.0, "eta_ch", "must lie in (0, 1]")?;
        check(self.eta_dis > 0.0 && self.eta_dis <= 1.0, "eta_dis", "must lie in (0, 1]")?;
        check(self.pmax_ch_kw <= 0.0 && self.pmax_ch_kw.is_finite(), "pmax_ch_kw", "must be <= 0")?;
        check(self.pmax_dis_kw >= 0.0 && self.pmax_dis_kw.is_finite(), "pmax_dis_kw", "must be >= 0")?;
        check(self.dod > 0.0 && self.dod <= 1.0, "dod", "must lie in (0, 1]")?;
        check(self.soc_max > 0.0 && self.soc_max <= 1.0, "soc_max", "must lie in (0, 1]")?;
        check(
            (0.0..=1.0).contains(&self.soc_min_eod) && self.soc_min_eod <= self.soc_max,
            "soc_min_eod",
            "must lie in [0, soc_max]",
        )?;
        check(
            self.soc_init >= self.soc_floor() - SOC_TOL && self.soc_init <= self.soc_max + SOC_TOL,
            "soc_init",
            "must lie in [1 - dod, soc_max]",
        )?;
        let d = &self.degradation;
        check(d.fade_kwh_per_kwh_throughput >= 0.0, "degradation.fade_kwh_per_kwh_throughput", "must be >= 0")?;
        check(d.replacement_cost_per_kwh >= 0.0, "degradation.replacement_cost_per_kwh", "must be >= 0")?;
        check(d.window_steps > 0, "degradation.window_steps", "must be positive")?;
        Ok(())
    }

    /// Lower operating bound `1 - DoD`.
    pub fn soc_floor(&self) -> f64 {
        1.0 - self.dod
    }

    /// `C_t·Pmax_ch + D_t·Pmax_dis` in kW: negative while charging.
    pub fn grid_power_kw(&self, action: BatteryAction) -> f64 {
        let (c, d) = action.flags();
        c * self.pmax_ch_kw + d * self.pmax_dis_kw
    }

    /// Signed energy exchanged with the grid over one step.
    pub fn grid_energy_kwh(&self, action: BatteryAction, dt_min: u32) -> f64 {
        self.grid_power_kw(action) * hours(dt_min)
    }

    /// `ΔSoC = (η_ch·C·Pmax_ch + D/η_dis·Pmax_dis)·Δt / S_t`.
    pub fn delta_soc(&self, action: BatteryAction, dt_min: u32, capacity_kwh: f64) -> f64 {
        let (c, d) = action.flags();
        (self.eta_ch * c * self.pmax_ch_kw + d / self.eta_dis * self.pmax_dis_kw) * hours(dt_min) / capacity_kwh
    }

    /// Post-step state of charge if it stays inside `[1 - DoD, SoC_max]`.
    /// Values within [`SOC_TOL`] of a bound are snapped onto it.
    pub fn next_soc(&self, soc: f64, action: BatteryAction, dt_min: u32, capacity_kwh: f64) -> Option<f64> {
        if action.is_idle() {
            return Some(soc);
        }
        let next = soc - self.delta_soc(action, dt_min, capacity_kwh);
        let (lo, hi) = (self.soc_floor(), self.soc_max);
        if next < lo - SOC_TOL || next > hi + SOC_TOL {
            None
        } else {
            Some(next.clamp(lo, hi))
        }
    }

    /// Largest SoC increase a single charging step can deliver.
    pub fn charge_step(&self, dt_min: u32, capacity_kwh: f64) -> f64 {
        -self.delta_soc(BatteryAction::Charge, dt_min, capacity_kwh)
    }
}

pub fn hours(dt_min: u32) -> f64 {
    dt_min as f64 / 60.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc: f64,
    pub capacity_kwh: f64,
    /// Degradation coefficient, currency per kWh of throughput.
    pub alpha: f64,
    pub discharge_throughput_kwh: f64,
    pub equivalent_cycles: f64,
    pub window_discharge_kwh: f64,
}

impl BatteryState {
    pub fn initial(cfg: &BatteryConfig) -> Self {
        BatteryState {
            soc: cfg.soc_init,
            capacity_kwh: cfg.capacity_kwh,
            alpha: cfg.degradation.steady_alpha(),
            discharge_throughput_kwh: 0.0,
            equivalent_cycles: 0.0,
            window_discharge_kwh: 0.0,
        }
    }
}

/// Result of applying one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStep {
    pub state: BatteryState,
    pub delta_soc: f64,
    pub grid_energy_kwh: f64,
}

/// Actions whose post-step state of charge stays within bounds, in
/// [`BatteryAction::ALL`] order. Idle is always present.
pub fn battery_feasible_actions(state: &BatteryState, cfg: &BatteryConfig, dt_min: u32) -> Vec<BatteryAction> {
    BatteryAction::ALL
        .into_iter()
        .filter(|&a| cfg.next_soc(state.soc, a, dt_min, state.capacity_kwh).is_some())
        .collect()
}

pub fn battery_apply_action(
    state: &BatteryState,
    cfg: &BatteryConfig,
    action: BatteryAction,
    dt_min: u32,
) -> Result<BatteryStep> {
    let soc = cfg.next_soc(state.soc, action, dt_min, state.capacity_kwh).ok_or_else(|| Error::InfeasibleAction {
        action: action.to_string(),
        soc: state.soc,
        reason: format!("post-step soc leaves [{}, {}]", cfg.soc_floor(), cfg.soc_max),
    })?;
    let delta_soc = if action.is_idle() { 0.0 } else { cfg.delta_soc(action, dt_min, state.capacity_kwh) };
    let mut next = BatteryState { soc, ..*state };
    if action == BatteryAction::Discharge {
        let drawn = delta_soc * state.capacity_kwh;
        next.discharge_throughput_kwh += drawn;
        next.window_discharge_kwh += drawn;
    }
    Ok(BatteryStep { state: next, delta_soc, grid_energy_kwh: cfg.grid_energy_kwh(action, dt_min) })
}

/// Close a degradation window: fade capacity linearly in the discharged
/// energy, count equivalent cycles, and reprice α as the capacity lost per
/// discharged kWh times the replacement cost.
pub fn battery_close_degradation_window(state: &BatteryState, cfg: &BatteryConfig) -> Result<BatteryState> {
    let discharged = state.window_discharge_kwh;
    if discharged <= 0.0 {
        return Ok(BatteryState { window_discharge_kwh: 0.0, ..*state });
    }
    let deg = &cfg.degradation;
    let faded = state.capacity_kwh - deg.fade_kwh_per_kwh_throughput * discharged;
    if faded <= 0.0 {
        return Err(Error::CapacityExhausted);
    }
    let alpha = deg.replacement_cost_per_kwh * (state.capacity_kwh - faded) / discharged.max(WINDOW_EPS);
    Ok(BatteryState {
        capacity_kwh: faded,
        alpha,
        equivalent_cycles: state.equivalent_cycles + discharged / (cfg.capacity_kwh * cfg.dod),
        window_discharge_kwh: 0.0,
        ..*state
    })
}
