//! Microgrid energy balance: a consumer served by solar, a battery and the
//! utility grid, priced on grid purchases.

use serde::Serialize;

use crate::entities::{BatteryAction, BatteryConfig};
use crate::environment::{ObjectiveWeights, RewardComponents};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DispatchResult {
    /// Energy bought from the utility grid.
    pub e_ugrid_kwh: f64,
    /// Energy sold back; always zero unless export is enabled.
    pub e_export_kwh: f64,
    pub solar_used_kwh: f64,
    pub solar_curtailed_kwh: f64,
    /// Signed battery flow, positive when discharging.
    pub battery_flow_kwh: f64,
    /// Discharged energy with nowhere to go.
    pub battery_spilled_kwh: f64,
}

impl DispatchResult {
    pub fn charge_load_kwh(&self) -> f64 {
        (-self.battery_flow_kwh).max(0.0)
    }

    pub fn discharge_kwh(&self) -> f64 {
        self.battery_flow_kwh.max(0.0)
    }

    /// Supply minus load; zero up to rounding.
    pub fn imbalance(&self, demand_kwh: f64) -> f64 {
        let supply = self.solar_used_kwh + (self.discharge_kwh() - self.battery_spilled_kwh) + self.e_ugrid_kwh;
        supply - (demand_kwh + self.charge_load_kwh() + self.e_export_kwh)
    }
}

/// Serve demand plus charging load from battery discharge first, then solar,
/// then the grid. Nothing is exported: surplus solar is curtailed and
/// discharge beyond the load is spilled.
pub fn mg_dispatch(demand_kwh: f64, solar_kwh: f64, battery_flow_kwh: f64) -> DispatchResult {
    let discharge = battery_flow_kwh.max(0.0);
    let load = demand_kwh + (-battery_flow_kwh).max(0.0);
    let discharge_used = discharge.min(load);
    let remaining = load - discharge_used;
    let solar_used = solar_kwh.min(remaining);
    DispatchResult {
        e_ugrid_kwh: remaining - solar_used,
        e_export_kwh: 0.0,
        solar_used_kwh: solar_used,
        solar_curtailed_kwh: solar_kwh - solar_used,
        battery_flow_kwh,
        battery_spilled_kwh: discharge - discharge_used,
    }
}

/// Grid-tied variant: any surplus is exported instead of curtailed.
pub fn mg_dispatch_exporting(demand_kwh: f64, solar_kwh: f64, battery_flow_kwh: f64) -> DispatchResult {
    let net = demand_kwh + (-battery_flow_kwh).max(0.0) - solar_kwh - battery_flow_kwh.max(0.0);
    DispatchResult {
        e_ugrid_kwh: net.max(0.0),
        e_export_kwh: (-net).max(0.0),
        solar_used_kwh: solar_kwh,
        solar_curtailed_kwh: 0.0,
        battery_flow_kwh,
        battery_spilled_kwh: 0.0,
    }
}

/// `−Price_t · E_t^Ugrid`, net of exports when they are enabled.
pub fn mg_reward(price: f64, dispatch: &DispatchResult) -> f64 {
    -price * (dispatch.e_ugrid_kwh - dispatch.e_export_kwh)
}

/// Inputs of one microgrid step, all already in per-step energy except
/// where noted.
#[derive(Debug, Clone, Copy)]
pub struct MgStep {
    pub price: f64,
    pub carbon: f64,
    pub demand_kwh: f64,
    pub solar_kwh: f64,
    pub alpha: f64,
    pub export: bool,
}

pub fn mg_step_reward(
    action: BatteryAction,
    step: MgStep,
    cfg: &BatteryConfig,
    dt_min: u32,
    weights: &ObjectiveWeights,
) -> (RewardComponents, DispatchResult) {
    let flow = cfg.grid_energy_kwh(action, dt_min);
    let dispatch = if step.export {
        mg_dispatch_exporting(step.demand_kwh, step.solar_kwh, flow)
    } else {
        mg_dispatch(step.demand_kwh, step.solar_kwh, flow)
    };
    let net = dispatch.e_ugrid_kwh - dispatch.e_export_kwh;
    let r = RewardComponents::new(
        mg_reward(step.price, &dispatch),
        -step.carbon * net,
        step.alpha * flow.abs(),
        0.0,
        weights,
    );
    (r, dispatch)
}
