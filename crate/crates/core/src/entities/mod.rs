//! Entity abstractions: sources, storage, consumers and markets.

pub mod battery;
pub mod market;

pub use battery::{
    battery_apply_action, battery_close_degradation_window, battery_feasible_actions, BatteryAction, BatteryConfig,
    BatteryState, BatteryStep, DegradationConfig, SOC_TOL,
};
pub use market::{
    market_next_deadline, ClockTime, Commitment, CommitmentStatus, Deadline, MarketEntity, MarketSchedule, Recurrence,
};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Weather-driven generator (solar, wind, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceEntity {
    pub name: String,
    pub max_capacity_kw: f64,
    pub forecast_generation: TimeSeries,
    pub actual_generation: Option<TimeSeries>,
}

impl SourceEntity {
    pub fn new(
        name: impl Into<String>,
        max_capacity_kw: f64,
        forecast_generation: TimeSeries,
        actual_generation: Option<TimeSeries>,
    ) -> Result<Self> {
        let name = name.into();
        if !(max_capacity_kw >= 0.0) {
            return Err(Error::param(format!("{name}.max_capacity_kw"), "must be >= 0"));
        }
        for ts in std::iter::once(&forecast_generation).chain(actual_generation.as_ref()) {
            if let Some(v) = ts.values().iter().find(|&&v| v < 0.0 || v > max_capacity_kw) {
                return Err(Error::param(
                    format!("{name}.generation"),
                    format!("value {v} outside [0, {max_capacity_kw}]"),
                ));
            }
        }
        Ok(SourceEntity { name, max_capacity_kw, forecast_generation, actual_generation })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerEntity {
    pub name: String,
    pub demand_forecast: TimeSeries,
    pub demand_actual: TimeSeries,
}

impl ConsumerEntity {
    pub fn new(name: impl Into<String>, demand_forecast: TimeSeries, demand_actual: TimeSeries) -> Result<Self> {
        let name = name.into();
        for ts in [&demand_forecast, &demand_actual] {
            if ts.values().iter().any(|&v| v < 0.0) {
                return Err(Error::param(format!("{name}.demand"), "demand must be >= 0"));
            }
        }
        Ok(ConsumerEntity { name, demand_forecast, demand_actual })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryEntity {
    pub name: String,
    pub config: BatteryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Source,
    Storage,
    Consumer,
    Market,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entity {
    Source(SourceEntity),
    Battery(BatteryEntity),
    Consumer(ConsumerEntity),
    Market(MarketEntity),
}

impl Entity {
    pub fn name(&self) -> &str {
        match self {
            Entity::Source(e) => &e.name,
            Entity::Battery(e) => &e.name,
            Entity::Consumer(e) => &e.name,
            Entity::Market(e) => &e.name,
        }
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            Entity::Source(_) => EntityKind::Source,
            Entity::Battery(_) => EntityKind::Storage,
            Entity::Consumer(_) => EntityKind::Consumer,
            Entity::Market(_) => EntityKind::Market,
        }
    }

    /// Step of the entity's data, if it carries any series.
    pub fn granularity_min(&self) -> Option<u32> {
        match self {
            Entity::Source(e) => Some(e.forecast_generation.granularity_min()),
            Entity::Battery(_) => None,
            Entity::Consumer(e) => Some(e.demand_actual.granularity_min()),
            Entity::Market(e) => Some(e.price_actual.granularity_min()),
        }
    }

    pub fn as_market(&self) -> Option<&MarketEntity> {
        match self {
            Entity::Market(m) => Some(m),
            _ => None,
        }
    }
}
