//! Fixtures shared by the optimizer benchmarks.

use voltplan_core::{
    build_scenario, generate, BatteryConfig, BatteryEntity, DegradationConfig, Entity, Environment, MarketEntity,
    Result, ScenarioConfig, ScenarioKind, SyntheticSpec,
};

pub fn battery() -> BatteryConfig {
    BatteryConfig {
        capacity_kwh: 10.0,
        eta_ch: 0.95,
        eta_dis: 0.95,
        pmax_ch_kw: -2.5,
        pmax_dis_kw: 2.5,
        dod: 0.9,
        soc_max: 1.0,
        soc_min_eod: 0.5,
        soc_init: 0.5,
        degradation: DegradationConfig {
            fade_kwh_per_kwh_throughput: 1e-4,
            replacement_cost_per_kwh: 50.0,
            window_steps: 24,
        },
    }
}

/// Arbitrage environment on seeded synthetic prices with accurate
/// forecasts. `granularity_min` sets the steps per day.
pub fn arbitrage_env(days: usize, granularity_min: u32, seed: u64) -> Result<Environment> {
    let table = generate(&SyntheticSpec { days, granularity_min, seed, ..Default::default() })?;
    let price = table.column("price")?.clone();
    let carbon = table.column("carbon")?.clone();
    let market = MarketEntity {
        name: "grid".into(),
        schedule: None,
        price_forecast: price.clone(),
        price_actual: price,
        carbon_forecast: Some(carbon.clone()),
        carbon_actual: Some(carbon),
    };
    let scenario = ScenarioConfig::new(
        ScenarioKind::Ea,
        vec![Entity::Battery(BatteryEntity { name: "battery".into(), config: battery() }), Entity::Market(market)],
    );
    Ok(build_scenario(&scenario)?.env)
}
