//! Shared builders for integration tests.
#![allow(dead_code)]

use voltplan_core::*;

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

/// Lossless battery with an open floor, matching the small hand-worked
/// instances.
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

pub fn synthetic(days: usize, granularity_min: u32, seed: u64) -> TabularBackend {
    generate(&SyntheticSpec { days, granularity_min, seed, ..Default::default() }).unwrap()
}

pub fn grid_market(name: &str, t: &TabularBackend, schedule: Option<MarketSchedule>) -> Entity {
    let price = t.column("price").unwrap().clone();
    let carbon = t.column("carbon").unwrap().clone();
    Entity::Market(MarketEntity {
        name: name.into(),
        schedule,
        price_forecast: price.clone(),
        price_actual: price,
        carbon_forecast: Some(carbon.clone()),
        carbon_actual: Some(carbon),
    })
}

pub fn battery_entity(cfg: BatteryConfig) -> Entity {
    Entity::Battery(BatteryEntity { name: "battery".into(), config: cfg })
}

pub fn solar(t: &TabularBackend) -> Entity {
    let s = t.column("solar").unwrap().clone();
    Entity::Source(SourceEntity::new("solar", 5.0, s.clone(), Some(s)).unwrap())
}

pub fn house(t: &TabularBackend) -> Entity {
    let d = t.column("demand").unwrap().clone();
    Entity::Consumer(ConsumerEntity::new("house", d.clone(), d).unwrap())
}

pub fn run_config(scenario: ScenarioConfig, optimizer: OptimizerKind) -> RunConfig {
    RunConfig {
        scenario,
        optimizer,
        sa: SAParams::default(),
        q: QParams::default(),
        mpc: MpcParams::default(),
        forecaster: ForecasterSpec::Accurate,
    }
}

pub fn ea(t: &TabularBackend, cfg: BatteryConfig, weights: ObjectiveWeights) -> ScenarioConfig {
    let mut s = ScenarioConfig::new(ScenarioKind::Ea, vec![battery_entity(cfg), grid_market("grid", t, None)]);
    s.weights = weights;
    s
}

pub fn mg(t: &TabularBackend, cfg: BatteryConfig) -> ScenarioConfig {
    ScenarioConfig::new(ScenarioKind::Mg, vec![battery_entity(cfg), grid_market("grid", t, None), solar(t), house(t)])
}

/// Bidding site on a 15-minute grid with a day-ahead and a real-time market.
pub fn bo(t: &TabularBackend, cfg: BatteryConfig) -> ScenarioConfig {
    let mut s = ScenarioConfig::new(
        ScenarioKind::Bo,
        vec![
            battery_entity(cfg),
            grid_market("dam", t, Some(MarketSchedule::day_ahead())),
            grid_market("rtm", t, Some(MarketSchedule::real_time())),
            solar(t),
            house(t),
        ],
    );
    s.dsm_rate = 1.0;
    s
}

pub fn series(prices: &[f64]) -> TimeSeries {
    TimeSeries::new(Timestamp::ymd_hm(2024, 1, 1, 0, 0), 60, prices.to_vec(), "").unwrap()
}

/// Hourly arbitrage environment on explicit prices and carbon.
pub fn ea_env(cfg: BatteryConfig, prices: &[f64], carbon: &[f64], weights: ObjectiveWeights) -> Environment {
    let mut signals = Signals::prices(Timestamp::ymd_hm(2024, 1, 1, 0, 0), 60, prices.to_vec(), prices.to_vec());
    signals.carbon = carbon.to_vec();
    signals.carbon_forecast = carbon.to_vec();
    Environment::new(EnvSpec::arbitrage(cfg, signals, weights)).unwrap()
}
