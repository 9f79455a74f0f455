//! Pre-built compositions: energy arbitrage (EA), microgrid (MG) and market
//! bidding (BO). A builder checks the entity mix for its kind, forms the
//! decision unit and assembles an environment over the common data window.

pub mod bidding;
pub mod microgrid;

use serde::{Deserialize, Serialize};

use crate::contracts::{build_decision_units, Contract, DecisionUnit, PenaltyFn, PenaltyKind};
use crate::entities::{BatteryEntity, ConsumerEntity, Entity, EntityKind, MarketEntity, SourceEntity};
use crate::environment::{
    EnvSpec, Environment, EodPolicy, ObjectiveWeights, ScenarioKind, Signals, DEFAULT_HISTORY_LEN,
};
use crate::error::{Error, Result};
use crate::timeseries::{MinMaxScaling, TimeSeries, Timestamp};
use bidding::{BiddingSetup, MarketSignals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceScaling {
    #[default]
    Raw,
    /// Affine map of the observed price range onto [-1, 1].
    Minmax,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub entities: Vec<Entity>,
    /// When empty, every source and battery is contracted to every market
    /// and consumer.
    pub contracts: Vec<Contract>,
    pub weights: ObjectiveWeights,
    pub price_scaling: PriceScaling,
    pub eod: EodPolicy,
    pub episode_days: usize,
    pub history_len: usize,
    pub mg_export: bool,
    pub dsm_rate: f64,
    pub producer: Option<String>,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, entities: Vec<Entity>) -> Self {
        ScenarioConfig {
            kind,
            entities,
            contracts: Vec::new(),
            weights: ObjectiveWeights::default(),
            price_scaling: PriceScaling::Raw,
            eod: EodPolicy::Mask,
            episode_days: 1,
            history_len: DEFAULT_HISTORY_LEN,
            mg_export: false,
            dsm_rate: 0.0,
            producer: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub units: Vec<DecisionUnit>,
    pub env: Environment,
    /// Per market, when prices were scaled.
    pub scaling: Vec<(String, MinMaxScaling)>,
}

/// Contracts linking every supplier to every offtaker.
pub fn default_contracts(entities: &[Entity]) -> Vec<Contract> {
    let suppliers = entities.iter().filter(|e| matches!(e.kind(), EntityKind::Source | EntityKind::Storage));
    let mut out = Vec::new();
    for s in suppliers {
        for o in entities.iter().filter(|e| matches!(e.kind(), EntityKind::Market | EntityKind::Consumer)) {
            out.push(Contract::new(s.name(), o.name()));
        }
    }
    out
}

struct Members<'a> {
    batteries: Vec<&'a BatteryEntity>,
    sources: Vec<&'a SourceEntity>,
    consumers: Vec<&'a ConsumerEntity>,
    markets: Vec<&'a MarketEntity>,
}

fn members(unit: &DecisionUnit) -> Members<'_> {
    let mut m = Members { batteries: vec![], sources: vec![], consumers: vec![], markets: vec![] };
    for e in unit.entities.values() {
        match e {
            Entity::Battery(b) => m.batteries.push(b),
            Entity::Source(s) => m.sources.push(s),
            Entity::Consumer(c) => m.consumers.push(c),
            Entity::Market(k) => m.markets.push(k),
        }
    }
    m
}

fn require(ok: bool, kind: ScenarioKind, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config("entities", format!("scenario {kind} needs {what}")))
    }
}

fn check_mix(kind: ScenarioKind, m: &Members) -> Result<()> {
    require(m.batteries.len() == 1, kind, "exactly one battery")?;
    match kind {
        ScenarioKind::Ea => {
            require(m.markets.len() == 1, kind, "exactly one market")?;
            require(m.sources.is_empty() && m.consumers.is_empty(), kind, "no sources or consumers")
        }
        ScenarioKind::Mg => {
            require(m.markets.len() == 1, kind, "exactly one market")?;
            require(m.consumers.len() == 1, kind, "exactly one consumer")?;
            require(!m.sources.is_empty(), kind, "at least one source")
        }
        ScenarioKind::Bo => {
            require(m.consumers.len() == 1, kind, "exactly one consumer")?;
            require(!m.sources.is_empty(), kind, "at least one source")?;
            require(!m.markets.is_empty(), kind, "at least one market")?;
            require(m.markets.iter().all(|k| k.schedule.is_some()), kind, "a bidding schedule on every market")
        }
    }
}

/// Common window `[start, end)` of all series, which must share one grid.
fn common_window<'a>(series: impl Iterator<Item = &'a TimeSeries>, dt: u32) -> Result<(Timestamp, usize)> {
    let mut start: Option<Timestamp> = None;
    let mut end: Option<Timestamp> = None;
    let mut first: Option<&TimeSeries> = None;
    for s in series {
        if let Some(f) = first {
            if f.grid_index(s.start()).is_none() {
                return Err(Error::InvalidSeries(format!("series starting {} is off the shared grid", s.start())));
            }
        }
        first.get_or_insert(s);
        start = Some(start.map_or(s.start(), |x| x.max(s.start())));
        end = Some(end.map_or(s.end(), |x| x.min(s.end())));
    }
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::InvalidSeries("scenario has no data series".into()));
    };
    let n = end.minutes_since(start) / dt as i64;
    if n < 1 {
        return Err(Error::InsufficientData("data series do not overlap".into()));
    }
    Ok((start, n as usize))
}

fn window(s: &TimeSeries, start: Timestamp, n: usize) -> Result<Vec<f64>> {
    Ok(s.slice(start, n)?.values().to_vec())
}

fn sum_into(acc: &mut [f64], v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}

fn scale_prices(actual: &mut [f64], forecast: &mut [f64]) -> Result<MinMaxScaling> {
    let min = actual.iter().copied().fold(f64::INFINITY, f64::min);
    let max = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = MinMaxScaling::fit(min, max, -1.0, 1.0)?;
    for v in actual.iter_mut().chain(forecast.iter_mut()) {
        *v = s.apply(*v);
    }
    Ok(s)
}

/// Assemble the environment for `cfg`. The entities must form exactly one
/// decision unit holding the mix the scenario kind requires.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let contracts = if cfg.contracts.is_empty() { default_contracts(&cfg.entities) } else { cfg.contracts.clone() };
    let mut units = build_decision_units(&cfg.entities, &contracts)?;
    if units.len() != 1 {
        return Err(Error::config("contracts", format!("entities must form one decision unit, found {}", units.len())));
    }
    units[0].producer = cfg.producer.clone();
    let unit = &units[0];
    let m = members(unit);
    check_mix(cfg.kind, &m)?;
    let dt = unit.granularity_min.ok_or_else(|| Error::config("entities", "no entity carries data"))?;

    let mut series: Vec<&TimeSeries> = Vec::new();
    for k in &m.markets {
        series.extend([&k.price_actual, &k.price_forecast]);
        series.extend(k.carbon_actual.iter().chain(k.carbon_forecast.iter()));
    }
    for s in &m.sources {
        series.push(&s.forecast_generation);
        series.extend(s.actual_generation.iter());
    }
    for c in &m.consumers {
        series.extend([&c.demand_actual, &c.demand_forecast]);
    }
    let (start, n) = common_window(series.into_iter(), dt)?;

    let mut generation = vec![0.0; n];
    let mut generation_forecast = vec![0.0; n];
    for s in &m.sources {
        let fc = window(&s.forecast_generation, start, n)?;
        sum_into(&mut generation, &s.actual_generation.as_ref().map_or(Ok(fc.clone()), |a| window(a, start, n))?);
        sum_into(&mut generation_forecast, &fc);
    }
    let (demand, demand_forecast) = match m.consumers.first() {
        Some(c) => (window(&c.demand_actual, start, n)?, window(&c.demand_forecast, start, n)?),
        None => (vec![0.0; n], vec![0.0; n]),
    };

    let mut scaling = Vec::new();
    let mut market_signals = Vec::new();
    for k in &m.markets {
        let mut price = window(&k.price_actual, start, n)?;
        let mut price_forecast = window(&k.price_forecast, start, n)?;
        if cfg.price_scaling == PriceScaling::Minmax {
            scaling.push((k.name.clone(), scale_prices(&mut price, &mut price_forecast)?));
        }
        market_signals.push((k, price, price_forecast));
    }

    let (market, price, price_forecast) = match cfg.kind {
        ScenarioKind::Bo => {
            let first_daily = market_signals
                .iter()
                .position(|(k, ..)| k.schedule.is_some_and(|s| s.recurrence == crate::entities::Recurrence::Daily));
            &market_signals[first_daily.unwrap_or(0)]
        }
        _ => &market_signals[0],
    };
    let carbon = match &market.carbon_actual {
        Some(c) => window(c, start, n)?,
        None => vec![0.0; n],
    };
    let carbon_forecast = match &market.carbon_forecast {
        Some(c) => window(c, start, n)?,
        None => carbon.clone(),
    };

    let signals = Signals {
        start: Some(start),
        dt_min: dt,
        price: price.clone(),
        price_forecast: price_forecast.clone(),
        carbon,
        carbon_forecast,
        generation,
        generation_forecast,
        demand,
        demand_forecast,
    };

    let battery = m.batteries[0];
    let bidding = match cfg.kind {
        ScenarioKind::Bo => {
            if !(cfg.dsm_rate >= 0.0 && cfg.dsm_rate.is_finite()) {
                return Err(Error::param("scenario.dsm_rate", "must be finite and >= 0"));
            }
            let consumer = &m.consumers[0].name;
            let consumer_penalty = unit
                .contracts
                .iter()
                .find(|c| &c.contractee == consumer && c.penalty.kind != PenaltyKind::None)
                .map_or_else(PenaltyFn::none, |c| c.penalty.clone());
            Some(BiddingSetup {
                unit: unit.clone(),
                markets: market_signals
                    .iter()
                    .map(|(k, p, f)| MarketSignals {
                        name: k.name.clone(),
                        schedule: k.schedule.expect("checked"),
                        price: p.clone(),
                        price_forecast: f.clone(),
                    })
                    .collect(),
                consumer_penalty,
                dsm_rate: cfg.dsm_rate,
                max_deliverable_kw: m.sources.iter().map(|s| s.max_capacity_kw).sum::<f64>()
                    + battery.config.pmax_dis_kw,
            })
        }
        _ => None,
    };
    let spec = EnvSpec {
        kind: cfg.kind,
        battery_name: battery.name.clone(),
        battery: battery.config,
        signals,
        weights: cfg.weights,
        eod: cfg.eod,
        history_len: cfg.history_len,
        episode_days: cfg.episode_days,
        mg_export: cfg.mg_export,
        bidding,
    };
    let env = Environment::new(spec)?;
    Ok(Scenario { kind: cfg.kind, units, env, scaling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::{BatteryConfig, DegradationConfig, MarketSchedule};

    fn uk_battery() -> BatteryConfig {
        BatteryConfig {
            capacity_kwh: 10.0,
            eta_ch: 1.0,
            eta_dis: 1.0,
            pmax_ch_kw: -5.0,
            pmax_dis_kw: 5.0,
            dod: 0.9,
            soc_max: 1.0,
            soc_min_eod: 0.0,
            soc_init: 0.5,
            degradation: DegradationConfig::default(),
        }
    }

    fn series(start: Timestamp, dt: u32, values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(start, dt, values, "").unwrap()
    }

    fn market(name: &str, dt: u32, n: usize, schedule: Option<MarketSchedule>) -> Entity {
        let t0 = Timestamp::ymd_hm(2024, 1, 1, 0, 0);
        let p = series(t0, dt, (0..n).map(|i| (i % 7) as f64).collect());
        Entity::Market(MarketEntity {
            name: name.into(),
            schedule,
            price_forecast: p.clone(),
            price_actual: p,
            carbon_forecast: None,
            carbon_actual: None,
        })
    }

    fn battery() -> Entity {
        Entity::Battery(BatteryEntity { name: "battery".into(), config: uk_battery() })
    }

    fn flat(name: &str, dt: u32, n: usize, v: f64, source: bool) -> Entity {
        let s = series(Timestamp::ymd_hm(2024, 1, 1, 0, 0), dt, vec![v; n]);
        if source {
            Entity::Source(SourceEntity::new(name, 10.0, s.clone(), Some(s)).unwrap())
        } else {
            Entity::Consumer(ConsumerEntity::new(name, s.clone(), s).unwrap())
        }
    }

    #[test]
    fn arbitrage_unit_and_actions() {
        let cfg = ScenarioConfig::new(ScenarioKind::Ea, vec![battery(), market("grid", 60, 48, None)]);
        let sc = build_scenario(&cfg).unwrap();
        assert_eq!(sc.units.len(), 1);
        assert_eq!(sc.units[0].entities.len(), 2);
        assert_eq!(sc.units[0].contracts.len(), 1);
        assert_eq!(sc.env.len(), 48);
        assert!(sc.env.feasible_actions().len() <= 3);
    }

    #[test]
    fn microgrid_needs_its_entities() {
        let cfg = ScenarioConfig::new(ScenarioKind::Mg, vec![battery(), market("grid", 60, 24, None)]);
        assert!(matches!(build_scenario(&cfg), Err(Error::ConfigInvalid { .. })));
        let cfg = ScenarioConfig::new(
            ScenarioKind::Mg,
            vec![
                battery(),
                market("grid", 60, 24, None),
                flat("solar", 60, 24, 2.0, true),
                flat("home", 60, 24, 1.0, false),
            ],
        );
        let sc = build_scenario(&cfg).unwrap();
        assert_eq!(sc.units[0].entities.len(), 4);
        assert_eq!(sc.env.signals().generation, vec![2.0; 24]);
    }

    #[test]
    fn split_units_rejected() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Ea, vec![battery(), market("grid", 60, 24, None)]);
        cfg.contracts = vec![];
        cfg.entities.push(market("other", 60, 24, None));
        assert!(build_scenario(&cfg).is_err());
    }

    #[test]
    fn bidding_decisions_at_two_pm() {
        let n = 96 * 3;
        let cfg = ScenarioConfig::new(
            ScenarioKind::Bo,
            vec![
                battery(),
                market("dam", 15, n, Some(MarketSchedule::day_ahead())),
                market("rtm", 15, n, Some(MarketSchedule::real_time())),
                flat("solar", 15, n, 3.0, true),
                flat("plant", 15, n, 1.0, false),
            ],
        );
        let mut sc = build_scenario(&cfg).unwrap();
        let at = sc.env.index_of(Timestamp::ymd_hm(2024, 1, 1, 14, 0)).unwrap();
        let initial = sc.env.state().battery;
        sc.env.reset(at, initial).unwrap();
        let due = sc.env.due_decisions();
        assert_eq!(due.len(), 2);
        assert_eq!(due[0].slots.len(), 96);
        assert_eq!(due[1].slots, vec![Timestamp::ymd_hm(2024, 1, 1, 15, 0), Timestamp::ymd_hm(2024, 1, 1, 15, 15)]);
        let setup = sc.env.spec().bidding.as_ref().unwrap();
        assert_eq!(setup.max_deliverable_kw, 15.0);
    }

    #[test]
    fn minmax_scaling_maps_onto_unit_range() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Ea, vec![battery(), market("grid", 60, 24, None)]);
        cfg.price_scaling = PriceScaling::Minmax;
        let sc = build_scenario(&cfg).unwrap();
        let p = &sc.env.signals().price;
        assert_eq!(p.iter().copied().fold(f64::INFINITY, f64::min), -1.0);
        assert_eq!(p.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        assert_eq!(sc.scaling.len(), 1);
    }
}
