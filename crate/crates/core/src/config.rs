//! TOML run configuration: scenario settings, a data table, entity sections
//! keyed by name, contracts and optimizer parameters. Any value can be
//! overridden with `section.key=value` pairs before the file is interpreted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::contracts::Contract;
use crate::entities::{
    BatteryConfig, BatteryEntity, ConsumerEntity, Entity, MarketEntity, MarketSchedule, SourceEntity,
};
use crate::environment::{EodPolicy, ObjectiveWeights, ScenarioKind};
use crate::error::{Error, Result};
use crate::forecasting::{forecast_series, ForecasterSpec};
use crate::optimizers::{MpcParams, OptimizerKind, QParams, SAParams};
use crate::scenarios::{PriceScaling, ScenarioConfig};
use crate::timeseries::{load_table, TabularBackend, TimeSeries};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: ScenarioSection,
    pub data: DataSection,
    pub battery: BatterySection,
    #[serde(default)]
    pub solar: BTreeMap<String, SourceSection>,
    #[serde(default)]
    pub source: BTreeMap<String, SourceSection>,
    #[serde(default)]
    pub market: BTreeMap<String, MarketSection>,
    #[serde(default)]
    pub consumer: BTreeMap<String, ConsumerSection>,
    #[serde(default)]
    pub contracts: Vec<Contract>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub weights: ObjectiveWeights,
    #[serde(default)]
    pub forecaster: ForecasterSpec,
    #[serde(default)]
    pub price_scaling: PriceScaling,
    #[serde(default = "one_day")]
    pub episode_days: usize,
    #[serde(default = "default_history")]
    pub history_len: usize,
    /// Price a missed end-of-day floor instead of masking it.
    #[serde(default)]
    pub eod_penalty: Option<f64>,
    #[serde(default)]
    pub mg_export: bool,
    #[serde(default)]
    pub dsm_rate: f64,
    #[serde(default)]
    pub producer: Option<String>,
}

fn one_day() -> usize {
    1
}

fn default_history() -> usize {
    crate::environment::DEFAULT_HISTORY_LEN
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV file, relative to the config file.
    pub path: PathBuf,
    #[serde(default = "default_ts_column")]
    pub timestamp_column: String,
}

fn default_ts_column() -> String {
    "timestamp".into()
}

/// Battery fields plus an optional `name`.
#[derive(Debug, Clone)]
pub struct BatterySection {
    pub name: String,
    pub config: BatteryConfig,
}

impl<'de> Deserialize<'de> for BatterySection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut table = toml::Table::deserialize(d)?;
        let name = match table.remove("name") {
            Some(toml::Value::String(s)) => s,
            Some(other) => return Err(D::Error::custom(format!("battery name must be a string, got {other}"))),
            None => default_battery_name(),
        };
        let config =
            BatteryConfig::deserialize(toml::Value::Table(table)).map_err(|e| D::Error::custom(e.message()))?;
        Ok(BatterySection { name, config })
    }
}

fn default_battery_name() -> String {
    "battery".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub max_capacity_kw: f64,
    pub column: String,
    /// Precomputed forecast column; otherwise the scenario forecaster.
    #[serde(default)]
    pub forecast_column: Option<String>,
    #[serde(default)]
    pub forecaster: Option<ForecasterSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerSection {
    pub column: String,
    #[serde(default)]
    pub forecast_column: Option<String>,
    #[serde(default)]
    pub forecaster: Option<ForecasterSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub price_column: String,
    #[serde(default)]
    pub price_forecast_column: Option<String>,
    #[serde(default)]
    pub carbon_column: Option<String>,
    #[serde(default)]
    pub carbon_forecast_column: Option<String>,
    #[serde(default)]
    pub schedule: Option<MarketSchedule>,
    #[serde(default)]
    pub forecaster: Option<ForecasterSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub sa: SAParams,
    #[serde(default)]
    pub q: QParams,
    #[serde(default)]
    pub mpc: MpcParams,
}

/// Everything a run needs, resolved from a config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub optimizer: OptimizerKind,
    pub sa: SAParams,
    pub q: QParams,
    pub mpc: MpcParams,
    pub forecaster: ForecasterSpec,
}

impl RunConfig {
    /// Reseed every stochastic component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sa.seed = seed;
        self.q.seed = seed;
        if let crate::optimizers::InnerSolver::Sa(p) = &mut self.mpc.inner {
            p.seed = seed;
        }
        self
    }
}

/// Parse `section.key=value`. The value is read as a TOML literal and
/// falls back to a plain string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = s.split_once('=').ok_or_else(|| Error::config(s, "override must look like section.key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::config(key, "empty path segment"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

/// Set `path` in `table` to `value`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::config("", "empty override path"))?;
    let mut cur = table;
    for (i, seg) in parents.iter().enumerate() {
        let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::config(path[..=i].join("."), "is not a section"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Parse config text with overrides applied.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<FileConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.message()))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut table, &path, value)?;
    }
    FileConfig::deserialize(toml::Value::Table(table)).map_err(|e| Error::config(error_path(&e), e.message()))
}

fn error_path(e: &toml::de::Error) -> String {
    // the message names the offending key; the span is lost after overrides
    let msg = e.message();
    msg.split('`').nth(1).map_or_else(|| "<file>".into(), str::to_string)
}

/// Read a config file, apply overrides and load its data.
pub fn load_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let file = parse_config(&text, overrides)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let data_path = base.join(&file.data.path);
    let table = load_table(&data_path, &file.data.timestamp_column, &[])?;
    resolve(file, &table)
}

/// Stable per-column offset so noisy forecasts of different series differ.
fn column_seed(spec: &ForecasterSpec, column: &str) -> ForecasterSpec {
    match spec {
        ForecasterSpec::Noise { sigma, seed } => {
            let h = column.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x1000_0000_01b3));
            ForecasterSpec::Noise { sigma: *sigma, seed: seed.wrapping_add(h) }
        }
        other => other.clone(),
    }
}

fn series_forecast(
    table: &TabularBackend,
    actual: &TimeSeries,
    column: &str,
    forecast_column: Option<&String>,
    spec: &ForecasterSpec,
    clamp: (f64, f64),
) -> Result<TimeSeries> {
    let fc = match forecast_column {
        Some(c) => table.column(c)?.clone(),
        None => forecast_series(&column_seed(spec, column), actual)?
            .ok_or_else(|| Error::InsufficientData(format!("no full day of history to forecast `{column}`")))?,
    };
    fc.map(|v| v.clamp(clamp.0, clamp.1))
}

/// Turn a parsed config and its data table into a runnable configuration.
pub fn resolve(file: FileConfig, table: &TabularBackend) -> Result<RunConfig> {
    let sc = &file.scenario;
    sc.weights.validate().map_err(|e| Error::config("scenario.weights", e.to_string()))?;
    sc.forecaster.validate().map_err(|e| Error::config("scenario.forecaster", e.to_string()))?;
    let spec_for = |own: &Option<ForecasterSpec>| own.clone().unwrap_or_else(|| sc.forecaster.clone());
    let free = (f64::NEG_INFINITY, f64::INFINITY);

    let mut entities = Vec::new();
    file.battery.config.validate().map_err(|e| Error::config("battery", e.to_string()))?;
    entities.push(Entity::Battery(BatteryEntity { name: file.battery.name.clone(), config: file.battery.config }));

    for (name, m) in &file.market {
        let spec = spec_for(&m.forecaster);
        let price = table.column(&m.price_column)?.clone();
        let price_forecast =
            series_forecast(table, &price, &m.price_column, m.price_forecast_column.as_ref(), &spec, free)?;
        let (carbon_actual, carbon_forecast) = match &m.carbon_column {
            Some(c) => {
                let actual = table.column(c)?.clone();
                let fc = series_forecast(table, &actual, c, m.carbon_forecast_column.as_ref(), &spec, free)?;
                (Some(actual), Some(fc))
            }
            None => (None, None),
        };
        let market = MarketEntity {
            name: name.clone(),
            schedule: m.schedule,
            price_forecast,
            price_actual: price,
            carbon_forecast,
            carbon_actual,
        };
        market.validate().map_err(|e| Error::config(format!("market.{name}"), e.to_string()))?;
        entities.push(Entity::Market(market));
    }
    for (name, s) in file.solar.iter().chain(&file.source) {
        let actual = table.column(&s.column)?.clone();
        let fc = series_forecast(
            table,
            &actual,
            &s.column,
            s.forecast_column.as_ref(),
            &spec_for(&s.forecaster),
            (0.0, s.max_capacity_kw),
        )?;
        entities.push(Entity::Source(
            SourceEntity::new(name.clone(), s.max_capacity_kw, fc, Some(actual))
                .map_err(|e| Error::config(format!("solar.{name}"), e.to_string()))?,
        ));
    }
    for (name, c) in &file.consumer {
        let actual = table.column(&c.column)?.clone();
        let fc = series_forecast(
            table,
            &actual,
            &c.column,
            c.forecast_column.as_ref(),
            &spec_for(&c.forecaster),
            (0.0, f64::INFINITY),
        )?;
        entities.push(Entity::Consumer(
            ConsumerEntity::new(name.clone(), fc, actual)
                .map_err(|e| Error::config(format!("consumer.{name}"), e.to_string()))?,
        ));
    }

    let eod = match sc.eod_penalty {
        None => EodPolicy::Mask,
        Some(x) => EodPolicy::Penalty(x),
    };
    let scenario = ScenarioConfig {
        kind: sc.kind,
        entities,
        contracts: file.contracts.clone(),
        weights: sc.weights,
        price_scaling: sc.price_scaling,
        eod,
        episode_days: sc.episode_days,
        history_len: sc.history_len,
        mg_export: sc.mg_export,
        dsm_rate: sc.dsm_rate,
        producer: sc.producer.clone(),
    };
    let optimizer = match &file.optimizer.kind {
        Some(k) => k.parse().map_err(|e: Error| Error::config("optimizer.kind", e.to_string()))?,
        None => OptimizerKind::Exact,
    };
    Ok(RunConfig {
        scenario,
        optimizer,
        sa: file.optimizer.sa,
        q: file.optimizer.q,
        mpc: file.optimizer.mpc,
        forecaster: sc.forecaster.clone(),
    })
}
