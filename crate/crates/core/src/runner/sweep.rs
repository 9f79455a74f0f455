//! Parameter sweeps: one independent run per (value, seed), executed in
//! parallel, plus the point where the normalized cost and carbon curves
//! cross.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, Totals};
use crate::config::{load_config, RunConfig};
use crate::entities::Entity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// `alpha` (carbon weight as a multiple of the price weight), a
    /// `weights.*` or `battery.degradation.*` field, or any config key.
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sweep.values", "need at least one finite value"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("sweep.seeds", "need at least one seed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub totals: Option<Totals>,
    pub error: Option<String>,
}

/// Set a sweepable parameter directly on a resolved configuration.
/// Returns `false` for parameters that need the config file.
pub fn apply_parameter(rc: &mut RunConfig, parameter: &str, value: f64) -> Result<bool> {
    let w = &mut rc.scenario.weights;
    match parameter {
        "alpha" => w.w_carbon = value * w.w_price,
        "weights.w_price" | "scenario.weights.w_price" => w.w_price = value,
        "weights.w_carbon" | "scenario.weights.w_carbon" => w.w_carbon = value,
        "weights.w_deg" | "scenario.weights.w_deg" => w.w_deg = value,
        "battery.degradation.replacement_cost_per_kwh" | "battery.degradation.fade_kwh_per_kwh_throughput" => {
            let battery = rc
                .scenario
                .entities
                .iter_mut()
                .find_map(|e| match e {
                    Entity::Battery(b) => Some(b),
                    _ => None,
                })
                .ok_or_else(|| Error::config("battery", "no battery to sweep"))?;
            let d = &mut battery.config.degradation;
            if parameter.ends_with("replacement_cost_per_kwh") {
                d.replacement_cost_per_kwh = value;
            } else {
                d.fade_kwh_per_kwh_throughput = value;
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Run every (value, seed) pair of `spec` on configurations from `build`.
/// A failing run is recorded in its row and the sweep continues.
pub fn sweep_with<F>(spec: &SweepSpec, build: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, u64) -> Result<RunConfig> + Sync,
{
    spec.validate()?;
    let pairs: Vec<(f64, u64)> = spec.values.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect();
    Ok(pairs
        .par_iter()
        .map(|&(value, seed)| match build(value, seed).and_then(|rc| run(&rc)) {
            Ok(session) => SweepRow { value, seed, totals: Some(*session.totals()), error: None },
            Err(e) => {
                log::warn!("sweep run {}={value} seed {seed} failed: {e}", spec.parameter);
                SweepRow { value, seed, totals: None, error: Some(e.to_string()) }
            }
        })
        .collect())
}

/// Sweep a config file. Built-in parameters reuse one loaded config; any
/// other key is applied as an override and the file is reloaded per run.
pub fn sweep_config(path: &Path, overrides: &[String], spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let base = load_config(path, overrides)?;
    let mut probe = base.clone();
    let built_in = apply_parameter(&mut probe, &spec.parameter, spec.values.first().copied().unwrap_or(0.0))?;
    sweep_with(spec, |value, seed| {
        if built_in {
            let mut rc = base.clone();
            apply_parameter(&mut rc, &spec.parameter, value)?;
            Ok(rc.with_seed(seed))
        } else {
            let mut o = overrides.to_vec();
            o.push(format!("{}={value}", spec.parameter));
            Ok(load_config(path, &o)?.with_seed(seed))
        }
    })
}

/// Mean cost and carbon savings per distinct value, in ascending value
/// order, over the successful runs.
pub fn curves(rows: &[SweepRow]) -> Vec<(f64, f64, f64)> {
    let mut values: Vec<f64> = rows.iter().filter(|r| r.totals.is_some()).map(|r| r.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let ok: Vec<&Totals> = rows.iter().filter(|r| r.value == v).filter_map(|r| r.totals.as_ref()).collect();
            let n = ok.len() as f64;
            (
                v,
                ok.iter().map(|t| t.cost_savings).sum::<f64>() / n,
                ok.iter().map(|t| t.carbon_savings).sum::<f64>() / n,
            )
        })
        .collect()
}

fn normalize(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    xs.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
}

/// Normalized (value, cost, carbon) curves, each scaled onto [0, 1].
pub fn normalized_curves(rows: &[SweepRow]) -> Vec<(f64, f64, f64)> {
    let c = curves(rows);
    let cost = normalize(&c.iter().map(|x| x.1).collect::<Vec<_>>());
    let carbon = normalize(&c.iter().map(|x| x.2).collect::<Vec<_>>());
    c.iter().zip(cost).zip(carbon).map(|((x, a), b)| (x.0, a, b)).collect()
}

/// Value where the normalized cost and carbon curves meet, linearly
/// interpolated between the two bracketing sweep values.
pub fn crossing_point(rows: &[SweepRow]) -> Option<f64> {
    let c = normalized_curves(rows);
    let d: Vec<f64> = c.iter().map(|x| x.1 - x.2).collect();
    if d.iter().all(|&x| x == 0.0) {
        return None;
    }
    for i in 0..c.len() {
        if d[i] == 0.0 {
            return Some(c[i].0);
        }
        if i + 1 < c.len() && d[i] * d[i + 1] < 0.0 {
            return Some(c[i].0 + (c[i + 1].0 - c[i].0) * d[i] / (d[i] - d[i + 1]));
        }
    }
    None
}

/// Results table. `crossing` marks the rows whose values bracket the
/// crossing point.
pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let norm = normalized_curves(rows);
    let cross = crossing_point(rows);
    let bracket = |v: f64| {
        cross.is_some_and(|x| {
            let i = norm.iter().position(|n| n.0 == v);
            i.is_some_and(|i| {
                let lo = norm[i].0 <= x && norm.get(i + 1).is_some_and(|n| n.0 >= x);
                let hi = norm[i].0 >= x && i > 0 && norm[i - 1].0 <= x;
                lo || hi || norm[i].0 == x
            })
        })
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "value",
        "seed",
        "status",
        "cost_savings",
        "carbon_savings",
        "degradation_cost",
        "profit",
        "active_actions",
        "cost_norm",
        "carbon_norm",
        "crossing",
    ])?;
    for r in rows {
        let n = norm.iter().find(|n| n.0 == r.value);
        let fmt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let t = r.totals.as_ref();
        w.write_record([
            r.value.to_string(),
            r.seed.to_string(),
            r.error.as_ref().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}")),
            fmt(t.map(|t| t.cost_savings)),
            fmt(t.map(|t| t.carbon_savings)),
            fmt(t.map(|t| t.degradation_cost)),
            fmt(t.map(|t| t.profit)),
            t.map_or_else(String::new, |t| t.active_actions.to_string()),
            fmt(n.map(|n| n.1)),
            fmt(n.map(|n| n.2)),
            if bracket(r.value) { "1".into() } else { "0".into() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, cost: f64, carbon: f64) -> SweepRow {
        let totals = Totals { cost_savings: cost, carbon_savings: carbon, ..Default::default() };
        SweepRow { value, seed: 0, totals: Some(totals), error: None }
    }

    #[test]
    fn crossing_is_interpolated() {
        let rows = vec![row(0.0, 10.0, 0.0), row(1.0, 6.0, 5.0), row(2.0, 0.0, 10.0)];
        // normalized cost 1, 0.6, 0 and carbon 0, 0.5, 1 meet between 1 and 2
        let x = crossing_point(&rows).unwrap();
        assert!((x - (1.0 + 0.1 / 1.1)).abs() < 1e-12, "{x}");
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let marks: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(marks, vec!["0", "1", "1"]);
    }

    #[test]
    fn flat_curves_have_no_crossing() {
        assert_eq!(crossing_point(&[row(0.0, 1.0, 1.0), row(1.0, 1.0, 1.0)]), None);
    }

    #[test]
    fn failures_do_not_stop_the_sweep() {
        let spec = SweepSpec { parameter: "alpha".into(), values: vec![1.0, 2.0], seeds: vec![0] };
        let rows = sweep_with(&spec, |_, _| Err(Error::config("x", "boom"))).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_some()));
        assert!(sweep_with(&SweepSpec { values: vec![], ..spec }, |_, _| unreachable!()).is_err());
    }
}
