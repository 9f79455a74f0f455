//! Heuristic forecasters sharing one interface, plus MAE scoring.
//!
//! A forecast is requested for the `horizon_steps` steps starting at `at`,
//! given a series of actuals. Values before `at` are the history; the oracle
//! kinds (`Accurate`, `Noise`) also read the actuals from `at` onward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{TimeSeries, Timestamp};

pub const DEFAULT_MEAN_DAYS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ForecasterSpec {
    /// The true future; simulation only.
    #[default]
    Accurate,
    /// Actuals plus i.i.d. gaussian noise.
    Noise {
        sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Previous day's actuals, slot aligned.
    Yesterday,
    /// Slot-wise mean of the previous `n` days.
    MeanN {
        #[serde(default = "default_mean_days")]
        n: usize,
    },
    /// Externally produced forecasts loaded from a file.
    #[serde(skip)]
    Precomputed(TimeSeries),
}

fn default_mean_days() -> usize {
    DEFAULT_MEAN_DAYS
}

impl ForecasterSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ForecasterSpec::Noise { sigma, .. } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::param("forecaster.sigma", "must be finite and >= 0"))
            }
            ForecasterSpec::MeanN { n: 0 } => Err(Error::param("forecaster.n", "must be >= 1")),
            _ => Ok(()),
        }
    }

    /// Whole days of history needed before the first forecast.
    pub fn warmup_days(&self) -> usize {
        match self {
            ForecasterSpec::Yesterday => 1,
            ForecasterSpec::MeanN { n } => *n,
            _ => 0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ForecasterSpec::Accurate => "accurate".into(),
            ForecasterSpec::Noise { sigma, .. } => format!("noise({sigma})"),
            ForecasterSpec::Yesterday => "yesterday".into(),
            ForecasterSpec::MeanN { n } => format!("mean({n})"),
            ForecasterSpec::Precomputed(_) => "precomputed".into(),
        }
    }
}

/// Gaussian draw tied to `(seed, step)` so overlapping windows agree.
fn noise_at(seed: u64, normal: &Normal<f64>, epoch_minute: i64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch_minute as u64);
    normal.sample(&mut rng)
}

/// Forecast `horizon_steps` values of `actual` starting at `at`.
pub fn forecast(spec: &ForecasterSpec, actual: &TimeSeries, at: Timestamp, horizon_steps: usize) -> Result<TimeSeries> {
    spec.validate()?;
    let idx = actual.grid_index(at).ok_or_else(|| Error::OutOfRange(format!("{at} is not on the series grid")))?;
    if horizon_steps == 0 {
        return Err(Error::OutOfRange("empty forecast horizon".into()));
    }
    let spd = actual.steps_per_day();
    let lagged = |days: usize| -> Result<Vec<f64>> {
        let needed = days * spd;
        if idx < needed as i64 {
            return Err(Error::InsufficientHistory { needed, available: idx.max(0) as usize });
        }
        let base = (idx as usize) - needed;
        (0..horizon_steps)
            .map(|k| {
                let mut acc = 0.0;
                for d in 0..days {
                    // horizons longer than a day repeat the same daily profile
                    let j = base + d * spd + k % spd;
                    acc += *actual
                        .values()
                        .get(j)
                        .ok_or_else(|| Error::InsufficientHistory { needed: j + 1, available: actual.len() })?;
                }
                Ok(acc / days as f64)
            })
            .collect()
    };
    let values = match spec {
        ForecasterSpec::Accurate => actual.slice(at, horizon_steps)?.values().to_vec(),
        ForecasterSpec::Noise { sigma, seed } => {
            let truth = actual.slice(at, horizon_steps)?;
            if *sigma == 0.0 {
                truth.values().to_vec()
            } else {
                let normal = Normal::new(0.0, *sigma).map_err(|e| Error::param("forecaster.sigma", e.to_string()))?;
                truth
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v + noise_at(*seed, &normal, truth.timestamp(k).epoch_minutes()))
                    .collect()
            }
        }
        ForecasterSpec::Yesterday => lagged(1)?,
        ForecasterSpec::MeanN { n } => lagged(*n)?,
        ForecasterSpec::Precomputed(f) => {
            if f.granularity_min() != actual.granularity_min() {
                return Err(Error::GranularityMismatch {
                    entity: "forecast".into(),
                    expected: actual.granularity_min(),
                    found: f.granularity_min(),
                });
            }
            f.slice(at, horizon_steps)?.values().to_vec()
        }
    };
    TimeSeries::new(at, actual.granularity_min(), values, actual.unit())
}

/// Day-by-day forecast of the whole series, starting at the first midnight
/// with enough history. Returns `None` when no day qualifies.
pub fn forecast_series(spec: &ForecasterSpec, actual: &TimeSeries) -> Result<Option<TimeSeries>> {
    spec.validate()?;
    let spd = actual.steps_per_day();
    let start = actual.start();
    let first_midnight = if start == start.midnight() { start } else { start.midnight().add_minutes(1440) };
    let offset = actual.grid_index(first_midnight).unwrap_or(0) as usize;
    let first = offset + spec.warmup_days() * spd;
    if first >= actual.len() {
        return Ok(None);
    }
    let mut values = Vec::with_capacity(actual.len() - first);
    let mut i = first;
    while i < actual.len() {
        let h = spd.min(actual.len() - i);
        values.extend_from_slice(forecast(spec, actual, actual.timestamp(i), h)?.values());
        i += h;
    }
    TimeSeries::new(actual.timestamp(first), actual.granularity_min(), values, actual.unit()).map(Some)
}

/// Mean absolute error.
pub fn mae(forecast: &TimeSeries, actual: &TimeSeries) -> Result<f64> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch { left: forecast.len(), right: actual.len() });
    }
    if forecast.granularity_min() != actual.granularity_min() {
        return Err(Error::GranularityMismatch {
            entity: "forecast".into(),
            expected: actual.granularity_min(),
            found: forecast.granularity_min(),
        });
    }
    let sum: f64 = forecast.values().iter().zip(actual.values()).map(|(f, a)| (f - a).abs()).sum();
    Ok(sum / actual.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_days(values: &[f64]) -> TimeSeries {
        TimeSeries::new(Timestamp::ymd_hm(2024, 1, 1, 0, 0), 720, values.to_vec(), "").unwrap()
    }

    fn at_day(ts: &TimeSeries, d: usize) -> Timestamp {
        ts.timestamp(d * ts.steps_per_day())
    }

    #[test]
    fn yesterday_repeats_previous_day() {
        let ts = half_days(&[1.0, 2.0, 9.0, 9.0]);
        assert_eq!(forecast(&ForecasterSpec::Yesterday, &ts, at_day(&ts, 1), 2).unwrap().values(), &[1.0, 2.0]);
        assert!(matches!(
            forecast(&ForecasterSpec::Yesterday, &ts, at_day(&ts, 0), 2),
            Err(Error::InsufficientHistory { needed: 2, available: 0 })
        ));
    }

    #[test]
    fn mean_n_is_slot_wise() {
        let ts = half_days(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        assert_eq!(forecast(&ForecasterSpec::MeanN { n: 2 }, &ts, at_day(&ts, 2), 2).unwrap().values(), &[2.0, 3.0]);
    }

    #[test]
    fn zero_noise_is_identity() {
        let ts = half_days(&[1.5, -2.0, 3.25, 4.0]);
        let spec = ForecasterSpec::Noise { sigma: 0.0, seed: 9 };
        assert_eq!(forecast(&spec, &ts, ts.start(), 4).unwrap(), ts);
    }

    #[test]
    fn noise_is_seeded() {
        let ts = half_days(&[0.0; 8]);
        let f = |seed| forecast(&ForecasterSpec::Noise { sigma: 1.0, seed }, &ts, ts.start(), 8).unwrap();
        assert_eq!(f(1), f(1));
        assert_ne!(f(1), f(2));
        // a later window sees the same draws as the full one
        let tail = forecast(&ForecasterSpec::Noise { sigma: 1.0, seed: 1 }, &ts, ts.timestamp(3), 5).unwrap();
        assert_eq!(tail.values(), &f(1).values()[3..]);
    }

    #[test]
    fn precomputed_slices_the_file() {
        let ts = half_days(&[1.0, 2.0, 3.0, 4.0]);
        let file = half_days(&[10.0, 20.0, 30.0, 40.0]);
        let got = forecast(&ForecasterSpec::Precomputed(file), &ts, ts.timestamp(1), 2).unwrap();
        assert_eq!(got.values(), &[20.0, 30.0]);
    }

    #[test]
    fn series_skips_warmup() {
        let ts = half_days(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let f = forecast_series(&ForecasterSpec::Yesterday, &ts).unwrap().unwrap();
        assert_eq!(f.start(), at_day(&ts, 1));
        assert_eq!(f.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(forecast_series(&ForecasterSpec::MeanN { n: 3 }, &ts).unwrap().is_none());
        assert_eq!(forecast_series(&ForecasterSpec::Accurate, &ts).unwrap().unwrap(), ts);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&half_days(&[1.0, 2.0]), &half_days(&[2.0, 4.0])).unwrap(), 1.5);
        assert_eq!(mae(&half_days(&[3.0, 4.0]), &half_days(&[3.0, 4.0])).unwrap(), 0.0);
        assert!(matches!(mae(&half_days(&[1.0]), &half_days(&[1.0, 2.0])), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn spec_deserializes() {
        let s: ForecasterSpec = toml::from_str("kind = \"mean_n\"").unwrap();
        assert_eq!(s, ForecasterSpec::MeanN { n: 10 });
        let s: ForecasterSpec = toml::from_str("kind = \"noise\"\nsigma = 2.0\nseed = 3").unwrap();
        assert_eq!(s, ForecasterSpec::Noise { sigma: 2.0, seed: 3 });
    }

    proptest! {
        #[test]
        fn mae_symmetric_and_nonnegative(a in prop::collection::vec(-1e3f64..1e3, 1..30), shift in -5.0f64..5.0) {
            let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let (ta, tb) = (half_days(&a), half_days(&b));
            let ab = mae(&ta, &tb).unwrap();
            prop_assert_eq!(ab, mae(&tb, &ta).unwrap());
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn mean_one_equals_yesterday(values in prop::collection::vec(-1e3f64..1e3, 4..24)) {
            let ts = half_days(&values);
            let n = ts.len() - 2;
            let at = ts.timestamp(2);
            prop_assert_eq!(
                forecast(&ForecasterSpec::MeanN { n: 1 }, &ts, at, n).unwrap(),
                forecast(&ForecasterSpec::Yesterday, &ts, at, n).unwrap()
            );
        }
    }
}
