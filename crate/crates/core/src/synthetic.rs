//! Seeded synthetic market and site data. Prices peak in the morning and
//! evening, while carbon intensity is highest overnight and dips with
//! midday solar, so cheap and clean hours do not coincide.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{TabularBackend, TimeSeries, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub start: Timestamp,
    pub days: usize,
    pub granularity_min: u32,
    pub seed: u64,
    /// Mean price level.
    pub price_level: f64,
    /// Mean carbon intensity.
    pub carbon_level: f64,
    pub solar_kw: f64,
    pub demand_kw: f64,
    /// Relative noise on every signal.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            start: Timestamp::ymd_hm(2024, 1, 1, 0, 0),
            days: 30,
            granularity_min: 60,
            seed: 0,
            price_level: 50.0,
            carbon_level: 250.0,
            solar_kw: 5.0,
            demand_kw: 2.0,
            noise: 0.1,
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let d = (hour - centre + 12.0).rem_euclid(24.0) - 12.0;
    (-0.5 * (d / width).powi(2)).exp()
}

fn solar_shape(hour: f64) -> f64 {
    if (6.0..18.0).contains(&hour) {
        (PI * (hour - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Columns `price`, `carbon`, `solar` and `demand` on a regular grid.
pub fn generate(spec: &SyntheticSpec) -> Result<TabularBackend> {
    if spec.days == 0 || spec.granularity_min == 0 || 1440 % spec.granularity_min != 0 {
        return Err(Error::param("synthetic", "need days > 0 and a granularity dividing one day"));
    }
    if !(spec.noise >= 0.0) || !(spec.solar_kw >= 0.0) || !(spec.demand_kw >= 0.0) {
        return Err(Error::param("synthetic", "noise and capacities must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::param("synthetic.noise", e.to_string()))?;
    let cloud = Uniform::new_inclusive(0.3, 1.0).map_err(|e| Error::param("synthetic", e.to_string()))?;
    let level = Uniform::new_inclusive(0.8, 1.2).map_err(|e| Error::param("synthetic", e.to_string()))?;
    let spd = (1440 / spec.granularity_min) as usize;
    let n = spec.days * spd;
    let (mut price, mut carbon, mut solar, mut demand) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..spec.days {
        let sky = cloud.sample(&mut rng);
        let day_level = level.sample(&mut rng);
        for k in 0..spd {
            let hour = (k as u32 * spec.granularity_min) as f64 / 60.0;
            let sun = solar_shape(hour) * sky;
            let p = 0.6 + 0.5 * bump(hour, 8.0, 1.5) + 0.9 * bump(hour, 19.0, 2.0) - 0.2 * bump(hour, 3.0, 3.0);
            let c = 1.2 - 0.6 * sun * sky + 0.2 * bump(hour, 3.0, 3.0) - 0.1 * bump(hour, 19.0, 2.0);
            let d = 0.6 + 0.4 * bump(hour, 7.5, 1.5) + 0.7 * bump(hour, 19.5, 2.0);
            price.push(round2(spec.price_level * day_level * p * (1.0 + noise.sample(&mut rng))));
            carbon.push(round2((spec.carbon_level * c * (1.0 + noise.sample(&mut rng))).max(0.0)));
            solar.push(round2((spec.solar_kw * sun * (1.0 + noise.sample(&mut rng))).clamp(0.0, spec.solar_kw)));
            demand.push(round2((spec.demand_kw * d * (1.0 + noise.sample(&mut rng))).max(0.0)));
        }
    }
    let col = |name: &str, v: Vec<f64>| -> Result<(String, TimeSeries)> {
        Ok((name.to_string(), TimeSeries::new(spec.start, spec.granularity_min, v, "")?))
    };
    TabularBackend::new(vec![
        col("price", price)?,
        col("carbon", carbon)?,
        col("solar", solar)?,
        col("demand", demand)?,
    ])
}
