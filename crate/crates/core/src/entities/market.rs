//! Market entities: cron-like bid-window schedules and the commitment ledger.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::timeseries::{TimeSeries, Timestamp, MINUTES_PER_DAY};

/// Wall-clock time of day at minute resolution (`HH:MM`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct ClockTime(u32);

impl ClockTime {
    pub fn hm(hour: u32, minute: u32) -> Self {
        assert!(hour < 24 && minute < 60, "invalid clock time {hour}:{minute}");
        ClockTime(hour * 60 + minute)
    }

    pub fn minutes(&self) -> u32 {
        self.0
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for ClockTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("window_end", format!("expected HH:MM, got {s:?}"));
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        if h >= 24 || m >= 60 {
            return Err(bad());
        }
        Ok(ClockTime(h * 60 + m))
    }
}

impl Serialize for ClockTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    /// One window per day ending at `window_end`.
    Daily,
    /// A window every `n` minutes; deadlines fall on `window_end + k·n`.
    EveryNMin(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSchedule {
    pub recurrence: Recurrence,
    #[serde(default)]
    pub window_end: ClockTime,
    pub window_duration_min: u32,
    pub n_slots: u32,
    pub slot_duration_min: u32,
    /// Minutes from the deadline to the first delivered slot.
    pub delivery_offset_min: u32,
}

impl MarketSchedule {
    /// Daily auction with a 12:00-14:00 bid window for the 96 quarter hours
    /// of the next day.
    pub fn day_ahead() -> Self {
        MarketSchedule {
            recurrence: Recurrence::Daily,
            window_end: ClockTime::hm(14, 0),
            window_duration_min: 120,
            n_slots: 96,
            slot_duration_min: 15,
            delivery_offset_min: 600,
        }
    }

    /// Half-hourly windows committing two quarter hours one hour ahead.
    pub fn real_time() -> Self {
        MarketSchedule {
            recurrence: Recurrence::EveryNMin(30),
            window_end: ClockTime::default(),
            window_duration_min: 30,
            n_slots: 2,
            slot_duration_min: 15,
            delivery_offset_min: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_duration_min == 0 || !MINUTES_PER_DAY.is_multiple_of(self.slot_duration_min) {
            return Err(Error::param("schedule.slot_duration_min", "must divide 1440"));
        }
        if self.n_slots == 0 {
            return Err(Error::param("schedule.n_slots", "must be positive"));
        }
        let period = self.period_min();
        if let Recurrence::EveryNMin(n) = self.recurrence {
            if n == 0 || !MINUTES_PER_DAY.is_multiple_of(n) {
                return Err(Error::param("schedule.recurrence", "every_n_min must divide 1440"));
            }
        }
        if self.window_duration_min == 0 || self.window_duration_min > period {
            return Err(Error::param("schedule.window_duration_min", format!("must lie in (0, {period}]")));
        }
        Ok(())
    }

    pub fn period_min(&self) -> u32 {
        match self.recurrence {
            Recurrence::Daily => MINUTES_PER_DAY,
            Recurrence::EveryNMin(n) => n,
        }
    }
}

/// One bidding round: when it opens, when it closes and what it delivers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deadline {
    pub deadline: Timestamp,
    pub window_open: Timestamp,
    pub delivery_slots: Vec<Timestamp>,
}

impl Deadline {
    pub fn is_open_at(&self, now: Timestamp) -> bool {
        self.window_open <= now && now <= self.deadline
    }
}

/// Earliest deadline at or after `now`.
pub fn market_next_deadline(schedule: &MarketSchedule, now: Timestamp) -> Deadline {
    let period = schedule.period_min() as i64;
    let anchor = (schedule.window_end.minutes() as i64).rem_euclid(period);
    let m = now.epoch_minutes();
    let k = (m - anchor + period - 1).div_euclid(period);
    let deadline = Timestamp::from_epoch_minutes(anchor + k * period);
    let first = deadline.add_minutes(schedule.delivery_offset_min as i64);
    Deadline {
        deadline,
        window_open: deadline.add_minutes(-(schedule.window_duration_min as i64)),
        delivery_slots: (0..schedule.n_slots as i64)
            .map(|i| first.add_minutes(i * schedule.slot_duration_min as i64))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketEntity {
    pub name: String,
    /// `None` for a price-only market with no bidding (arbitrage use).
    pub schedule: Option<MarketSchedule>,
    pub price_forecast: TimeSeries,
    pub price_actual: TimeSeries,
    pub carbon_forecast: Option<TimeSeries>,
    pub carbon_actual: Option<TimeSeries>,
}

impl MarketEntity {
    pub fn validate(&self) -> Result<()> {
        let g = self.price_actual.granularity_min();
        let series = [Some(&self.price_forecast), self.carbon_forecast.as_ref(), self.carbon_actual.as_ref()];
        if series.into_iter().flatten().any(|s| s.granularity_min() != g) {
            return Err(Error::GranularityMismatch {
                entity: self.name.clone(),
                expected: g,
                found: self.price_forecast.granularity_min(),
            });
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
            if s.slot_duration_min != g {
                return Err(Error::GranularityMismatch {
                    entity: self.name.clone(),
                    expected: s.slot_duration_min,
                    found: g,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommitmentStatus {
    Committed,
    Scheduled,
    Delivered,
}

/// A bid volume for one delivery slot and where it is in its lifecycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub market: String,
    pub slot_start: Timestamp,
    pub deadline: Timestamp,
    pub volume_kwh: f64,
    pub bid_price: f64,
    pub status: CommitmentStatus,
    pub delivered_kwh: Option<f64>,
}

impl Commitment {
    pub fn new(
        market: impl Into<String>,
        slot_start: Timestamp,
        deadline: Timestamp,
        volume_kwh: f64,
        bid_price: f64,
    ) -> Self {
        Commitment {
            market: market.into(),
            slot_start,
            deadline,
            volume_kwh,
            bid_price,
            status: CommitmentStatus::Committed,
            delivered_kwh: None,
        }
    }

    /// COMMITTED → SCHEDULED once the gate has closed.
    pub fn schedule(&mut self) -> Result<()> {
        match self.status {
            CommitmentStatus::Committed => {
                self.status = CommitmentStatus::Scheduled;
                Ok(())
            }
            s => Err(Error::param("commitment", format!("cannot schedule from {s:?}"))),
        }
    }

    /// SCHEDULED → DELIVERED at the slot.
    pub fn deliver(&mut self, now: Timestamp, kwh: f64) -> Result<()> {
        if self.status != CommitmentStatus::Scheduled {
            return Err(Error::param("commitment", format!("cannot deliver from {:?}", self.status)));
        }
        if now < self.slot_start {
            return Err(Error::param("commitment", format!("delivery at {now} precedes slot {}", self.slot_start)));
        }
        self.status = CommitmentStatus::Delivered;
        self.delivered_kwh = Some(kwh);
        Ok(())
    }
}
