//! Contracts between entities, their penalty functions, and decision units
//! (connected components of the entity/contract graph).

use std::collections::{BTreeMap, HashMap};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::entities::{market_next_deadline, Entity, EntityKind};
use crate::error::{Error, Result};
use crate::timeseries::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    #[default]
    None,
    /// `rate · Σ_t max(0, committed_t − supplied_t)`
    LinearPerStep,
    /// `rate · Σ_day max(0, Σ committed − Σ supplied)`
    LinearDaily,
}

/// Which steps of each day accrue penalty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accrual {
    #[default]
    All,
    /// Only steps whose hour of day is listed.
    Hours(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyFn {
    #[serde(default)]
    pub kind: PenaltyKind,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub accrual: Accrual,
}

impl PenaltyFn {
    pub fn none() -> Self {
        PenaltyFn::default()
    }

    pub fn per_step(rate: f64) -> Self {
        PenaltyFn { kind: PenaltyKind::LinearPerStep, rate, accrual: Accrual::All }
    }

    pub fn daily(rate: f64) -> Self {
        PenaltyFn { kind: PenaltyKind::LinearDaily, rate, accrual: Accrual::All }
    }
}

/// Penalty for supplying `supplied` against `committed` (both per step,
/// series assumed to start at midnight).
pub fn penalty_value(pf: &PenaltyFn, supplied: &[f64], committed: &[f64], steps_per_day: usize) -> Result<f64> {
    if supplied.len() != committed.len() {
        return Err(Error::LengthMismatch { left: supplied.len(), right: committed.len() });
    }
    if pf.rate < 0.0 {
        return Err(Error::param("penalty.rate", "must be >= 0"));
    }
    let step_min = 1440 / steps_per_day.max(1);
    let counts = |i: usize| match &pf.accrual {
        Accrual::All => true,
        Accrual::Hours(hours) => hours.contains(&(((i % steps_per_day) * step_min / 60) as u32)),
    };
    let total = match pf.kind {
        PenaltyKind::None => 0.0,
        PenaltyKind::LinearPerStep => {
            let shortfall: f64 =
                (0..supplied.len()).filter(|&i| counts(i)).map(|i| (committed[i] - supplied[i]).max(0.0)).sum();
            pf.rate * shortfall
        }
        PenaltyKind::LinearDaily => {
            if steps_per_day == 0 || !supplied.len().is_multiple_of(steps_per_day) {
                return Err(Error::param(
                    "penalty.accrual",
                    format!("{} steps is not a whole number of {steps_per_day}-step days", supplied.len()),
                ));
            }
            let mut shortfall = 0.0;
            for day in 0..supplied.len() / steps_per_day {
                let range = day * steps_per_day..(day + 1) * steps_per_day;
                let (mut c, mut s) = (0.0, 0.0);
                for i in range.filter(|&i| counts(i)) {
                    c += committed[i];
                    s += supplied[i];
                }
                shortfall += (c - s).max(0.0);
            }
            pf.rate * shortfall
        }
    };
    Ok(total)
}

/// Directed energy-flow agreement from `contractor` to `contractee`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contract {
    pub contractor: String,
    pub contractee: String,
    #[serde(default)]
    pub min_supply_kw: f64,
    /// Unbounded when absent.
    #[serde(default)]
    pub max_supply_kw: Option<f64>,
    #[serde(default)]
    pub penalty: PenaltyFn,
}

impl Contract {
    pub fn new(contractor: impl Into<String>, contractee: impl Into<String>) -> Self {
        Contract {
            contractor: contractor.into(),
            contractee: contractee.into(),
            min_supply_kw: 0.0,
            max_supply_kw: None,
            penalty: PenaltyFn::none(),
        }
    }

    pub fn with_penalty(mut self, penalty: PenaltyFn) -> Self {
        self.penalty = penalty;
        self
    }

    /// Supply bounds are enforced only when both ends are finite.
    pub fn supply_bounds(&self) -> Option<(f64, f64)> {
        self.max_supply_kw.filter(|m| m.is_finite()).map(|m| (self.min_supply_kw, m))
    }
}

/// A connected group of entities whose decisions depend on each other.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionUnit {
    pub entities: BTreeMap<String, Entity>,
    pub contracts: Vec<Contract>,
    pub granularity_min: Option<u32>,
    /// Owner label; carries no behaviour.
    pub producer: Option<String>,
}

impl DecisionUnit {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(move |e| e.kind() == kind)
    }

    pub fn get(&self, name: &str) -> Result<&Entity> {
        self.entities.get(name).ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }
}

/// Partition entities into decision units, one per connected component of
/// the undirected contract graph, ordered by smallest entity name.
pub fn build_decision_units(entities: &[Entity], contracts: &[Contract]) -> Result<Vec<DecisionUnit>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, e) in entities.iter().enumerate() {
        if index.insert(e.name(), i).is_some() {
            return Err(Error::config(format!("entities.{}", e.name()), "duplicate entity name"));
        }
    }
    let mut uf = UnionFind::<usize>::new(entities.len());
    for c in contracts {
        let a = *index.get(c.contractor.as_str()).ok_or_else(|| Error::UnknownEntity(c.contractor.clone()))?;
        let b = *index.get(c.contractee.as_str()).ok_or_else(|| Error::UnknownEntity(c.contractee.clone()))?;
        if a == b {
            return Err(Error::param("contract", format!("`{}` cannot contract with itself", c.contractor)));
        }
        if c.min_supply_kw < 0.0 || c.max_supply_kw.is_some_and(|m| m < c.min_supply_kw) {
            return Err(Error::param(
                format!("contract {}->{}", c.contractor, c.contractee),
                "need 0 <= min_supply_kw <= max_supply_kw",
            ));
        }
        uf.union(a, b);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..entities.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut units = Vec::with_capacity(groups.len());
    for members in groups.into_values() {
        let mut unit_entities = BTreeMap::new();
        let mut granularity: Option<(u32, &str)> = None;
        for &i in &members {
            let e = &entities[i];
            if let Some(g) = e.granularity_min() {
                match granularity {
                    None => granularity = Some((g, e.name())),
                    Some((expected, _)) if expected != g => {
                        return Err(Error::GranularityMismatch { entity: e.name().to_string(), expected, found: g })
                    }
                    _ => {}
                }
            }
            unit_entities.insert(e.name().to_string(), e.clone());
        }
        let unit_contracts = contracts.iter().filter(|c| unit_entities.contains_key(&c.contractor)).cloned().collect();
        units.push(DecisionUnit {
            entities: unit_entities,
            contracts: unit_contracts,
            granularity_min: granularity.map(|(g, _)| g),
            producer: None,
        });
    }
    units.sort_by(|a, b| a.entities.keys().next().cmp(&b.entities.keys().next()));
    Ok(units)
}

/// An open bidding decision for one market.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionSlot {
    pub market: String,
    pub deadline: Timestamp,
    pub slots: Vec<Timestamp>,
    pub slot_duration_min: u32,
}

/// Open market decisions at `now`, with delivery slots made disjoint: where
/// two open windows would commit the same interval, the market with the
/// earlier deadline keeps it (ties go to the lexically smaller name).
pub fn decision_slots(du: &DecisionUnit, now: Timestamp) -> Vec<DecisionSlot> {
    let mut open: Vec<DecisionSlot> = du
        .entities
        .values()
        .filter_map(Entity::as_market)
        .filter_map(|m| {
            let schedule = m.schedule.as_ref()?;
            let d = market_next_deadline(schedule, now);
            d.is_open_at(now).then(|| DecisionSlot {
                market: m.name.clone(),
                deadline: d.deadline,
                slots: d.delivery_slots,
                slot_duration_min: schedule.slot_duration_min,
            })
        })
        .collect();
    open.sort_by(|a, b| (a.deadline, &a.market).cmp(&(b.deadline, &b.market)));

    let mut taken: Vec<(Timestamp, Timestamp)> = Vec::new();
    let mut out = Vec::with_capacity(open.len());
    for mut d in open {
        let dur = d.slot_duration_min as i64;
        d.slots.retain(|&s| {
            let e = s.add_minutes(dur);
            !taken.iter().any(|&(ts, te)| s < te && ts < e)
        });
        taken.extend(d.slots.iter().map(|&s| (s, s.add_minutes(dur))));
        if !d.slots.is_empty() {
            out.push(d);
        }
    }
    out
}
