//! Bidding scenario: a producer with sources and a battery serves a consumer
//! contract first and sells the surplus as a price-taker into scheduled
//! markets. Covers bid placement, delivery against the commitment ledger,
//! daily settlement and the day-ahead/real-time bid planner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contracts::{penalty_value, DecisionSlot, DecisionUnit, PenaltyFn, PenaltyKind};
use crate::entities::{BatteryAction, BatteryConfig, Commitment, CommitmentStatus, MarketSchedule, Recurrence};
use crate::environment::{Environment, ObjectiveWeights, SignalSource, StepInput};
use crate::error::{Error, Result};
use crate::optimizers::InnerSolver;
use crate::timeseries::Timestamp;

const VOLUME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketSignals {
    pub name: String,
    pub schedule: MarketSchedule,
    pub price: Vec<f64>,
    pub price_forecast: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BiddingSetup {
    pub unit: DecisionUnit,
    /// Sorted by name. The first market also sells energy to the producer.
    pub markets: Vec<MarketSignals>,
    /// Penalty on consumer shortfall.
    pub consumer_penalty: PenaltyFn,
    /// Deviation charge per kWh of |delivered − scheduled|.
    pub dsm_rate: f64,
    /// Source capacity plus battery discharge power.
    pub max_deliverable_kw: f64,
}

impl BiddingSetup {
    fn market(&self, name: &str) -> Option<&MarketSignals> {
        self.markets.iter().find(|m| m.name == name)
    }

    /// Market whose forecast prices the next-day battery plan: the first
    /// daily market, else the first market.
    pub fn planning_market(&self) -> &MarketSignals {
        self.markets.iter().find(|m| m.schedule.recurrence == Recurrence::Daily).unwrap_or(&self.markets[0])
    }

    fn shortfall_rate(&self) -> f64 {
        match self.consumer_penalty.kind {
            PenaltyKind::None => 0.0,
            _ => self.consumer_penalty.rate,
        }
    }
}

/// Volume offered for one delivery slot of one market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bid {
    pub market: String,
    pub slot: Timestamp,
    pub volume_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Settlement {
    pub revenue: f64,
    pub purchase_cost: f64,
    pub contract_penalty: f64,
    pub dsm_penalty: f64,
    pub profit: f64,
}

/// Open commitments plus the current day's delivery record.
#[derive(Debug, Clone, PartialEq)]
pub struct BiddingLedger {
    pub open: Vec<Commitment>,
    pub day_delivered: Vec<(Commitment, f64)>,
    pub day_supplied: Vec<f64>,
    pub day_demand: Vec<f64>,
    pub day_purchase_cost: f64,
    pub settlements: Vec<(Timestamp, Settlement)>,
    pub delivered_count: usize,
}

impl BiddingLedger {
    pub fn new(steps_per_day: usize) -> Self {
        BiddingLedger {
            open: Vec::new(),
            day_delivered: Vec::new(),
            day_supplied: vec![0.0; steps_per_day],
            day_demand: vec![0.0; steps_per_day],
            day_purchase_cost: 0.0,
            settlements: Vec::new(),
            delivered_count: 0,
        }
    }

    /// Volume committed for `slot` across markets, not yet delivered.
    pub fn committed_for(&self, slot: Timestamp) -> f64 {
        self.open.iter().filter(|c| c.slot_start == slot).map(|c| c.volume_kwh).sum()
    }
}

/// Accounting of one delivery step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Delivery {
    pub revenue: f64,
    pub purchase_cost: f64,
    /// Energy bought to charge beyond own generation.
    pub deficit_kwh: f64,
    pub dsm_penalty: f64,
    pub contract_penalty: f64,
    pub consumer_supplied_kwh: f64,
    pub delivered_kwh: f64,
    pub scheduled_kwh: f64,
    pub curtailed_kwh: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub t: usize,
    pub now: Timestamp,
    pub slot_of_day: usize,
    /// Settle the day after this step.
    pub day_end: bool,
    pub generation_kwh: f64,
    pub demand_kwh: f64,
    pub battery_flow_kwh: f64,
    pub carbon: f64,
}

/// Validate bids against the open windows and record them as commitments.
pub fn place_bids(
    setup: &BiddingSetup,
    ledger: &mut BiddingLedger,
    open: &[DecisionSlot],
    bids: &[Bid],
    now: Timestamp,
    index_of: impl Fn(Timestamp) -> Option<usize>,
) -> Result<()> {
    for bid in bids {
        if !(bid.volume_kwh >= 0.0 && bid.volume_kwh.is_finite()) {
            return Err(Error::param("bid.volume_kwh", format!("{} is not a finite volume >= 0", bid.volume_kwh)));
        }
        let window = open
            .iter()
            .find(|d| d.market == bid.market && d.slots.contains(&bid.slot))
            .ok_or_else(|| Error::MissedDeadline { market: bid.market.clone(), slot: bid.slot, now })?;
        let market = setup.market(&bid.market).ok_or_else(|| Error::UnknownEntity(bid.market.clone()))?;
        let cap = setup.max_deliverable_kw * window.slot_duration_min as f64 / 60.0;
        if ledger.committed_for(bid.slot) + bid.volume_kwh > cap + VOLUME_TOL {
            return Err(Error::param(
                "bid.volume_kwh",
                format!("slot {} would exceed deliverable energy {cap}", bid.slot),
            ));
        }
        let price = index_of(bid.slot).map_or(0.0, |i| market.price_forecast[i]);
        ledger.open.push(Commitment::new(&bid.market, bid.slot, window.deadline, bid.volume_kwh, price));
    }
    Ok(())
}

/// Mature and deliver the commitments of the current slot. The consumer is
/// served first; commitments are then filled in deadline order and the
/// rest is curtailed.
pub fn deliver_step(setup: &BiddingSetup, ledger: &mut BiddingLedger, ctx: StepContext) -> Result<Delivery> {
    for c in ledger.open.iter_mut() {
        if c.status == CommitmentStatus::Committed && (c.deadline < ctx.now || c.slot_start <= ctx.now) {
            c.schedule()?;
        }
    }
    let own = ctx.generation_kwh + ctx.battery_flow_kwh;
    let deficit = (-own).max(0.0);
    let consumer = ctx.demand_kwh.min(own.max(0.0));
    let mut remaining = own.max(0.0) - consumer;
    let purchase_price = setup.markets[0].price[ctx.t];

    let mut due: Vec<Commitment> = Vec::new();
    ledger.open.retain(|c| {
        if c.slot_start == ctx.now {
            due.push(c.clone());
            false
        } else {
            true
        }
    });
    if let Some(stale) = ledger.open.iter().find(|c| c.slot_start < ctx.now) {
        return Err(Error::UnresolvedCommitment { market: stale.market.clone(), slot: stale.slot_start });
    }
    due.sort_by(|a, b| (a.deadline, &a.market).cmp(&(b.deadline, &b.market)));

    let mut out = Delivery {
        purchase_cost: purchase_price * deficit,
        deficit_kwh: deficit,
        consumer_supplied_kwh: consumer,
        ..Default::default()
    };
    for mut c in due {
        let delivered = c.volume_kwh.min(remaining);
        remaining -= delivered;
        c.deliver(ctx.now, delivered)?;
        let price = setup.market(&c.market).ok_or_else(|| Error::UnknownEntity(c.market.clone()))?.price[ctx.t];
        out.revenue += price * delivered;
        out.dsm_penalty += setup.dsm_rate * (delivered - c.volume_kwh).abs();
        out.delivered_kwh += delivered;
        out.scheduled_kwh += c.volume_kwh;
        ledger.delivered_count += 1;
        ledger.day_delivered.push((c, price));
    }
    out.curtailed_kwh = remaining;

    ledger.day_supplied[ctx.slot_of_day] = consumer;
    ledger.day_demand[ctx.slot_of_day] = ctx.demand_kwh;
    ledger.day_purchase_cost += out.purchase_cost;
    if ctx.day_end {
        let settlement = bo_settle(
            &ledger.day_delivered,
            ledger.day_purchase_cost,
            &ledger.day_supplied,
            &ledger.day_demand,
            &setup.consumer_penalty,
            setup.dsm_rate,
        )?;
        out.contract_penalty = settlement.contract_penalty;
        ledger.settlements.push((ctx.now.midnight(), settlement));
        let spd = ledger.day_supplied.len();
        ledger.day_delivered.clear();
        ledger.day_supplied = vec![0.0; spd];
        ledger.day_demand = vec![0.0; spd];
        ledger.day_purchase_cost = 0.0;
    }
    Ok(out)
}

/// Settle one day: price-taker revenue on delivered volumes, the consumer
/// contract penalty over the day's slots, and the deviation charge.
/// `supplied` and `demand` cover the whole day, one entry per slot.
pub fn bo_settle(
    delivered: &[(Commitment, f64)],
    purchase_cost: f64,
    supplied: &[f64],
    demand: &[f64],
    consumer_penalty: &PenaltyFn,
    dsm_rate: f64,
) -> Result<Settlement> {
    let mut revenue = 0.0;
    let mut dsm = 0.0;
    for (c, price) in delivered {
        let got = match (c.status, c.delivered_kwh) {
            (CommitmentStatus::Delivered, Some(v)) => v,
            _ => return Err(Error::UnresolvedCommitment { market: c.market.clone(), slot: c.slot_start }),
        };
        revenue += price * got;
        dsm += dsm_rate * (got - c.volume_kwh).abs();
    }
    let contract_penalty = penalty_value(consumer_penalty, supplied, demand, supplied.len().max(1))?;
    Ok(Settlement {
        revenue,
        purchase_cost,
        contract_penalty,
        dsm_penalty: dsm,
        profit: revenue - purchase_cost - contract_penalty - dsm,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PlanningStep {
    pub t: usize,
    pub generation_kwh: f64,
    pub demand_kwh: f64,
    pub alpha: f64,
    pub source: SignalSource,
}

/// Weighted planning reward of one battery action: surplus sold at the
/// planning market's price, consumer shortfall at the contract rate, extra
/// charging energy at the purchase price, minus degradation.
pub fn planning_reward(
    setup: &BiddingSetup,
    action: BatteryAction,
    step: PlanningStep,
    cfg: &BatteryConfig,
    dt_min: u32,
    w: &ObjectiveWeights,
) -> f64 {
    let pick = |m: &MarketSignals| match step.source {
        SignalSource::Forecast => m.price_forecast[step.t],
        SignalSource::Actual => m.price[step.t],
    };
    let g = cfg.grid_energy_kwh(action, dt_min);
    let own = step.generation_kwh + g;
    let surplus = (own.max(0.0) - step.demand_kwh).max(0.0);
    let shortfall = (step.demand_kwh - own.max(0.0)).max(0.0);
    let bought = (-own).max(0.0);
    let money =
        pick(setup.planning_market()) * surplus - setup.shortfall_rate() * shortfall - pick(&setup.markets[0]) * bought;
    w.w_price * money - w.w_deg * step.alpha * g.abs()
}

/// Heuristic bidder: at each daily deadline it plans the next day's battery
/// schedule and offers the forecast surplus of every slot; at each intraday
/// deadline it tops up with surplus not yet committed.
#[derive(Debug, Clone)]
pub struct BoPlanner {
    pub solver: InnerSolver,
    plan: BTreeMap<usize, BatteryAction>,
}

impl BoPlanner {
    pub fn new(solver: InnerSolver) -> Self {
        BoPlanner { solver, plan: BTreeMap::new() }
    }

    pub fn planned(&self, t: usize) -> BatteryAction {
        self.plan.get(&t).copied().unwrap_or(BatteryAction::Idle)
    }

    fn surplus(env: &Environment, t: usize, action: BatteryAction) -> f64 {
        let sig = env.signals();
        let h = env.dt_min() as f64 / 60.0;
        let g = env.battery_config().grid_energy_kwh(action, env.dt_min());
        (sig.generation_forecast[t] * h + g).max(0.0) - sig.demand_forecast[t] * h
    }

    /// Decisions for the environment's current step.
    pub fn decide(&mut self, env: &Environment) -> Result<StepInput> {
        let setup =
            env.spec().bidding.as_ref().ok_or_else(|| Error::config("scenario.kind", "planner needs kind bo"))?;
        let t = env.state().t;
        let cap = setup.max_deliverable_kw * env.dt_min() as f64 / 60.0;
        let mut due = env.due_decisions();
        due.sort_by_key(|d| {
            let daily = setup.market(&d.market).is_some_and(|m| m.schedule.recurrence == Recurrence::Daily);
            (!daily, d.deadline, d.market.clone())
        });
        let mut bids = Vec::new();
        let mut pending: BTreeMap<Timestamp, f64> = BTreeMap::new();
        for d in &due {
            let daily = setup.market(&d.market).is_some_and(|m| m.schedule.recurrence == Recurrence::Daily);
            let idx: Vec<usize> = d.slots.iter().filter_map(|&s| env.index_of(s)).collect();
            if idx.is_empty() {
                continue;
            }
            if daily {
                self.plan_ahead(env, idx[0], idx.len())?;
            }
            for (&slot, &i) in d.slots.iter().zip(&idx) {
                let committed = env.state().ledger.as_ref().map_or(0.0, |l| l.committed_for(slot))
                    + pending.get(&slot).copied().unwrap_or(0.0);
                let offer = Self::surplus(env, i, self.planned(i)).max(0.0).min(cap) - committed;
                if offer > VOLUME_TOL {
                    let volume = offer.min(cap - committed).max(0.0);
                    *pending.entry(slot).or_default() += volume;
                    bids.push(Bid { market: d.market.clone(), slot, volume_kwh: volume });
                }
            }
        }
        let mut action = self.planned(t);
        if !env.feasible_actions().contains(&action) {
            log::debug!("bidding planner: planned {action} infeasible at step {t}; idling");
            action = BatteryAction::Idle;
        }
        self.plan.retain(|&k, _| k >= t);
        Ok(StepInput { action, bids })
    }

    /// Plan battery actions for `[t0, t0 + n)` from the state the current
    /// plan is projected to reach at `t0`.
    fn plan_ahead(&mut self, env: &Environment, t0: usize, n: usize) -> Result<()> {
        let cfg = env.battery_config();
        let mut projected = env.state().battery;
        for k in env.state().t..t0 {
            let a = self.planned(k);
            projected.soc =
                cfg.next_soc(projected.soc, a, env.dt_min(), projected.capacity_kwh).unwrap_or(projected.soc);
        }
        let model = env.horizon_model_at(t0, n, projected, SignalSource::Forecast)?;
        match self.solver.solve(&model, n) {
            Ok(plan) => {
                for (k, a) in plan.actions.into_iter().enumerate() {
                    self.plan.insert(t0 + k, a);
                }
            }
            Err(Error::Infeasible | Error::NoFeasibleFound(_)) => {
                log::warn!("bidding planner: no feasible battery plan from step {t0}; battery idles");
                for k in t0..t0 + n {
                    self.plan.insert(k, BatteryAction::Idle);
                }
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }
}
