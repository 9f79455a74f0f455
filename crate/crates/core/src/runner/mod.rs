//! Execution: a session owns one environment and one controller and
//! advances a step at a time. `run`, the scheduled runner and the event
//! runner all drive the same [`Session::advance_one_step`], so they agree
//! exactly on identical data.

pub mod bench;
pub mod sweep;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::entities::BatteryAction;
use crate::environment::{Environment, RewardComponents, StepInput};
use crate::error::{Error, Result};
use crate::forecasting::ForecasterSpec;
use crate::optimizers::{act, mpc_decide, train_q, InnerSolver, MpcParams, OptimizerKind, QPolicy};
use crate::scenarios::bidding::{BoPlanner, Settlement};
use crate::scenarios::build_scenario;
use crate::timeseries::Timestamp;

pub use bench::{benchmark, write_bench_csv, BenchRow};
pub use sweep::{crossing_point, sweep_with, write_sweep_csv, SweepRow, SweepSpec};

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub timestamp: Timestamp,
    pub action: BatteryAction,
    pub soc: f64,
    pub r_price: f64,
    pub r_carbon: f64,
    pub r_deg: f64,
    pub r_net: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub steps: usize,
    /// Sum of price rewards (revenue net of purchases).
    pub cost_savings: f64,
    pub carbon_savings: f64,
    pub degradation_cost: f64,
    pub penalties: f64,
    /// `cost_savings − penalties`.
    pub profit: f64,
    pub r_net: f64,
    /// Steps that charged or discharged.
    pub active_actions: usize,
}

impl Totals {
    /// Accumulates one trace row.
    pub fn add(&mut self, row: &TraceRow) {
        self.steps += 1;
        self.cost_savings += row.r_price;
        self.carbon_savings += row.r_carbon;
        self.degradation_cost += row.r_deg;
        self.penalties += row.penalty;
        self.profit = self.cost_savings - self.penalties;
        self.r_net += row.r_net;
        if !row.action.is_idle() {
            self.active_actions += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub decisions: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

impl LatencyStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return LatencyStats::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        LatencyStats { decisions: xs.len(), mean_s: mean, std_s: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySettlement {
    pub day: Timestamp,
    #[serde(flatten)]
    pub settlement: Settlement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub optimizer: String,
    pub forecaster: String,
    pub totals: Totals,
    pub latency: LatencyStats,
    /// Market decisions taken, by market.
    pub decisions: BTreeMap<String, usize>,
    pub settlements: Vec<DaySettlement>,
    pub tick_overruns: usize,
    pub trace_path: Option<String>,
}

#[derive(Debug, Clone)]
enum Controller {
    /// Plan each episode once, then follow the plan.
    Plan {
        solver: InnerSolver,
        plan: Option<Vec<BatteryAction>>,
        from: usize,
        until: usize,
    },
    Mpc(MpcParams),
    Q(Box<QPolicy>),
    Bidding(BoPlanner),
}

fn safest(env: &Environment) -> BatteryAction {
    let feasible = env.feasible_actions();
    BatteryAction::PREFERENCE.into_iter().find(|a| feasible.contains(a)).unwrap_or(BatteryAction::Idle)
}

impl Controller {
    fn decide(&mut self, env: &Environment) -> Result<StepInput> {
        let t = env.state().t;
        Ok(match self {
            Controller::Plan { solver, plan, from, until } => {
                // replan at episode starts and whenever the state has drifted
                // from the plan (capacity fade) so its next action is infeasible
                let stale = t < *from
                    || t >= *until
                    || plan.as_ref().is_some_and(|p| !env.feasible_actions().contains(&p[t - *from]));
                if stale {
                    let n = env.episode_end() - t;
                    let model = env.horizon_model(n)?;
                    *from = t;
                    *until = t + n;
                    *plan = match solver.solve(&model, n) {
                        Ok(p) => Some(p.actions),
                        Err(Error::Infeasible | Error::NoFeasibleFound(_)) => {
                            log::warn!("no feasible plan for the episode at step {t}; acting step by step");
                            None
                        }
                        Err(e) => return Err(e),
                    };
                }
                match plan {
                    Some(p) => p[t - *from].into(),
                    None => safest(env).into(),
                }
            }
            Controller::Mpc(params) => mpc_decide(env, params)?.into(),
            Controller::Q(policy) => act(policy, env).into(),
            Controller::Bidding(planner) => planner.decide(env)?,
        })
    }
}

/// One environment under one controller, with everything recorded.
#[derive(Debug, Clone)]
pub struct Session {
    env: Environment,
    optimizer: OptimizerKind,
    forecaster: String,
    controller: Controller,
    trace: Vec<TraceRow>,
    totals: Totals,
    latencies: Vec<f64>,
    decisions: BTreeMap<String, usize>,
    tick_overruns: usize,
}

impl Session {
    /// Build the scenario and prepare the chosen controller. Q-learning
    /// trains here, on the scenario's own forecasts.
    pub fn new(rc: &RunConfig) -> Result<Self> {
        let scenario = build_scenario(&rc.scenario)?;
        let mut env = scenario.env;
        let bo = env.spec().bidding.is_some();
        let controller = match (rc.optimizer, bo) {
            (OptimizerKind::Exact, false) => {
                Controller::Plan { solver: InnerSolver::Exact, plan: None, from: 0, until: 0 }
            }
            (OptimizerKind::Sa, false) => {
                Controller::Plan { solver: InnerSolver::Sa(rc.sa), plan: None, from: 0, until: 0 }
            }
            (OptimizerKind::Mpc, false) => Controller::Mpc(rc.mpc),
            (OptimizerKind::Q, false) => Controller::Q(Box::new(train_q(&mut env, &rc.q)?)),
            (OptimizerKind::Exact, true) => Controller::Bidding(BoPlanner::new(InnerSolver::Exact)),
            (OptimizerKind::Sa, true) => Controller::Bidding(BoPlanner::new(InnerSolver::Sa(rc.sa))),
            (other, true) => {
                return Err(Error::config(
                    "optimizer.kind",
                    format!("{} is not supported for bidding; use exact or sa", other.name()),
                ))
            }
        };
        env.reset_initial();
        Ok(Session {
            env,
            optimizer: rc.optimizer,
            forecaster: rc.forecaster.label(),
            controller,
            trace: Vec::new(),
            totals: Totals::default(),
            latencies: Vec::new(),
            decisions: BTreeMap::new(),
            tick_overruns: 0,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn totals(&self) -> &Totals {
        &self.totals
    }

    pub fn is_finished(&self) -> bool {
        self.env.state().t >= self.env.len()
    }

    /// Timestamp of the next step to execute.
    pub fn now(&self) -> Timestamp {
        self.env.state().now
    }

    /// Decide and execute one step, rolling into the next episode when the
    /// current one has ended.
    pub fn advance_one_step(&mut self) -> Result<&TraceRow> {
        if self.is_finished() {
            return Err(Error::EpisodeFinished);
        }
        if self.env.is_done() {
            let (t, battery) = (self.env.state().t, self.env.state().battery);
            self.env.reset(t, battery)?;
        }
        for d in self.env.due_decisions() {
            *self.decisions.entry(d.market).or_default() += 1;
        }
        let t = self.env.state().t;
        let timestamp = self.env.state().now;
        let started = Instant::now();
        let input = self.controller.decide(&self.env)?;
        self.latencies.push(started.elapsed().as_secs_f64());
        log::trace!("decision at {timestamp}: {}", input.action);
        let out = self.env.step(&input)?;
        let RewardComponents { r_price, r_carbon, r_deg, penalty, r_net } = out.reward;
        let row = TraceRow {
            t,
            timestamp,
            action: input.action,
            soc: self.env.state().battery.soc,
            r_price,
            r_carbon,
            r_deg,
            r_net,
            penalty,
        };
        self.totals.add(&row);
        self.trace.push(row);
        Ok(self.trace.last().expect("just pushed"))
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.advance_one_step()?;
        }
        Ok(())
    }

    pub fn report(&self) -> RunReport {
        let settlements = self
            .env
            .state()
            .ledger
            .as_ref()
            .map(|l| l.settlements.iter().map(|(day, s)| DaySettlement { day: *day, settlement: *s }).collect())
            .unwrap_or_default();
        RunReport {
            scenario: self.env.kind().to_string(),
            optimizer: self.optimizer.name().to_string(),
            forecaster: self.forecaster.clone(),
            totals: self.totals,
            latency: LatencyStats::from_samples(&self.latencies),
            decisions: self.decisions.clone(),
            settlements,
            tick_overruns: self.tick_overruns,
            trace_path: None,
        }
    }

    pub fn write_trace(&self, out: impl Write) -> Result<()> {
        write_trace(&self.trace, out)
    }
}

pub const TRACE_HEADER: [&str; 9] =
    ["t", "timestamp", "action", "soc", "r_price", "r_carbon", "r_deg", "r_net", "penalty"];

pub fn write_trace(rows: &[TraceRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.timestamp.to_string(),
            r.action.to_string(),
            r.soc.to_string(),
            r.r_price.to_string(),
            r.r_carbon.to_string(),
            r.r_deg.to_string(),
            r.r_net.to_string(),
            r.penalty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a trace CSV written by [`write_trace`]. The `penalty` column is
/// optional.
pub fn read_trace(input: impl std::io::Read) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.to_string()));
    let idx = [
        col("t")?,
        col("timestamp")?,
        col("action")?,
        col("soc")?,
        col("r_price")?,
        col("r_carbon")?,
        col("r_deg")?,
        col("r_net")?,
    ];
    let penalty = headers.iter().position(|h| h == "penalty");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or_default();
        let bad = |j: usize| Error::Malformed { row: i + 1, column: headers[j].to_string(), value: field(j).into() };
        let num = |j: usize| -> Result<f64> { field(j).parse().map_err(|_| bad(j)) };
        rows.push(TraceRow {
            t: field(idx[0]).parse().map_err(|_| bad(idx[0]))?,
            timestamp: field(idx[1]).parse().map_err(|_| bad(idx[1]))?,
            action: field(idx[2]).parse().map_err(|_| bad(idx[2]))?,
            soc: num(idx[3])?,
            r_price: num(idx[4])?,
            r_carbon: num(idx[5])?,
            r_deg: num(idx[6])?,
            r_net: num(idx[7])?,
            penalty: penalty.map_or(Ok(0.0), num)?,
        });
    }
    Ok(rows)
}

/// Totals recomputed from a trace CSV, summed in row order.
pub fn totals_from_trace(input: impl std::io::Read) -> Result<Totals> {
    let mut totals = Totals::default();
    for row in read_trace(input)? {
        totals.add(&row);
    }
    Ok(totals)
}

/// Run the whole dataset episode by episode.
pub fn run(rc: &RunConfig) -> Result<Session> {
    let mut s = Session::new(rc)?;
    s.run_to_end()?;
    Ok(s)
}

/// Write `trace.csv` and `report.json` into `dir`.
pub fn write_outputs(session: &Session, dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(dir)?;
    let trace_path = dir.join("trace.csv");
    session.write_trace(std::fs::File::create(&trace_path)?)?;
    let mut report = session.report();
    report.trace_path = Some(trace_path.display().to_string());
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Whether ticks follow a virtual clock or wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Virtual,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickReport {
    pub tick: usize,
    pub at: Timestamp,
    pub steps: usize,
    pub totals: Totals,
}

/// Advance the session on a fixed cadence: tick `k` fires at
/// `start + k·cadence` and executes every step due by then.
pub fn scheduled_runner(
    session: &mut Session,
    cadence_min: u32,
    max_ticks: usize,
    clock: Clock,
    mut on_tick: impl FnMut(&TickReport),
) -> Result<RunReport> {
    if cadence_min == 0 {
        return Err(Error::param("cadence", "must be positive"));
    }
    if clock == Clock::Live && session.forecaster == ForecasterSpec::Accurate.label() {
        // oracle forecasts only make sense when replaying history
        return Err(Error::config("scenario.forecaster", "accurate forecasts are not available in live mode"));
    }
    let start = session.now();
    for k in 0..max_ticks {
        if session.is_finished() {
            break;
        }
        let at = start.add_minutes(k as i64 * cadence_min as i64);
        let began = Instant::now();
        let mut steps = 0;
        while !session.is_finished() && session.now() <= at {
            session.advance_one_step()?;
            steps += 1;
        }
        let budget = Duration::from_secs(cadence_min as u64 * 60);
        let spent = began.elapsed();
        if spent > budget {
            session.tick_overruns += 1;
            log::warn!("tick overrun at {at}: decisions took {spent:?}, cadence is {budget:?}");
        } else if clock == Clock::Live {
            std::thread::sleep(budget - spent);
        }
        on_tick(&TickReport { tick: k, at, steps, totals: session.totals });
    }
    Ok(session.report())
}

/// Advance the session as data arrives: each arrival triggers the steps
/// that became decidable. Arrivals must be strictly increasing.
pub fn event_runner(
    session: &mut Session,
    feed: impl IntoIterator<Item = Timestamp>,
    mut on_event: impl FnMut(&TickReport),
) -> Result<RunReport> {
    let mut last: Option<Timestamp> = None;
    for (k, at) in feed.into_iter().enumerate() {
        if let Some(l) = last {
            if at <= l {
                return Err(Error::OutOfOrderData { got: at, last: l });
            }
        }
        last = Some(at);
        let mut steps = 0;
        while !session.is_finished() && session.now() <= at {
            session.advance_one_step()?;
            steps += 1;
        }
        on_event(&TickReport { tick: k, at, steps, totals: session.totals });
    }
    Ok(session.report())
}
