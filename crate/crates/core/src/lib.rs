//! Composable energy decision management: entities bound by contracts,
//! an environment that turns actions into rewards, and interchangeable
//! optimizers driven by a common runner.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contracts;
pub mod entities;
pub mod environment;
pub mod error;
pub mod forecasting;
pub mod optimizers;
pub mod runner;
pub mod scenarios;
pub mod synthetic;
pub mod timeseries;

pub use config::{load_config, parse_config, RunConfig};
pub use contracts::{
    build_decision_units, decision_slots, penalty_value, Accrual, Contract, DecisionSlot, DecisionUnit, PenaltyFn,
    PenaltyKind,
};
pub use entities::*;
pub use environment::{
    reward_components, EnvSpec, EnvState, Environment, EodPolicy, ObjectiveWeights, Observation, RewardComponents,
    ScenarioKind, SignalSource, Signals, StepInput, StepOutcome,
};
pub use error::{Error, ErrorClass, Result};
pub use forecasting::{forecast, forecast_series, mae, ForecasterSpec};
pub use optimizers::{
    act, solve_exact, solve_mpc, solve_sa, train_q, ActionPlan, HorizonModel, InnerSolver, MpcParams, OptimizerKind,
    QParams, QPolicy, SAParams,
};
pub use runner::{run, RunReport, Session, Totals};
pub use scenarios::bidding::{bo_settle, Bid, BiddingSetup, BoPlanner, MarketSignals, Settlement};
pub use scenarios::microgrid::{mg_dispatch, mg_reward, DispatchResult};
pub use scenarios::{build_scenario, PriceScaling, Scenario, ScenarioConfig};
pub use synthetic::{generate, SyntheticSpec};
pub use timeseries::{load_table, read_table, scale_minmax, MinMaxScaling, TabularBackend, TimeSeries, Timestamp};
