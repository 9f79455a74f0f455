//! Per-decision latency of each optimizer on one scenario.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::LatencyStats;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::optimizers::{act, mpc_decide, solve_exact, solve_sa, train_q, OptimizerKind};
use crate::scenarios::build_scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub optimizer: String,
    pub repeats: usize,
    pub horizon_steps: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

/// Time `repeats` decisions per optimizer at the start of the data. A
/// decision is one horizon plan for exact and SA, one receding-horizon
/// step for MPC and one greedy action for Q (training is not timed).
pub fn benchmark(rc: &RunConfig, optimizers: &[OptimizerKind], repeats: usize) -> Result<Vec<BenchRow>> {
    if repeats < 3 {
        return Err(Error::param("repeats", "need at least 3 repeats"));
    }
    let env = build_scenario(&rc.scenario)?.env;
    let n = env.episode_end();
    let mut rows = Vec::new();
    for &kind in optimizers {
        let mut samples = Vec::with_capacity(repeats);
        let policy = match kind {
            OptimizerKind::Q => {
                let mut train_env = env.clone();
                Some(train_q(&mut train_env, &rc.q)?)
            }
            _ => None,
        };
        for _ in 0..repeats {
            let started = Instant::now();
            match kind {
                OptimizerKind::Exact => {
                    solve_exact(&env.horizon_model(n)?, n)?;
                }
                OptimizerKind::Sa => {
                    solve_sa(&env.horizon_model(n)?, n, &rc.sa)?;
                }
                OptimizerKind::Mpc => {
                    mpc_decide(&env, &rc.mpc)?;
                }
                OptimizerKind::Q => {
                    act(policy.as_ref().expect("trained"), &env);
                }
            }
            samples.push(started.elapsed().as_secs_f64());
        }
        let stats = LatencyStats::from_samples(&samples);
        rows.push(BenchRow {
            optimizer: kind.name().to_string(),
            repeats,
            horizon_steps: n,
            mean_s: stats.mean_s,
            std_s: stats.std_s,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
