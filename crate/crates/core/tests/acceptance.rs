//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voltplan_core::optimizers::solve_mpc;
use voltplan_core::runner::sweep::{apply_parameter, crossing_point, curves};
use voltplan_core::runner::{
    benchmark, event_runner, scheduled_runner, sweep_with, write_bench_csv, write_sweep_csv, Clock, SweepSpec,
};
use voltplan_core::scenarios::bidding::Delivery;
use voltplan_core::*;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

// ---------------------------------------------------------------------------
// independent brute-force oracle

/// State-of-charge update written out from the battery model, without the
/// library's helpers.
fn oracle_next(cfg: &BatteryConfig, soc: f64, a: BatteryAction, dt_min: u32, cap: f64) -> Option<f64> {
    let h = dt_min as f64 / 60.0;
    let next = match a {
        BatteryAction::Idle => return Some(soc),
        BatteryAction::Charge => soc + cfg.eta_ch * (-cfg.pmax_ch_kw) * h / cap,
        BatteryAction::Discharge => soc - cfg.pmax_dis_kw * h / (cfg.eta_dis * cap),
    };
    let (lo, hi) = (1.0 - cfg.dod, cfg.soc_max);
    (next >= lo - 1e-9 && next <= hi + 1e-9).then(|| next.clamp(lo, hi))
}

fn decode(mut code: usize, n: usize) -> Vec<BatteryAction> {
    (0..n)
        .map(|_| {
            let a = BatteryAction::ALL[code % 3];
            code /= 3;
            a
        })
        .collect()
}

/// Objective of one sequence, summed left to right; `None` if infeasible.
fn oracle_score(m: &HorizonModel, actions: &[BatteryAction]) -> Option<f64> {
    let mut soc = m.initial.soc;
    let mut total = 0.0;
    for (t, &a) in actions.iter().enumerate() {
        soc = oracle_next(&m.battery, soc, a, m.dt_min, m.initial.capacity_kwh)?;
        total += m.rewards[t][a.index()];
        if m.day_end[t] && soc < m.battery.soc_min_eod - 1e-9 {
            total -= m.eod_penalty?;
        }
    }
    Some(total)
}

fn oracle_best(m: &HorizonModel) -> Option<(f64, Vec<BatteryAction>)> {
    let n = m.len();
    let mut best: Option<(f64, Vec<BatteryAction>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let actions = decode(code, n);
        if let Some(v) = oracle_score(m, &actions) {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, actions));
            }
        }
    }
    best
}

fn random_battery(rng: &mut ChaCha8Rng) -> BatteryConfig {
    let dod: f64 = rng.random_range(0.3..=1.0);
    let floor = 1.0 - dod;
    let soc_max: f64 = rng.random_range((floor + 0.05f64).min(1.0)..=1.0);
    BatteryConfig {
        capacity_kwh: rng.random_range(1.0..20.0),
        eta_ch: rng.random_range(0.7..=1.0),
        eta_dis: rng.random_range(0.7..=1.0),
        pmax_ch_kw: -rng.random_range(0.5..10.0),
        pmax_dis_kw: rng.random_range(0.5..10.0),
        dod,
        soc_max,
        soc_min_eod: rng.random_range(0.0..=soc_max),
        soc_init: rng.random_range(floor..=soc_max),
        degradation: DegradationConfig {
            fade_kwh_per_kwh_throughput: rng.random_range(0.0..1e-3),
            replacement_cost_per_kwh: rng.random_range(0.0..200.0),
            window_steps: 24,
        },
    }
}

/// Random arbitrage horizon: prices and carbon in [-10, 10], random
/// weights, random day boundaries and floor handling.
fn random_model(rng: &mut ChaCha8Rng, n: usize) -> HorizonModel {
    let battery = random_battery(rng);
    let dt_min = [15, 30, 60][rng.random_range(0..3)];
    let w = ObjectiveWeights::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
    let initial = BatteryState::initial(&battery);
    let rewards = (0..n)
        .map(|_| {
            let (p, c) = (rng.random_range(-10.0..=10.0), rng.random_range(-10.0..=10.0));
            BatteryAction::ALL.map(|a| reward_components(a, p, c, initial.alpha, &battery, dt_min, &w).r_net)
        })
        .collect();
    let mut day_end: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
    day_end[n - 1] = true;
    let eod_penalty = rng.random_bool(0.5).then(|| rng.random_range(0.0..20.0));
    HorizonModel { battery, initial, dt_min, rewards, day_end, eod_penalty, tail_steps: None }
}

fn c1_exact_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut instances, mut exact_equal, mut infeasible, mut max_diff) = (0, 0, 0, 0.0f64);
    for n in 2..=10 {
        for _ in 0..50 {
            let m = random_model(&mut rng, n);
            instances += 1;
            match (solve_exact(&m, n), oracle_best(&m)) {
                (Ok(plan), Some((best, _))) => {
                    let rescored = oracle_score(&m, &plan.actions).ok_or("exact plan infeasible under the oracle")?;
                    let diff = (plan.objective - best).abs().max((rescored - best).abs());
                    max_diff = max_diff.max(diff);
                    if diff == 0.0 {
                        exact_equal += 1;
                    }
                    check(diff <= 1e-9, format!("T={n}: exact {} vs brute force {best}", plan.objective))?;
                }
                (Err(Error::Infeasible), None) => infeasible += 1,
                (got, want) => return Err(format!("T={n}: solver {got:?}, oracle {want:?}")),
            }
        }
    }
    within(started.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{instances} instances, {exact_equal} bit-equal, {infeasible} infeasible on both sides, max diff {max_diff:e}, {:.1?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// constraint suite

fn bounds_ok(env: &Environment, day_end: bool) -> std::result::Result<(), String> {
    let cfg = env.battery_config();
    let soc = env.state().battery.soc;
    check(
        soc >= cfg.soc_floor() - SOC_TOL && soc <= cfg.soc_max + SOC_TOL,
        format!("soc {soc} outside [{}, {}]", cfg.soc_floor(), cfg.soc_max),
    )?;
    if day_end {
        check(soc >= cfg.soc_min_eod - SOC_TOL, format!("day ends at soc {soc} below {}", cfg.soc_min_eod))?;
    }
    Ok(())
}

fn ledger_ok(env: &Environment, delivery: &Delivery) -> std::result::Result<(), String> {
    let setup = env.spec().bidding.as_ref().ok_or("bidding env without setup")?;
    let ledger = env.state().ledger.as_ref().ok_or("bidding env without ledger")?;
    let now = env.state().now;
    let cap = setup.max_deliverable_kw * env.dt_min() as f64 / 60.0;
    for c in &ledger.open {
        check(c.slot_start >= now, format!("commitment for {} still open at {now}", c.slot_start))?;
        check(c.volume_kwh >= 0.0, "negative commitment")?;
        check(c.status != CommitmentStatus::Delivered, "delivered commitment left open")?;
        check(ledger.committed_for(c.slot_start) <= cap + 1e-9, format!("slot {} over capacity", c.slot_start))?;
    }
    for (c, _) in &ledger.day_delivered {
        let d = c.delivered_kwh.ok_or("delivered commitment without a volume")?;
        check(c.status == CommitmentStatus::Delivered, "settled commitment not delivered")?;
        check((-1e-9..=c.volume_kwh + 1e-9).contains(&d), format!("delivered {d} of {}", c.volume_kwh))?;
    }
    check(delivery.delivered_kwh <= delivery.scheduled_kwh + 1e-9, "delivered more than scheduled")?;
    check(delivery.curtailed_kwh >= -1e-9 && delivery.deficit_kwh >= -1e-9, "negative curtailment or deficit")
}

fn random_bids(env: &Environment, rng: &mut ChaCha8Rng) -> Vec<Bid> {
    let setup = env.spec().bidding.as_ref().expect("bidding");
    let ledger = env.state().ledger.as_ref().expect("ledger");
    let cap = setup.max_deliverable_kw * env.dt_min() as f64 / 60.0;
    let mut bids = Vec::new();
    for d in env.due_decisions() {
        for &slot in &d.slots {
            let pending: f64 = bids.iter().filter(|b: &&Bid| b.slot == slot).map(|b| b.volume_kwh).sum();
            let room = (cap - ledger.committed_for(slot) - pending).max(0.0);
            if rng.random_bool(0.7) {
                bids.push(Bid { market: d.market.clone(), slot, volume_kwh: room * rng.random_range(0.0..=1.0) });
            }
        }
    }
    bids
}

fn random_walk(mut env: Environment, steps: usize, rng: &mut ChaCha8Rng) -> std::result::Result<usize, String> {
    let mut taken = 0;
    while taken < steps && !env.is_done() {
        let t = env.state().t;
        let feasible = env.feasible_actions();
        let action = feasible[rng.random_range(0..feasible.len())];
        let bids = if env.spec().bidding.is_some() { random_bids(&env, rng) } else { Vec::new() };
        let out = env.step(&StepInput { action, bids }).map_err(|e| format!("step {t}: {e}"))?;
        bounds_ok(&env, env.is_day_end(t))?;
        if let Some(d) = &out.dispatch {
            let h = env.dt_min() as f64 / 60.0;
            let demand = env.signals().demand[t] * h;
            check(d.imbalance(demand).abs() <= 1e-9, format!("step {t}: energy imbalance {}", d.imbalance(demand)))?;
            check(d.e_ugrid_kwh >= -1e-12 && d.solar_curtailed_kwh >= -1e-12, "negative import or curtailment")?;
            check(d.e_export_kwh == 0.0, "export without export enabled")?;
        }
        if let Some(d) = &out.delivery {
            ledger_ok(&env, d).map_err(|e| format!("step {t}: {e}"))?;
        }
        taken += 1;
    }
    Ok(taken)
}

fn c2_constraints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = Vec::new();
    let hourly = synthetic(150, 60, 21);
    let quarter = synthetic(40, 15, 22);
    let scenarios = [
        ("ea", ea(&hourly, battery(), ObjectiveWeights::default()), 3400),
        ("mg", mg(&hourly, battery()), 3300),
        ("bo", bo(&quarter, battery()), 3300),
    ];
    let mut total = 0;
    for (name, mut s, steps) in scenarios {
        s.episode_days = 1000;
        let env = build_scenario(&s).map_err(|e| format!("{name}: {e}"))?.env;
        let taken = random_walk(env, steps, &mut rng).map_err(|e| format!("{name}: {e}"))?;
        check(taken == steps, format!("{name}: ran out of data after {taken} steps"))?;
        counts.push(format!("{name} {taken}"));
        total += taken;
    }
    check(total >= 10_000, format!("only {total} steps"))?;
    Ok(format!("{total} random steps ({}), zero violations", counts.join(", ")))
}

// ---------------------------------------------------------------------------
// small hand-worked instances

fn c3_derived_instances() -> Outcome {
    use BatteryAction::{Charge as C, Discharge as D, Idle as I};
    let cases: [(&[f64], f64, Vec<BatteryAction>); 2] =
        [(&[1.0, 3.0], 15.0, vec![I, D]), (&[2.0, 1.0, 3.0], 20.0, vec![D, C, D])];
    for (prices, want, plan) in cases {
        let n = prices.len();
        let env = ea_env(unit_battery(), prices, &vec![0.0; n], ObjectiveWeights::price_only());
        let model = env.horizon_model(n).map_err(|e| e.to_string())?;
        let got = solve_exact(&model, n).map_err(|e| e.to_string())?;
        let (oracle, oracle_plan) = oracle_best(&model).ok_or("oracle found no plan")?;
        check(oracle == want && oracle_plan == plan, format!("{prices:?}: oracle gives {oracle} {oracle_plan:?}"))?;
        check(
            got.objective == want && got.actions == plan,
            format!("{prices:?}: solver gives {} {:?}", got.objective, got.actions),
        )?;
    }
    Ok("[1,3] -> 15 with IDLE/DISCHARGE, [2,1,3] -> 20 with D/C/D".into())
}

// ---------------------------------------------------------------------------
// MPC

/// Random day-long instance whose floor idle alone already satisfies, so a
/// feasible plan always exists.
fn random_env(rng: &mut ChaCha8Rng, n: usize) -> (Environment, Vec<f64>, Vec<f64>) {
    let mut cfg = random_battery(rng);
    cfg.soc_min_eod = rng.random_range(0.0..=cfg.soc_init);
    cfg.degradation.window_steps = n;
    let prices: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
    let carbon: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..=10.0)).collect();
    let w = ObjectiveWeights::new(1.0, rng.random_range(0.0..1.0), 1.0);
    (ea_env(cfg, &prices, &carbon, w), prices, carbon)
}

fn with_noisy_forecasts(env: &Environment, prices: &[f64], carbon: &[f64], sigma: f64, seed: u64) -> Environment {
    let spec = ForecasterSpec::Noise { sigma, seed };
    let start = env.timestamp(0);
    let noisy = |v: &[f64]| forecast(&spec, &series(v), start, v.len()).unwrap().values().to_vec();
    let mut s = env.spec().clone();
    s.signals.price_forecast = noisy(prices);
    s.signals.carbon_forecast = noisy(carbon);
    Environment::new(s).unwrap()
}

fn c4_mpc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = MpcParams { horizon_steps: 24, inner: InnerSolver::Exact };
    let mut max_diff = 0.0f64;
    for i in 0..20 {
        let (mut env, _, _) = random_env(&mut rng, 24);
        let exact = solve_exact(&env.horizon_model(24).map_err(|e| e.to_string())?, 24);
        let realized = solve_mpc(&mut env, &params).map_err(|e| e.to_string())?.total.r_net;
        match exact {
            Ok(plan) => {
                let d = (plan.objective - realized).abs();
                max_diff = max_diff.max(d);
                check(d <= 1e-9, format!("instance {i}: mpc {realized} vs exact {}", plan.objective))?;
            }
            Err(e) => return Err(format!("instance {i}: {e}")),
        }
    }
    let mut exceed = 0;
    for trial in 0..100u64 {
        let (env, prices, carbon) = random_env(&mut rng, 24);
        let mut accurate = env.clone();
        let accurate_reward = solve_mpc(&mut accurate, &params).map_err(|e| e.to_string())?.total.r_net;
        let mut noisy = with_noisy_forecasts(&env, &prices, &carbon, 3.0, trial);
        let noisy_reward = solve_mpc(&mut noisy, &params).map_err(|e| e.to_string())?.total.r_net;
        if noisy_reward > accurate_reward + 1e-9 {
            exceed += 1;
        }
    }
    check(exceed <= 5, format!("noisy forecasts beat accurate ones in {exceed}/100 trials"))?;
    Ok(format!("20 instances match exact (max diff {max_diff:e}); noisy beat accurate in {exceed}/100 trials"))
}

// ---------------------------------------------------------------------------
// SA

fn c5_sa() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut good = 0;
    let mut ratios = Vec::new();
    for i in 0..20u64 {
        let (env, _, _) = random_env(&mut rng, 24);
        let model = env.horizon_model(24).map_err(|e| e.to_string())?;
        let exact = solve_exact(&model, 24).map_err(|e| e.to_string())?.objective;
        let sa = solve_sa(&model, 24, &SAParams { iters: 20_000, seed: i, ..Default::default() })
            .map_err(|e| e.to_string())?
            .objective;
        let idle = oracle_score(&model, &[BatteryAction::Idle; 24]).unwrap_or(0.0);
        let gain = exact - idle;
        let ratio = if gain > 1e-12 {
            (sa - idle) / gain
        } else if sa >= idle - 1e-9 {
            1.0
        } else {
            0.0
        };
        ratios.push(ratio);
        if ratio >= 0.95 {
            good += 1;
        }
    }
    within(started.elapsed(), Duration::from_secs(300))?;
    check(good >= 18, format!("only {good}/20 instances reach 95%: {ratios:.3?}"))?;
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("{good}/20 instances at >= 95% of exact (worst {worst:.3}), {:.1?}", started.elapsed()))
}

// ---------------------------------------------------------------------------
// Q-learning

fn square_wave(days: usize) -> Vec<f64> {
    (0..24 * days).map(|t| if t % 24 < 12 { 1.0 } else { 5.0 }).collect()
}

fn c6_q() -> Outcome {
    let started = Instant::now();
    let w = ObjectiveWeights::price_only();
    let train_prices = square_wave(7);
    let mut train_env = ea_env(battery(), &train_prices, &vec![0.0; train_prices.len()], w);
    let policy = train_q(&mut train_env, &QParams { episodes: 500, seed: 6, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let day = square_wave(1);
    let mut held_out = ea_env(battery(), &day, &[0.0; 24], w);
    let exact =
        solve_exact(&held_out.horizon_model(24).map_err(|e| e.to_string())?, 24).map_err(|e| e.to_string())?.objective;
    let mut greedy = 0.0;
    while !held_out.is_done() {
        let a = act(&policy, &held_out);
        greedy += held_out.step(&a.into()).map_err(|e| e.to_string())?.reward.r_net;
    }
    within(started.elapsed(), Duration::from_secs(120))?;
    check(exact > 0.0 && greedy >= 0.9 * exact, format!("greedy {greedy:.3} vs exact {exact:.3}"))?;
    Ok(format!("greedy {greedy:.3} = {:.1}% of exact {exact:.3}, {:.1?}", 100.0 * greedy / exact, started.elapsed()))
}

// ---------------------------------------------------------------------------
// sweeps on a synthetic month

fn month() -> TabularBackend {
    synthetic(30, 60, 7)
}

fn c7_degradation() -> Outcome {
    let t = month();
    let mut base = ea(&t, battery(), ObjectiveWeights::new(1.0, 0.0, 1.0));
    if let Some(Entity::Battery(b)) = base.entities.first_mut() {
        b.config.degradation.fade_kwh_per_kwh_throughput = 1e-3;
    }
    let base = run_config(base, OptimizerKind::Exact);
    let spec = SweepSpec {
        parameter: "battery.degradation.replacement_cost_per_kwh".into(),
        values: vec![0.0, 2000.0, 5000.0, 10000.0, 20000.0],
        seeds: vec![0],
    };
    let rows = sweep_with(&spec, |v, seed| {
        let mut rc = base.clone();
        apply_parameter(&mut rc, &spec.parameter, v)?;
        Ok(rc.with_seed(seed))
    })
    .map_err(|e| e.to_string())?;
    let counts: Vec<usize> = rows
        .iter()
        .map(|r| r.totals.map(|t| t.active_actions).ok_or_else(|| r.error.clone().unwrap_or_default()))
        .collect::<std::result::Result<_, _>>()?;
    check(counts.windows(2).all(|w| w[1] <= w[0]), format!("action counts {counts:?} increase somewhere"))?;
    check(counts.first() > counts.last(), format!("action counts {counts:?} never drop"))?;
    Ok(format!("charge/discharge actions {counts:?} over replacement cost {:?}", spec.values))
}

fn c8_pareto() -> Outcome {
    let t = month();
    let base = run_config(ea(&t, battery(), ObjectiveWeights::new(1.0, 0.0, 1.0)), OptimizerKind::Exact);
    let spec =
        SweepSpec { parameter: "alpha".into(), values: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0], seeds: vec![0] };
    let rows = sweep_with(&spec, |v, seed| {
        let mut rc = base.clone();
        apply_parameter(&mut rc, "alpha", v)?;
        Ok(rc.with_seed(seed))
    })
    .map_err(|e| e.to_string())?;
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("alpha {} failed: {:?}", r.value, r.error));
    }
    let c = curves(&rows);
    check(c.windows(2).all(|w| w[1].1 <= w[0].1), format!("cost savings not non-increasing: {c:?}"))?;
    check(c.windows(2).all(|w| w[1].2 >= w[0].2), format!("carbon savings not non-decreasing: {c:?}"))?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).map_err(|e| e.to_string())?;
    let text = String::from_utf8(csv).map_err(|e| e.to_string())?;
    let marked = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    let x = crossing_point(&rows).ok_or("no crossing point")?;
    check(marked >= 1, "sweep CSV marks no crossing")?;
    Ok(format!(
        "cost {:.0} -> {:.0}, carbon {:.0} -> {:.0}, curves cross at alpha {x:.4}",
        c[0].1, c[6].1, c[0].2, c[6].2
    ))
}

// ---------------------------------------------------------------------------
// execution paths

fn c9_runners() -> Outcome {
    let t = synthetic(7, 60, 9);
    let rc = run_config(ea(&t, battery(), ObjectiveWeights::new(1.0, 0.2, 1.0)), OptimizerKind::Exact);
    let direct = run(&rc).map_err(|e| e.to_string())?;
    let n = direct.trace().len();
    let mut sched = Session::new(&rc).map_err(|e| e.to_string())?;
    let mut ticks = 0;
    scheduled_runner(&mut sched, 60, n, Clock::Virtual, |_| ticks += 1).map_err(|e| e.to_string())?;
    let mut events = Session::new(&rc).map_err(|e| e.to_string())?;
    let feed: Vec<Timestamp> = (0..n).map(|i| t.start().add_minutes(60 * i as i64)).collect();
    let mut triggers = 0;
    event_runner(&mut events, feed, |_| triggers += 1).map_err(|e| e.to_string())?;
    let (a, b, c) = (direct.totals(), sched.totals(), events.totals());
    let same = |x: &Totals, y: &Totals| {
        x.steps == y.steps
            && x.active_actions == y.active_actions
            && [x.cost_savings, x.carbon_savings, x.degradation_cost, x.penalties, x.profit, x.r_net]
                .iter()
                .zip([y.cost_savings, y.carbon_savings, y.degradation_cost, y.penalties, y.profit, y.r_net])
                .all(|(p, q)| p.to_bits() == q.to_bits())
    };
    check(same(a, b) && same(a, c), format!("totals differ: {a:?} / {b:?} / {c:?}"))?;
    check(
        a.steps == 168 && ticks == 168 && triggers == 168,
        format!("{} steps, {ticks} ticks, {triggers} events", a.steps),
    )?;
    Ok(format!("168 steps, identical totals (r_net {}) on all three paths", a.r_net))
}

// ---------------------------------------------------------------------------
// bidding structure

fn c10_bidding() -> Outcome {
    let t = synthetic(3, 15, 10);
    let scenario = build_scenario(&bo(&t, battery())).map_err(|e| e.to_string())?;
    let unit = &scenario.units[0];
    let at = Timestamp::ymd_hm(2024, 1, 1, 14, 0);
    let slots = decision_slots(unit, at);
    let dam = slots.iter().find(|d| d.market == "dam").ok_or("no day-ahead decision at 14:00")?;
    let rtm = slots.iter().find(|d| d.market == "rtm").ok_or("no real-time decision at 14:00")?;
    let next_day = Timestamp::ymd_hm(2024, 1, 2, 0, 0);
    let want_dam: Vec<Timestamp> = (0..96).map(|k| next_day.add_minutes(15 * k)).collect();
    check(dam.slots == want_dam, format!("day-ahead slots {} starting {:?}", dam.slots.len(), dam.slots.first()))?;
    let want_rtm = vec![Timestamp::ymd_hm(2024, 1, 1, 15, 0), Timestamp::ymd_hm(2024, 1, 1, 15, 15)];
    check(rtm.slots == want_rtm, format!("real-time slots {:?}", rtm.slots))?;
    check(slots.len() == 2, format!("{} open decisions", slots.len()))?;
    check(dam.slots.iter().all(|s| !rtm.slots.contains(s)), "slot sets overlap")?;

    let rc = run_config(bo(&t, battery()), OptimizerKind::Exact);
    let mut session = Session::new(&rc).map_err(|e| e.to_string())?;
    let report = scheduled_runner(&mut session, 15, 96, Clock::Virtual, |_| {}).map_err(|e| e.to_string())?;
    let fired = |m: &str| report.decisions.get(m).copied().unwrap_or(0);
    check(fired("dam") == 1 && fired("rtm") == 48, format!("one day fired {:?}", report.decisions))?;
    Ok(format!("96 + 2 disjoint slots at 14:00; one day fires dam {} and rtm {}", fired("dam"), fired("rtm")))
}

// ---------------------------------------------------------------------------
// benchmark harness

fn c11_bench() -> Outcome {
    let t = synthetic(1, 60, 11);
    let mut rc = run_config(ea(&t, battery(), ObjectiveWeights::default()), OptimizerKind::Exact);
    rc.sa.iters = 2_000;
    let kinds = [OptimizerKind::Exact, OptimizerKind::Sa, OptimizerKind::Q];
    let rows = benchmark(&rc, &kinds, 3).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_bench_csv(&rows, &mut csv).map_err(|e| e.to_string())?;
    check(rows.len() == 3, "missing optimizer rows")?;
    check(
        rows.iter().all(|r| r.horizon_steps == 24 && r.mean_s.is_finite() && r.std_s.is_finite() && r.mean_s >= 0.0),
        format!("bad rows {rows:?}"),
    )?;
    check(String::from_utf8_lossy(&csv).lines().count() == 4, "CSV needs a header and three rows")?;
    check(benchmark(&rc, &kinds, 2).is_err(), "two repeats accepted")?;
    let parts: Vec<String> =
        rows.iter().map(|r| format!("{} {:.2e}±{:.1e} s", r.optimizer, r.mean_s, r.std_s)).collect();
    Ok(parts.join(", "))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("exact solver equals brute force", c1_exact_oracle),
        ("constraint suite", c2_constraints),
        ("derived instances", c3_derived_instances),
        ("mpc consistency", c4_mpc),
        ("sa quality", c5_sa),
        ("q-learning sanity", c6_q),
        ("degradation direction", c7_degradation),
        ("pareto sweep", c8_pareto),
        ("execution-path equivalence", c9_runners),
        ("bidding structure", c10_bidding),
        ("benchmark harness", c11_bench),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
