//! `voltplan`: run, sweep, schedule and benchmark scenarios from a config
//! file. Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 runtime error.

mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voltplan_core::runner::sweep::{crossing_point, normalized_curves, sweep_config};
use voltplan_core::runner::{
    benchmark, event_runner, read_trace, scheduled_runner, write_bench_csv, write_outputs, write_sweep_csv, Clock,
    Session, SweepSpec, TickReport, Totals,
};
use voltplan_core::{
    generate, load_config, run, Error, ErrorClass, OptimizerKind, Result, RunConfig, RunReport, SyntheticSpec,
    Timestamp,
};

use svg::{line_chart, Series};

#[derive(Parser)]
#[command(name = "voltplan", version, about = "Battery scheduling, microgrid dispatch and market bidding runs")]
struct Cli {
    /// More log output; repeat for debug detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// exact, sa, mpc or q; overrides the config.
    #[arg(long)]
    optimizer: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for every stochastic optimizer component.
    #[arg(long)]
    seed: Option<u64>,
    /// Config overrides as section.key=value.
    overrides: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(k) = &self.optimizer {
            o.push(format!("optimizer.kind=\"{k}\""));
        }
        o
    }

    fn load(&self) -> Result<RunConfig> {
        let rc = load_config(&self.config, &self.overrides())?;
        Ok(match self.seed {
            Some(s) => rc.with_seed(s),
            None => rc,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario over its whole dataset.
    Run(RunArgs),
    /// One run per (value, seed) of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `alpha` (carbon weight relative to price), a weights or battery
        /// degradation field, or any config key.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Seeds per value; defaults to --seed or 0.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Also plot the normalized savings curves.
        #[arg(long)]
        svg: bool,
    },
    /// Advance on a fixed cadence, printing one JSON line per tick.
    Schedule {
        #[command(flatten)]
        run: RunArgs,
        /// Minutes between ticks.
        #[arg(long, default_value_t = 60)]
        cadence: u32,
        #[arg(long)]
        max_ticks: Option<usize>,
        /// Follow wall-clock time instead of a virtual clock.
        #[arg(long)]
        live: bool,
    },
    /// Advance on each data arrival listed in a feed file.
    Events {
        #[command(flatten)]
        run: RunArgs,
        /// CSV whose first column holds arrival timestamps.
        #[arg(long)]
        feed: PathBuf,
    },
    /// Per-decision latency of each optimizer.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "exact,sa,q")]
        optimizers: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Recompute totals from a trace and optionally plot them.
    Report {
        /// A trace CSV or a run output directory.
        path: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Write a synthetic price, carbon, solar and demand CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        days: usize,
        #[arg(long, default_value_t = 60)]
        granularity: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Runtime => 3,
    }
}

/// Write a line to stdout; a closed reader (`| head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn print_tick(tick: &TickReport) {
    log::info!("tick {} at {}: {} steps", tick.tick, tick.at, tick.steps);
    if let Err(e) = serde_json::to_string(tick).map_err(Error::from).and_then(|line| emit(&line)) {
        log::warn!("tick {} not written: {e}", tick.tick);
    }
}

fn finish(session: &Session, out: &Path) -> Result<RunReport> {
    let report = write_outputs(session, out)?;
    eprintln!("wrote {}", out.display());
    Ok(report)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let session = run(&args.load()?)?;
    print_json(&finish(&session, &args.out)?)
}

fn cmd_sweep(args: &RunArgs, param: &str, values: Vec<f64>, seeds: Vec<u64>, plot: bool) -> Result<()> {
    let seeds = if seeds.is_empty() { vec![args.seed.unwrap_or(0)] } else { seeds };
    let spec = SweepSpec { parameter: param.to_string(), values, seeds };
    let rows = sweep_config(&args.config, &args.overrides(), &spec)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("sweep.csv");
    write_sweep_csv(&rows, fs::File::create(&path)?)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    match crossing_point(&rows) {
        Some(x) => emit(&format!("crossing point: {param} = {x}"))?,
        None => emit("no crossing point within the swept range")?,
    }
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see the status column", rows.len());
    }
    if plot {
        let curves = normalized_curves(&rows);
        let svg = line_chart(
            &format!("normalized savings over {param}"),
            param,
            &[
                Series { name: "cost".into(), points: curves.iter().map(|c| (c.0, c.1)).collect() },
                Series { name: "carbon".into(), points: curves.iter().map(|c| (c.0, c.2)).collect() },
            ],
        );
        fs::write(args.out.join("sweep.svg"), svg)?;
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_schedule(args: &RunArgs, cadence: u32, max_ticks: Option<usize>, live: bool) -> Result<()> {
    let mut session = Session::new(&args.load()?)?;
    let clock = if live { Clock::Live } else { Clock::Virtual };
    scheduled_runner(&mut session, cadence, max_ticks.unwrap_or(usize::MAX), clock, print_tick)?;
    let report = finish(&session, &args.out)?;
    if report.tick_overruns > 0 {
        eprintln!("{} ticks overran the cadence", report.tick_overruns);
    }
    Ok(())
}

fn read_feed(path: &Path) -> Result<Vec<Timestamp>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or_default().trim();
        if field.is_empty() || (i == 0 && field.parse::<Timestamp>().is_err()) {
            continue;
        }
        out.push(field.parse().map_err(|_| Error::Malformed {
            row: i,
            column: "timestamp".into(),
            value: field.into(),
        })?);
    }
    Ok(out)
}

fn cmd_events(args: &RunArgs, feed: &Path) -> Result<()> {
    let arrivals = read_feed(feed)?;
    let mut session = Session::new(&args.load()?)?;
    event_runner(&mut session, arrivals, print_tick)?;
    finish(&session, &args.out)?;
    Ok(())
}

fn cmd_bench(args: &RunArgs, optimizers: &[String], repeats: usize) -> Result<()> {
    let kinds = optimizers
        .iter()
        .map(|s| s.parse::<OptimizerKind>().map_err(|e| Error::config("optimizers", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let rows = benchmark(&args.load()?, &kinds, repeats)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("bench.csv");
    write_bench_csv(&rows, fs::File::create(&path)?)?;
    for r in &rows {
        emit(&format!("{:<6} {:>12.6e} s ± {:.3e} s over {} repeats", r.optimizer, r.mean_s, r.std_s, r.repeats))?;
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct TraceSummary {
    trace: String,
    totals: Totals,
    /// Whether `report.json` next to the trace agrees, when present.
    matches_report: Option<bool>,
}

fn cmd_report(path: &Path, plot: Option<&Path>) -> Result<()> {
    let (trace_path, report_path) = if path.is_dir() {
        (path.join("trace.csv"), Some(path.join("report.json")))
    } else {
        (path.to_path_buf(), path.parent().map(|p| p.join("report.json")))
    };
    let file = fs::File::open(&trace_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(trace_path.clone()),
        _ => Error::Io(e),
    })?;
    let rows = read_trace(file)?;
    let mut totals = Totals::default();
    for r in &rows {
        totals.add(r);
    }
    let matches_report = match report_path.filter(|p| p.is_file()) {
        Some(p) => {
            let report: RunReport = serde_json::from_str(&fs::read_to_string(p)?)?;
            Some(report.totals == totals)
        }
        None => None,
    };
    if matches_report == Some(false) {
        log::warn!("report.json totals differ from the trace");
    }
    if let Some(out) = plot {
        let cumulative = |f: fn(&voltplan_core::runner::TraceRow) -> f64| {
            let mut acc = 0.0;
            rows.iter()
                .map(|r| {
                    acc += f(r);
                    (r.t as f64, acc)
                })
                .collect::<Vec<_>>()
        };
        let svg = line_chart(
            "cumulative savings",
            "step",
            &[
                Series { name: "cost".into(), points: cumulative(|r| r.r_price) },
                Series { name: "carbon".into(), points: cumulative(|r| r.r_carbon) },
                Series { name: "degradation".into(), points: cumulative(|r| -r.r_deg) },
            ],
        );
        fs::write(out, svg)?;
    }
    print_json(&TraceSummary { trace: trace_path.display().to_string(), totals, matches_report })
}

fn cmd_synth(out: &Path, days: usize, granularity_min: u32, seed: u64) -> Result<()> {
    let table = generate(&SyntheticSpec { days, granularity_min, seed, ..Default::default() })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    table.write_csv(fs::File::create(out)?)?;
    eprintln!("wrote {} rows to {}", table.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep { run, param, values, seeds, svg } => cmd_sweep(&run, &param, values, seeds, svg),
        Command::Schedule { run, cadence, max_ticks, live } => cmd_schedule(&run, cadence, max_ticks, live),
        Command::Events { run, feed } => cmd_events(&run, &feed),
        Command::Bench { run, optimizers, repeats } => cmd_bench(&run, &optimizers, repeats),
        Command::Report { path, svg } => cmd_report(&path, svg.as_deref()),
        Command::Synth { out, days, granularity, seed } => cmd_synth(&out, days, granularity, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
