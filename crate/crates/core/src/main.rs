use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use mimo_stream::metrics::{emit_metrics, emit_topology, emit_trace};
use mimo_stream::{run_simulation, Error, MetricsReport, SimConfig};

#[derive(Parser)]
#[command(
    name = "mimo-stream",
    version,
    about = "Adaptive video streaming simulator for MU-MIMO small-cell networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv and topology.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run for each value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: V, xi, window, n, seed, s_max, M, power, horizon, queue_unit_bits.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Bad command-line input detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($arg:tt)*) => {
        anyhow::Error::new(Usage(format!($($arg)*)))
    };
}

fn apply_param(cfg: &mut SimConfig, param: &str, raw: &str) -> anyhow::Result<()> {
    let float = || raw.parse::<f64>().map_err(|_| usage!("`{raw}` is not a number"));
    let int = || -> anyhow::Result<u64> {
        let x = float()?;
        if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
            return Err(usage!("`{raw}` is not a nonnegative integer"));
        }
        Ok(x as u64)
    };
    match param {
        "V" | "v" => cfg.policy.v = float()?,
        "xi" => cfg.playback.xi = float()?,
        "window" => cfg.playback.window = int()? as u32,
        "n" => cfg.policy.n = float()?,
        "seed" => cfg.run.seed = int()?,
        "s_max" => cfg.policy.s_max = int()? as u32,
        "M" => cfg.policy.antennas = Some(int()? as u32),
        "power" => cfg.policy.power = Some(float()?),
        "horizon" => cfg.run.horizon = int()? as u32,
        "queue_unit_bits" => cfg.policy.queue_unit_bits = float()?,
        other => return Err(usage!("unknown sweep parameter `{other}`")),
    }
    Ok(())
}

fn summarize(label: &str, report: &MetricsReport) {
    println!(
        "{label}: users={} mean_quality={:.4} prebuffer_s={:.2} rebuffer_pct={:.3} utility={:.4} mean_backlog_bits={:.0}",
        report.users.len(),
        report.mean_quality(),
        report.mean_prebuffer_s(),
        report.mean_rebuffer_pct(),
        report.utility,
        report.mean_total_backlog(),
    );
}

fn load(path: &Path, seed: Option<u64>) -> Result<SimConfig, Error> {
    let mut cfg = SimConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn exit_for(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::Json { .. }) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            cfg.validate()?;
            println!("{}: ok", config.display());
        }
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            cfg.validate()?;
            let dir = out
                .or_else(|| cfg.run.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            create_dir(&dir)?;
            let report = run_simulation(&cfg)?;
            emit_metrics(&report, &dir.join("metrics.csv"))?;
            emit_topology(&report, &dir.join("topology.csv"))?;
            if cfg.run.trace {
                emit_trace(&report, &dir.join("trace.csv"))?;
            }
            summarize(&format!("seed {}", cfg.run.seed), &report);
        }
        Command::Sweep {
            config,
            param,
            values,
            seed,
            out,
        } => {
            let base = load(&config, seed)?;
            let mut configs = Vec::with_capacity(values.len());
            for raw in &values {
                let mut cfg = base.clone();
                apply_param(&mut cfg, &param, raw)?;
                cfg.validate()?;
                configs.push(cfg);
            }
            let dir = out
                .or_else(|| base.run.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            create_dir(&dir)?;
            let reports: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = configs
                    .iter()
                    .map(|cfg| scope.spawn(move || run_simulation(cfg)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("simulation thread panicked"))
                    .collect()
            });
            for (raw, report) in values.iter().zip(reports) {
                let report = report?;
                let path = dir.join(format!("metrics_{param}_{raw}.csv"));
                emit_metrics(&report, &path)?;
                summarize(&format!("{param}={raw}"), &report);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_for(&err))
        }
    }
}
