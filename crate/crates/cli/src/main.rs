//! `agentgrid`: run presets, check the oracle suites, sweep performance settings.

mod bench;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use agentgrid::engine::{simulate, Timings};
use agentgrid::{verify, Error, ModelPreset};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "agentgrid", version, about = "Agent-based simulation presets, oracle checks and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write the time series, the resolved configuration and a timing summary.
    Run(RunArgs),
    /// Run oracle suites (all of them when none are named).
    Verify {
        /// grid, morton, removal, codec, sir or diffusion
        suites: Vec<String>,
    },
    /// Sweep one setting and print wall time and message sizes as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write each substance lattice as substance_<k>.csv.
    #[arg(long)]
    dump_lattices: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// workers, ranks, delta, compress, sorting or static
    #[arg(long, default_value = "workers")]
    sweep: String,
    /// Comma-separated settings; each sweep has its own defaults.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
    /// CSV destination instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// proliferation, clustering, sir, sir-influenza or spheroid
    preset: Option<String>,
    /// Configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Worker threads per rank.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    ranks: Option<usize>,
    /// copy or in-place
    #[arg(long)]
    mode: Option<String>,
    /// column or row
    #[arg(long)]
    order: Option<String>,
    /// Agent sorting every N iterations (0 disables it).
    #[arg(long)]
    sort_frequency: Option<u32>,
    /// on or off
    #[arg(long)]
    static_detection: Option<String>,
    #[arg(long)]
    behavior_frequency: Option<u32>,
    #[arg(long)]
    mechanics_frequency: Option<u32>,
    #[arg(long)]
    diffusion_frequency: Option<u32>,
    /// Partition box side in multiples of the interaction length.
    #[arg(long)]
    partition_factor: Option<u32>,
    /// Delta encoding of aura updates: on or off.
    #[arg(long)]
    delta: Option<String>,
    /// LZ4 compression of messages: on or off.
    #[arg(long)]
    compress: Option<String>,
    /// Exchanges between delta reference refreshes.
    #[arg(long)]
    ref_update: Option<u64>,
    #[arg(long)]
    batch_bytes: Option<usize>,
    /// Preset parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Failure classes, mapped to exit codes 1 and 2.
enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::TooManyRanks { .. } | Error::UnstableDiffusion(_) => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Failed(format!("{}: {e}", path.display()))
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, ModelPreset), Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let flags: [(&str, Option<String>); 17] = [
            ("preset", self.preset.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            ("ranks", self.ranks.map(|v| v.to_string())),
            ("mode", self.mode.clone()),
            ("order", self.order.clone()),
            ("sort_frequency", self.sort_frequency.map(|v| v.to_string())),
            ("static_detection", self.static_detection.clone()),
            ("behavior_frequency", self.behavior_frequency.map(|v| v.to_string())),
            ("mechanics_frequency", self.mechanics_frequency.map(|v| v.to_string())),
            ("diffusion_frequency", self.diffusion_frequency.map(|v| v.to_string())),
            ("partition_factor", self.partition_factor.map(|v| v.to_string())),
            ("delta", self.delta.clone()),
            ("compress", self.compress.clone()),
            ("ref_update", self.ref_update.map(|v| v.to_string())),
            ("batch_bytes", self.batch_bytes.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v).map_err(|e| Failure::Usage(format!("--{}: {e}", k.replace('_', "-"))))?;
            }
        }
        let section = cfg.preset.clone().unwrap_or_default();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.params.push((section.clone(), k.trim().to_string(), v.trim().to_string()));
        }
        let preset = cfg.build_preset().map_err(Failure::Usage)?;
        Ok((cfg, preset))
    }
}

/// Phase breakdown plus coarser categories; the remainder of the wall time is setup and teardown.
fn timing_rows(t: &Timings) -> Vec<(&'static str, &'static str, Duration)> {
    let mut rows: Vec<_> = t.rows().into_iter().filter(|(n, _)| *n != "total").map(|(n, d)| ("phase", n, d)).collect();
    let accounted: Duration = rows.iter().map(|r| r.2).sum();
    rows.extend([
        ("category", "agent_ops", t.agent_ops + t.commit),
        ("category", "environment_update", t.neighbor_grid + t.diffusion),
        ("category", "sorting", t.sorting),
        ("category", "distribution", t.aura + t.migration),
        ("category", "observation", t.observe),
        ("category", "setup_teardown", t.total.saturating_sub(accounted)),
        ("total", "total", t.total),
    ]);
    rows
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (mut cfg, preset) = args.common.resolve()?;
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    let report = simulate(&preset, &cfg.run_options())?;

    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    report.series.emit_csv(dir.join("timeseries.csv"))?;
    let echo_path = dir.join("run_config.txt");
    fs::write(&echo_path, cfg.echo(&preset)).map_err(|e| io_failure(&echo_path, e))?;

    let total = report.timings.total.as_secs_f64().max(f64::MIN_POSITIVE);
    let mut timing = String::from("kind,name,seconds,share\n");
    for (kind, name, d) in timing_rows(&report.timings) {
        timing.push_str(&format!("{kind},{name},{:.6},{:.4}\n", d.as_secs_f64(), d.as_secs_f64() / total));
    }
    let timing_path = dir.join("timing.csv");
    fs::write(&timing_path, &timing).map_err(|e| io_failure(&timing_path, e))?;

    if args.dump_lattices {
        for (k, g) in report.substances.iter().enumerate() {
            let path = dir.join(format!("substance_{k}.csv"));
            let f = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
            g.write_csv(io::BufWriter::new(f))?;
        }
    }

    println!("{} iterations of {} on {} rank(s) x {} worker(s) in {:.3}s", report.iterations, report.preset, cfg.ranks, cfg.workers, total);
    for (kind, name, d) in timing_rows(&report.timings) {
        if kind != "phase" {
            println!("  {name:<20}{:>10.3}s", d.as_secs_f64());
        }
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_verify(suites: &[String]) -> Result<(), Failure> {
    let names: Vec<&str> = if suites.is_empty() { verify::SUITES.to_vec() } else { suites.iter().map(String::as_str).collect() };
    if let Some(bad) = names.iter().find(|n| !verify::SUITES.contains(n)) {
        return Err(Failure::Usage(format!("unknown suite `{bad}` (expected one of {})", verify::SUITES.join(", "))));
    }
    let mut failed = Vec::new();
    for name in names {
        let report = verify::run_suite(name)?;
        print!("{report}");
        io::stdout().flush().ok();
        if !report.passed() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Failed(format!("suites failed: {}", failed.join(", "))))
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let (cfg, preset) = args.common.resolve()?;
    let values: Vec<String> =
        if args.values.is_empty() { bench::default_values(&args.sweep).iter().map(|v| v.to_string()).collect() } else { args.values.clone() };
    let configs = bench::plan(&cfg, &args.sweep, &values).map_err(Failure::Usage)?;
    if matches!(args.sweep.as_str(), "delta" | "compress") && cfg.ranks < 2 {
        return Err(Failure::Usage(format!("the {} sweep measures rank-to-rank messages; pass --ranks 2 or more", args.sweep)));
    }
    match &args.out {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path).map_err(|e| io_failure(path, e))?);
            bench::run(&preset, &args.sweep, &configs, &values, &mut f).map_err(Failure::Failed)?;
            f.flush().map_err(|e| io_failure(path, e))?;
        }
        None => bench::run(&preset, &args.sweep, &configs, &values, &mut io::stdout().lock()).map_err(Failure::Failed)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify { suites } => cmd_verify(suites),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
