//! Parameter sweeps over a base configuration, one CSV row per setting.

use std::io::Write;
use std::time::Duration;

use agentgrid::engine::simulate;
use agentgrid::ModelPreset;

use crate::config::RunConfig;

pub const SWEEPS: [&str; 6] = ["workers", "ranks", "delta", "compress", "sorting", "static"];

pub fn default_values(sweep: &str) -> &'static [&'static str] {
    match sweep {
        "workers" | "ranks" => &["1", "2", "4"],
        "sorting" => &["0", "1", "10", "100"],
        _ => &["off", "on"],
    }
}

/// The run key a sweep varies.
fn key(sweep: &str) -> Result<&'static str, String> {
    match sweep {
        "workers" => Ok("workers"),
        "ranks" => Ok("ranks"),
        "delta" => Ok("delta"),
        "compress" => Ok("compress"),
        "sorting" => Ok("sort_frequency"),
        "static" => Ok("static_detection"),
        _ => Err(format!("unknown sweep `{sweep}` (expected one of {})", SWEEPS.join(", "))),
    }
}

pub const HEADER: &str = "preset,sweep,value,iterations,total_seconds,median_iteration_seconds,mean_iteration_seconds,aura_bytes_total,aura_bytes_mean,aura_bytes_max,migrated_agents,migration_messages";

/// Settings are validated before anything runs, so a typo fails fast.
pub fn plan(base: &RunConfig, sweep: &str, values: &[String]) -> Result<Vec<RunConfig>, String> {
    let key = key(sweep)?;
    values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(key, v)?;
            Ok(cfg)
        })
        .collect()
}

fn median(mut xs: Vec<Duration>) -> Duration {
    if xs.is_empty() {
        return Duration::ZERO;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2
    }
}

pub fn run<W: Write>(preset: &ModelPreset, sweep: &str, configs: &[RunConfig], values: &[String], out: &mut W) -> Result<(), String> {
    writeln!(out, "{HEADER}").map_err(|e| e.to_string())?;
    for (cfg, value) in configs.iter().zip(values) {
        let r = simulate(preset, &cfg.run_options()).map_err(|e| e.to_string())?;
        let n = r.iteration_times.len().max(1) as f64;
        let mean = r.iteration_times.iter().sum::<Duration>().as_secs_f64() / n;
        let bytes = &r.stats.aura_bytes;
        let total: u64 = bytes.iter().sum();
        writeln!(
            out,
            "{},{sweep},{value},{},{:.6},{:.6e},{:.6e},{total},{:.1},{},{},{}",
            r.preset,
            r.iterations,
            r.timings.total.as_secs_f64(),
            median(r.iteration_times.clone()).as_secs_f64(),
            mean,
            total as f64 / bytes.len().max(1) as f64,
            bytes.iter().max().copied().unwrap_or(0),
            r.stats.migrated_agents,
            r.stats.migration_messages,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}
