//! Run configuration: a flat `key = value` file with optional `[preset]` sections.
//!
//! ```text
//! # top-level keys configure the run
//! preset = sir
//! seed = 4
//! ranks = 2
//! delta = on
//!
//! # a section applies when the selected preset matches its name
//! [sir]
//! n_susceptible = 500
//! ```
//!
//! Flags override the file. The resolved configuration is written back in the same format, so an
//! echoed file reproduces the run.

use std::fmt::Write as _;
use std::path::PathBuf;

use agentgrid::exchange::{ChannelConfig, CodecKind};
use agentgrid::{ExecutionMode, ExecutionOrder, ModelPreset, RunOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub iterations: Option<u64>,
    pub workers: usize,
    pub ranks: usize,
    pub mode: ExecutionMode,
    pub order: ExecutionOrder,
    pub sort_frequency: u32,
    pub static_detection: bool,
    pub behavior_frequency: u32,
    pub mechanics_frequency: u32,
    pub diffusion_frequency: u32,
    pub partition_factor: u32,
    pub delta: bool,
    pub compress: bool,
    pub ref_update: u64,
    pub batch_bytes: usize,
    pub out: PathBuf,
    /// `(section, key, value)` in file order; flags add entries with the section set to the preset.
    pub params: Vec<(String, String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = RunOptions::default();
        Self {
            preset: None,
            seed: o.seed,
            iterations: o.iterations,
            workers: o.workers,
            ranks: o.ranks,
            mode: o.mode,
            order: o.order,
            sort_frequency: o.sort_frequency,
            static_detection: o.static_detection,
            behavior_frequency: o.behavior_frequency,
            mechanics_frequency: o.mechanics_frequency,
            diffusion_frequency: o.diffusion_frequency,
            partition_factor: o.partition_factor,
            delta: o.channel.delta,
            compress: o.channel.codec == CodecKind::Lz4,
            ref_update: o.channel.reference_update,
            batch_bytes: o.batch_bytes,
            out: PathBuf::from("out"),
            params: Vec::new(),
        }
    }
}

pub fn parse_toggle(value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got `{value}`")),
    }
}

fn toggle(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("`{key}` expects a non-negative integer, got `{value}`"))
}

impl RunConfig {
    /// Set one top-level key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "preset" => self.preset = Some(value.to_string()),
            "seed" => self.seed = number(key, value)?,
            "iterations" => self.iterations = if value == "default" { None } else { Some(number(key, value)?) },
            "workers" => self.workers = number(key, value)?,
            "ranks" => self.ranks = number(key, value)?,
            "mode" => self.mode = value.parse().map_err(|e| format!("{e}"))?,
            "order" => self.order = value.parse().map_err(|e| format!("{e}"))?,
            "sort_frequency" => self.sort_frequency = number(key, value)?,
            "static_detection" => self.static_detection = parse_toggle(value)?,
            "behavior_frequency" => self.behavior_frequency = number(key, value)?,
            "mechanics_frequency" => self.mechanics_frequency = number(key, value)?,
            "diffusion_frequency" => self.diffusion_frequency = number(key, value)?,
            "partition_factor" => self.partition_factor = number(key, value)?,
            "delta" => self.delta = parse_toggle(value)?,
            "compress" => self.compress = parse_toggle(value)?,
            "ref_update" => self.ref_update = number(key, value)?,
            "batch_bytes" => self.batch_bytes = number(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(format!("unknown configuration key `{key}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| format!("line {}: unterminated section header", n + 1))?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            match &section {
                None => cfg.set(k, v).map_err(|e| format!("line {}: {e}", n + 1))?,
                Some(s) => cfg.params.push((s.clone(), k.to_string(), v.to_string())),
            }
        }
        Ok(cfg)
    }

    /// Preset with every matching section applied in order.
    pub fn build_preset(&self) -> Result<ModelPreset, String> {
        let name = self.preset.as_deref().ok_or("no preset given (positional argument or `preset =` in the config)")?;
        let mut preset = ModelPreset::by_name(name).map_err(|e| e.to_string())?;
        for (section, k, v) in &self.params {
            if section == name || section == preset.name() {
                preset.set(k, v).map_err(|e| format!("[{section}] {e}"))?;
            }
        }
        preset.validate().map_err(|e| e.to_string())?;
        Ok(preset)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            iterations: self.iterations,
            workers: self.workers,
            ranks: self.ranks,
            mode: self.mode,
            order: self.order,
            sort_frequency: self.sort_frequency,
            static_detection: self.static_detection,
            behavior_frequency: self.behavior_frequency,
            mechanics_frequency: self.mechanics_frequency,
            diffusion_frequency: self.diffusion_frequency,
            partition_factor: self.partition_factor,
            channel: ChannelConfig {
                delta: self.delta,
                codec: if self.compress { CodecKind::Lz4 } else { CodecKind::Identity },
                reference_update: self.ref_update,
            },
            batch_bytes: self.batch_bytes,
            keep_population: false,
        }
    }

    /// Fully resolved configuration in the input format.
    pub fn echo(&self, preset: &ModelPreset) -> String {
        let mut s = String::from("# agentgrid run configuration\n");
        let iterations = self.iterations.unwrap_or_else(|| preset.default_iterations());
        let name = self.preset.as_deref().unwrap_or(preset.name());
        let rows: [(&str, String); 18] = [
            ("preset", name.to_string()),
            ("seed", self.seed.to_string()),
            ("iterations", iterations.to_string()),
            ("workers", self.workers.to_string()),
            ("ranks", self.ranks.to_string()),
            ("mode", self.mode.to_string()),
            ("order", self.order.to_string()),
            ("sort_frequency", self.sort_frequency.to_string()),
            ("static_detection", toggle(self.static_detection).into()),
            ("behavior_frequency", self.behavior_frequency.to_string()),
            ("mechanics_frequency", self.mechanics_frequency.to_string()),
            ("diffusion_frequency", self.diffusion_frequency.to_string()),
            ("partition_factor", self.partition_factor.to_string()),
            ("delta", toggle(self.delta).into()),
            ("compress", toggle(self.compress).into()),
            ("ref_update", self.ref_update.to_string()),
            ("batch_bytes", self.batch_bytes.to_string()),
            ("out", self.out.display().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "\n[{name}]");
        for (k, v) in preset.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = RunConfig::parse("preset = sir # measles\nseed=7\n\n[sir]\nn_susceptible = 100\n[clustering]\nresolution = 16\n").unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("sir"));
        assert_eq!(cfg.seed, 7);
        let p = cfg.build_preset().unwrap();
        assert!(p.entries().contains(&("n_susceptible", "100".to_string())));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("seed 3").is_err());
        assert!(RunConfig::parse("colour = blue").is_err());
        assert!(RunConfig::parse("[sir\nx = 1").is_err());
        assert!(RunConfig::parse("delta = maybe").is_err());
        assert!(RunConfig::parse("workers = -1").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::parse("preset = clustering\nranks = 2\ndelta = off\nmode = in-place\n[clustering]\nresolution = 32\n").unwrap();
        cfg.iterations = Some(12);
        let preset = cfg.build_preset().unwrap();
        let echoed = cfg.echo(&preset);
        let again = RunConfig::parse(&echoed).unwrap();
        assert_eq!(again.run_options(), cfg.run_options());
        assert_eq!(again.build_preset().unwrap(), preset);
        assert_eq!(again.echo(&preset), echoed);
    }

    #[test]
    fn unknown_preset_parameter() {
        let cfg = RunConfig::parse("preset = sir\n[sir]\nwings = 2\n").unwrap();
        assert!(cfg.build_preset().is_err());
    }
}
