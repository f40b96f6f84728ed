//! Effective configuration: built-in defaults, then a flat `key = value`
//! config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use dcf_core::{AccessMode, DelayNormalization, RetryLimit, Scenario, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand. All optional so that a config file can
/// fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Access mode: basic or rtscts.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Number of saturated stations.
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Initial contention window W.
    #[arg(long, global = true)]
    pub w0: Option<u32>,
    /// Doublings before the window freezes.
    #[arg(long, global = true)]
    pub m: Option<u32>,
    /// Extra frozen-window retries, or `inf` to retry until success.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Frame error probability.
    #[arg(long, global = true)]
    pub pf: Option<f64>,
    /// Channel rate in Mb/s.
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Payload size in octets.
    #[arg(long, global = true)]
    pub payload: Option<u32>,
    /// Flat key = value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Independent replications per simulated point.
    #[arg(long, global = true)]
    pub reps: Option<u32>,
    /// Completed frames per replication, warmup included.
    #[arg(long, global = true)]
    pub frames: Option<u64>,
    /// Leading frames excluded from the estimates.
    #[arg(long, global = true)]
    pub warmup: Option<u64>,
    /// paper (stage-weighted, discards included) or conditional (delivered frames only).
    #[arg(long = "delay-normalization", global = true)]
    pub delay_normalization: Option<String>,
}

const KEYS: [&str; 15] = [
    "mode",
    "n",
    "w0",
    "m",
    "f",
    "pf",
    "rate",
    "payload",
    "format",
    "out",
    "seed",
    "reps",
    "frames",
    "warmup",
    "delay-normalization",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: Scenario,
    pub sim: SimConfig,
    pub normalization: DelayNormalization,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            sim: SimConfig::default(),
            normalization: DelayNormalization::Paper,
            format: Format::Csv,
            out: None,
        }
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", lineno + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config file {}", path.display()))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value `{value}` for {key}: {e}"))
}

impl GlobalArgs {
    /// Flags as `key = value` pairs, spelled like config-file entries.
    fn as_pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = Vec::new();
        let mut push = |key: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((key, v));
            }
        };
        push("mode", self.mode.clone());
        push("n", self.n.map(|v| v.to_string()));
        push("w0", self.w0.map(|v| v.to_string()));
        push("m", self.m.map(|v| v.to_string()));
        push("f", self.f.clone());
        push("pf", self.pf.map(|v| v.to_string()));
        push("rate", self.rate.map(|v| v.to_string()));
        push("payload", self.payload.map(|v| v.to_string()));
        push(
            "format",
            self.format.map(|v| match v {
                Format::Csv => "csv".to_string(),
                Format::Json => "json".to_string(),
            }),
        );
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("reps", self.reps.map(|v| v.to_string()));
        push("frames", self.frames.map(|v| v.to_string()));
        push("warmup", self.warmup.map(|v| v.to_string()));
        push("delay-normalization", self.delay_normalization.clone());
        pairs
    }

    pub fn resolve(&self) -> Result<Settings> {
        let mut merged = match &self.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        for (k, v) in self.as_pairs() {
            merged.insert(k.to_string(), v);
        }
        Settings::from_pairs(&merged)
    }
}

impl Settings {
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Settings> {
        let mut s = Settings::default();
        for (key, value) in pairs {
            match key.as_str() {
                "mode" => s.scenario.mode = parse::<AccessMode>(key, value)?,
                "n" => s.scenario.n = parse(key, value)?,
                "w0" => s.scenario.backoff.w0 = parse(key, value)?,
                "m" => s.scenario.backoff.m = parse(key, value)?,
                "f" => s.scenario.backoff.f = parse::<RetryLimit>(key, value)?,
                "pf" => s.scenario.p_f = parse(key, value)?,
                "rate" => s.scenario.timing.channel_rate = parse(key, value)?,
                "payload" => s.scenario.timing.payload_octets = parse(key, value)?,
                "format" => {
                    s.format = Format::from_str(value, true)
                        .map_err(|_| anyhow!("invalid value `{value}` for format"))?
                }
                "out" => s.out = Some(PathBuf::from(value)),
                "seed" => s.sim.seed = parse(key, value)?,
                "reps" => s.sim.replications = parse(key, value)?,
                "frames" => s.sim.frames_target = parse(key, value)?,
                "warmup" => s.sim.warmup_frames = parse(key, value)?,
                "delay-normalization" => s.normalization = parse::<DelayNormalization>(key, value)?,
                other => bail!("unknown key `{other}`"),
            }
        }
        s.scenario.validate()?;
        Ok(s)
    }

    /// One-line echo of the effective configuration, itself valid config
    /// syntax once split on spaces.
    pub fn echo(&self) -> String {
        let sc = &self.scenario;
        let mut line = String::new();
        let _ = write!(
            line,
            "mode={} n={} w0={} m={} f={} pf={} rate={} payload={} seed={} reps={} frames={} warmup={} delay-normalization={}",
            sc.mode,
            sc.n,
            sc.backoff.w0,
            sc.backoff.m,
            sc.backoff.f,
            sc.p_f,
            sc.timing.channel_rate,
            sc.timing.payload_octets,
            self.sim.seed,
            self.sim.replications,
            self.sim.frames_target,
            self.sim.warmup_frames,
            self.normalization,
        );
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("dcf-cli-settings-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scenario.conf");
        std::fs::write(&path, "# comment\nn = 12\npf=0.25\nmode = rtscts\nf = inf\n").unwrap();
        let args = GlobalArgs {
            config: Some(path),
            n: Some(3),
            ..Default::default()
        };
        let s = args.resolve().unwrap();
        assert_eq!(s.scenario.n, 3);
        assert_eq!(s.scenario.p_f, 0.25);
        assert_eq!(s.scenario.mode, AccessMode::RtsCts);
        assert_eq!(s.scenario.backoff.f, RetryLimit::Persistent);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_config("nn = 3").is_err());
        assert!(parse_config("just text").is_err());
        let args = GlobalArgs {
            pf: Some(1.5),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
        let args = GlobalArgs {
            f: Some("lots".into()),
            ..Default::default()
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let args = GlobalArgs {
            n: Some(7),
            pf: Some(0.1),
            f: Some("inf".into()),
            mode: Some("rtscts".into()),
            seed: Some(99),
            ..Default::default()
        };
        let s = args.resolve().unwrap();
        let text = s.echo().split(' ').collect::<Vec<_>>().join("\n");
        let again = Settings::from_pairs(&parse_config(&text).unwrap()).unwrap();
        assert_eq!(again.scenario, s.scenario);
        assert_eq!(again.sim, s.sim);
        assert_eq!(again.normalization, s.normalization);
    }
}
