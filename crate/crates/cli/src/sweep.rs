//! Parameter sweeps along one axis, optionally repeated for a second "curve"
//! parameter, in one or both access modes.

use anyhow::{anyhow, bail, Result};
use dcf_core::{evaluate, simulate, AccessMode, DelayNormalization, RetryLimit, Scenario, SimConfig};
use rayon::prelude::*;

use crate::record::{RunRecord, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    Pf,
    F,
}

impl std::str::FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Axis::N),
            "pf" | "p_f" => Ok(Axis::Pf),
            "f" => Ok(Axis::F),
            other => bail!("unknown sweep axis `{other}` (expected n, pf or f)"),
        }
    }
}

impl Axis {
    /// Writes `value` into the matching scenario field. `f = inf` selects
    /// persistent retries.
    pub fn apply(self, scenario: &mut Scenario, value: f64) -> Result<()> {
        match self {
            Axis::N => {
                if value < 1.0 || value.fract() != 0.0 || value > f64::from(u32::MAX) {
                    bail!("n must be a positive integer, got {value}");
                }
                scenario.n = value as u32;
            }
            Axis::Pf => {
                if !(0.0..=1.0).contains(&value) {
                    bail!("pf must lie in [0, 1], got {value}");
                }
                scenario.p_f = value;
            }
            Axis::F => {
                scenario.backoff.f = if value.is_infinite() && value > 0.0 {
                    RetryLimit::Persistent
                } else if value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
                    RetryLimit::Finite(value as u32)
                } else {
                    bail!("f must be a non-negative integer or inf, got {value}");
                };
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSel {
    Analytic,
    Sim,
    Both,
}

impl std::str::FromStr for SourceSel {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(SourceSel::Analytic),
            "sim" => Ok(SourceSel::Sim),
            "both" => Ok(SourceSel::Both),
            other => bail!("unknown source `{other}` (expected analytic, sim or both)"),
        }
    }
}

impl SourceSel {
    fn sources(self) -> &'static [Source] {
        match self {
            SourceSel::Analytic => &[Source::Analytic],
            SourceSel::Sim => &[Source::Sim],
            SourceSel::Both => &[Source::Analytic, Source::Sim],
        }
    }
}

/// Metric columns a sweep may restrict its output to.
pub const OUTPUT_COLUMNS: [&str; 8] = ["tau", "p", "p1", "ptr", "ps", "throughput", "delay_us", "discard_prob"];

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Second parameter, one curve per value.
    pub curve: Option<(Axis, Vec<f64>)>,
    /// Everything not swept.
    pub fixed: Scenario,
    pub modes: Vec<AccessMode>,
    pub source: SourceSel,
    /// Metric columns to fill; others are left empty. Empty means all.
    pub outputs: Vec<String>,
    pub normalization: DelayNormalization,
}

/// Parses `1,2,3`, `inf` entries included.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|v| {
            let v = v.trim();
            if v.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                v.parse::<f64>().map_err(|_| anyhow!("invalid sweep value `{v}`"))
            }
        })
        .collect()
}

/// Parses `start:stop:step` into an inclusive linear range.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts = parse_triplet(spec)?;
    let (start, stop, step) = (parts[0], parts[1], parts[2]);
    if step <= 0.0 || stop < start {
        bail!("range `{spec}` needs start <= stop and a positive step");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// Parses `start:stop:count` into `count` log-spaced points with exact
/// endpoints.
pub fn parse_logspace(spec: &str) -> Result<Vec<f64>> {
    let parts = parse_triplet(spec)?;
    let (start, stop, count) = (parts[0], parts[1], parts[2]);
    if start <= 0.0 || stop < start || count < 2.0 || count.fract() != 0.0 {
        bail!("logspace `{spec}` needs 0 < start <= stop and an integer count >= 2");
    }
    Ok(logspace(start, stop, count as usize))
}

fn parse_triplet(spec: &str) -> Result<Vec<f64>> {
    let parts = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| anyhow!("expected three numbers `a:b:c`, got `{spec}`"))?;
    if parts.len() != 3 {
        bail!("expected three numbers `a:b:c`, got `{spec}`");
    }
    Ok(parts)
}

pub fn logspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    let (a, b) = (start.log10(), stop.log10());
    (0..count)
        .map(|k| {
            if k == 0 {
                start
            } else if k == count - 1 {
                stop
            } else {
                10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

/// Built-in reconstructions of the published figure grids.
pub fn preset(name: &str, base: &Scenario, normalization: DelayNormalization) -> Result<SweepSpec> {
    let both = AccessMode::ALL.to_vec();
    let mut fixed = base.clone();
    let spec = match name {
        "fig2" => {
            fixed.p_f = 0.0;
            fixed.backoff.f = RetryLimit::Persistent;
            SweepSpec {
                axis: Axis::N,
                values: (2..=50).map(f64::from).collect(),
                curve: None,
                fixed,
                modes: both,
                source: SourceSel::Analytic,
                outputs: Vec::new(),
                normalization,
            }
        }
        "fig3" => {
            fixed.n = 30;
            SweepSpec {
                axis: Axis::F,
                values: (0..=20).map(f64::from).collect(),
                curve: Some((Axis::Pf, vec![0.1, 0.5])),
                fixed,
                modes: both,
                source: SourceSel::Analytic,
                outputs: Vec::new(),
                normalization,
            }
        }
        "fig4" => {
            fixed.n = 30;
            SweepSpec {
                axis: Axis::Pf,
                values: logspace(0.01, 1.0, 25),
                curve: Some((Axis::F, vec![1.0, 10.0])),
                fixed,
                modes: both,
                source: SourceSel::Analytic,
                outputs: Vec::new(),
                normalization,
            }
        }
        other => bail!("unknown preset `{other}` (expected fig2, fig3 or fig4)"),
    };
    Ok(spec)
}

struct Point {
    scenario: Scenario,
    source: Source,
    seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("sweep needs at least one value");
        }
        if self.modes.is_empty() {
            bail!("sweep needs at least one access mode");
        }
        for o in &self.outputs {
            if !OUTPUT_COLUMNS.contains(&o.as_str()) {
                bail!("unknown output column `{o}`");
            }
        }
        Ok(())
    }

    fn points(&self, sim: &SimConfig) -> Result<Vec<Point>> {
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let curve_values = match &self.curve {
            Some((_, v)) => v.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut points = Vec::new();
        let mut sim_index = 0u64;
        for &value in &values {
            for curve_value in &curve_values {
                for &mode in &self.modes {
                    let mut scenario = Scenario {
                        mode,
                        ..self.fixed.clone()
                    };
                    self.axis.apply(&mut scenario, value)?;
                    if let (Some((axis, _)), Some(cv)) = (&self.curve, curve_value) {
                        axis.apply(&mut scenario, *cv)?;
                    }
                    scenario.validate()?;
                    for &source in self.source.sources() {
                        let seed = match source {
                            Source::Analytic => 0,
                            Source::Sim => {
                                // Non-overlapping replication seeds per point.
                                let s = sim
                                    .seed
                                    .wrapping_add(sim_index.wrapping_mul(u64::from(sim.replications)));
                                sim_index += 1;
                                s
                            }
                        };
                        points.push(Point {
                            scenario: scenario.clone(),
                            source,
                            seed,
                        });
                    }
                }
            }
        }
        Ok(points)
    }

    /// Evaluates every point, concurrently, returning rows sorted by axis
    /// value, then curve value, mode and source.
    pub fn run(&self, sim: &SimConfig) -> Result<Vec<RunRecord>> {
        self.validate()?;
        let points = self.points(sim)?;
        let mut rows = points
            .par_iter()
            .map(|pt| -> Result<RunRecord> {
                match pt.source {
                    Source::Analytic => {
                        let m = evaluate(&pt.scenario, self.normalization)?;
                        Ok(RunRecord::analytic(&pt.scenario, &m))
                    }
                    Source::Sim => {
                        let cfg = SimConfig {
                            seed: pt.seed,
                            ..sim.clone()
                        };
                        let r = simulate(&pt.scenario, &cfg)?;
                        Ok(RunRecord::simulated(&pt.scenario, &cfg, &r))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if !self.outputs.is_empty() {
            for row in &mut rows {
                self.blank_unrequested(row);
            }
        }
        Ok(rows)
    }

    fn blank_unrequested(&self, row: &mut RunRecord) {
        let keep = |name: &str| self.outputs.iter().any(|o| o == name);
        let cells: [(&str, &mut Option<f64>); 8] = [
            ("tau", &mut row.tau),
            ("p", &mut row.p),
            ("p1", &mut row.p1),
            ("ptr", &mut row.ptr),
            ("ps", &mut row.ps),
            ("throughput", &mut row.throughput),
            ("delay_us", &mut row.delay_us),
            ("discard_prob", &mut row.discard_prob),
        ];
        for (name, cell) in cells {
            if !keep(name) {
                *cell = None;
            }
        }
        if !keep("throughput") {
            row.ci95_throughput = None;
        }
        if !keep("delay_us") {
            row.ci95_delay_us = None;
        }
        if !keep("discard_prob") {
            row.ci95_discard = None;
        }
    }
}
