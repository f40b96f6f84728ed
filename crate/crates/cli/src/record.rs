//! Output rows and their CSV/JSON encodings.

use std::io::Write;

use anyhow::Result;
use dcf_core::{PerfMetrics, Scenario, SimConfig, SimResult};
use serde::Serialize;

pub const CSV_HEADER: &str = "mode,n,w0,m,f,pf,source,tau,p,p1,ptr,ps,throughput,delay_us,discard_prob,seed,reps,frames,ci95_throughput,ci95_delay_us,ci95_discard";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Sim,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Sim => "sim",
        }
    }
}

/// One output row. Every row carries its full parameter point; columns that
/// do not apply to the row's source are empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub mode: String,
    pub n: u32,
    pub w0: u32,
    pub m: u32,
    pub f: String,
    pub pf: f64,
    pub source: Source,
    pub tau: Option<f64>,
    pub p: Option<f64>,
    pub p1: Option<f64>,
    pub ptr: Option<f64>,
    pub ps: Option<f64>,
    pub throughput: Option<f64>,
    pub delay_us: Option<f64>,
    pub discard_prob: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<u32>,
    pub frames: Option<u64>,
    pub ci95_throughput: Option<f64>,
    pub ci95_delay_us: Option<f64>,
    pub ci95_discard: Option<f64>,
}

impl RunRecord {
    fn base(scenario: &Scenario, source: Source) -> Self {
        RunRecord {
            mode: scenario.mode.to_string(),
            n: scenario.n,
            w0: scenario.backoff.w0,
            m: scenario.backoff.m,
            f: scenario.backoff.f.to_string(),
            pf: scenario.p_f,
            source,
            tau: None,
            p: None,
            p1: None,
            ptr: None,
            ps: None,
            throughput: None,
            delay_us: None,
            discard_prob: None,
            seed: None,
            reps: None,
            frames: None,
            ci95_throughput: None,
            ci95_delay_us: None,
            ci95_discard: None,
        }
    }

    pub fn analytic(scenario: &Scenario, metrics: &PerfMetrics) -> Self {
        RunRecord {
            tau: Some(metrics.solution.tau),
            p: Some(metrics.solution.p),
            p1: Some(metrics.solution.p1),
            ptr: Some(metrics.p_tr),
            ps: Some(metrics.p_s),
            throughput: Some(metrics.throughput),
            delay_us: metrics.delay_us,
            discard_prob: Some(metrics.discard_prob),
            ..Self::base(scenario, Source::Analytic)
        }
    }

    /// Sim rows estimate p, p1, ptr and ps as ratios of the pooled counters.
    pub fn simulated(scenario: &Scenario, cfg: &SimConfig, result: &SimResult) -> Self {
        let c = &result.counts;
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let busy = c.successes + c.collisions + c.error_slots;
        let failed = c.attempts - c.successes;
        let collided = failed - c.error_slots;
        let ci = result.ci95.as_ref();
        RunRecord {
            tau: Some(result.pooled.tau),
            p: ratio(failed, c.attempts),
            p1: ratio(collided, c.attempts),
            ptr: ratio(busy, c.slots),
            ps: ratio(c.successes + c.error_slots, busy),
            throughput: Some(result.pooled.throughput),
            delay_us: result.pooled.delay_us,
            discard_prob: Some(result.pooled.discard),
            seed: Some(cfg.seed),
            reps: Some(cfg.replications),
            frames: Some(cfg.frames_target),
            ci95_throughput: ci.map(|c| c.throughput),
            ci95_delay_us: ci.and_then(|c| c.delay_us),
            ci95_discard: ci.map(|c| c.discard),
            ..Self::base(scenario, Source::Sim)
        }
    }

    pub fn csv_row(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(ToString::to_string).unwrap_or_default()
        }
        [
            self.mode.clone(),
            self.n.to_string(),
            self.w0.to_string(),
            self.m.to_string(),
            self.f.clone(),
            self.pf.to_string(),
            self.source.as_str().to_string(),
            opt(&self.tau),
            opt(&self.p),
            opt(&self.p1),
            opt(&self.ptr),
            opt(&self.ps),
            opt(&self.throughput),
            opt(&self.delay_us),
            opt(&self.discard_prob),
            opt(&self.seed),
            opt(&self.reps),
            opt(&self.frames),
            opt(&self.ci95_throughput),
            opt(&self.ci95_delay_us),
            opt(&self.ci95_discard),
        ]
        .join(",")
    }
}

/// Writes `#` comment lines, the header, then one line per record.
pub fn write_csv<W: Write>(out: &mut W, comments: &[String], records: &[RunRecord]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dcf_core::{evaluate, DelayNormalization};

    #[test]
    fn analytic_rows_leave_sim_columns_empty() {
        let s = Scenario {
            n: 1,
            ..Default::default()
        };
        let m = evaluate(&s, DelayNormalization::Paper).unwrap();
        let row = RunRecord::analytic(&s, &m).csv_row();
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), CSV_HEADER.split(',').count());
        assert_eq!(&cells[..7], &["basic", "1", "8", "5", "10", "0", "analytic"]);
        assert!(cells[15..].iter().all(|c| c.is_empty()));
        assert_eq!(cells[14], "0");
    }
}
