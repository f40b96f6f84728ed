//! Analytic-versus-simulation comparison over a grid of scenarios.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use dcf_core::{
    evaluate, simulate, AccessMode, BackoffParams, DelayNormalization, RetryLimit, Scenario, SimConfig,
};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative throughput error.
    pub throughput_rel: f64,
    /// Relative discard error; the absolute floor below also applies.
    pub discard_rel: f64,
    pub discard_abs: f64,
    /// Relative error of the mean delay of delivered frames.
    pub delay_rel: f64,
    /// Normal quantile for the cross-mode discard comparison.
    pub mode_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            throughput_rel: 0.05,
            discard_rel: 0.10,
            discard_abs: 0.005,
            delay_rel: 0.15,
            mode_z: 3.0,
        }
    }
}

impl Tolerances {
    /// Replaces every relative tolerance with `rel`.
    pub fn with_max_rel_err(self, rel: f64) -> Self {
        Self {
            throughput_rel: rel,
            discard_rel: rel,
            delay_rel: rel,
            ..self
        }
    }
}

/// The default grid: n ∈ {2, 5, 10, 30} × P_f ∈ {0, 0.1, 0.3} × both modes,
/// W = 8, m = 5, f = 10.
pub fn default_grid(base: &Scenario) -> Vec<Scenario> {
    let mut grid = Vec::new();
    for n in [2, 5, 10, 30] {
        for p_f in [0.0, 0.1, 0.3] {
            for mode in AccessMode::ALL {
                grid.push(Scenario {
                    n,
                    p_f,
                    mode,
                    backoff: BackoffParams {
                        w0: 8,
                        m: 5,
                        f: RetryLimit::Finite(10),
                    },
                    ..base.clone()
                });
            }
        }
    }
    grid
}

/// Parses `n=1:pf=0,n=5:pf=0.1:mode=rtscts`. Points without a mode expand to
/// both modes; unspecified keys come from `base`.
pub fn parse_points(spec: &str, base: &Scenario) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for point in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let mut s = base.clone();
        let mut mode = None;
        for kv in point.split(':') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value in point `{point}`, got `{kv}`"))?;
            let v = v.trim();
            match k.trim() {
                "n" => s.n = v.parse()?,
                "pf" => s.p_f = v.parse()?,
                "w0" => s.backoff.w0 = v.parse()?,
                "m" => s.backoff.m = v.parse()?,
                "f" => s.backoff.f = v.parse::<RetryLimit>()?,
                "mode" => mode = Some(v.parse::<AccessMode>()?),
                other => bail!("unknown key `{other}` in point `{point}`"),
            }
        }
        s.validate()?;
        match mode {
            Some(m) => out.push(Scenario { mode: m, ..s }),
            None => {
                for m in AccessMode::ALL {
                    out.push(Scenario { mode: m, ..s.clone() });
                }
            }
        }
    }
    if out.is_empty() {
        bail!("no validation points given");
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub mode: String,
    pub n: u32,
    pub w0: u32,
    pub m: u32,
    pub f: String,
    pub pf: f64,
    pub seed: u64,
    pub analytic_throughput: f64,
    pub sim_throughput: f64,
    pub ci95_throughput: Option<f64>,
    pub rel_err_throughput: f64,
    pub analytic_discard: f64,
    pub sim_discard: f64,
    pub ci95_discard: Option<f64>,
    pub abs_err_discard: f64,
    /// Mean delay of delivered frames.
    pub analytic_delay_us: Option<f64>,
    pub sim_delay_us: Option<f64>,
    pub ci95_delay_us: Option<f64>,
    pub rel_err_delay: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModePairReport {
    pub n: u32,
    pub pf: f64,
    pub f: String,
    pub analytic_equal: bool,
    pub sim_basic: f64,
    pub sim_rtscts: f64,
    pub z_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tolerances: Tolerances,
    pub frames: u64,
    pub reps: u32,
    pub points: Vec<PointReport>,
    pub mode_pairs: Vec<ModePairReport>,
    pub pass: bool,
}

fn relative(estimate: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate - reference).abs() / reference.abs()
    }
}

fn check_point(scenario: &Scenario, cfg: &SimConfig, tol: &Tolerances) -> Result<PointReport> {
    let analytic = evaluate(scenario, DelayNormalization::Conditional)?;
    let sim = simulate(scenario, cfg)?;
    let ci = sim.ci95;
    let mut checks = Vec::new();

    let rel_s = relative(sim.pooled.throughput, analytic.throughput);
    checks.push(Check {
        name: "throughput".into(),
        pass: rel_s <= tol.throughput_rel,
        detail: format!("rel err {:.4} <= {}", rel_s, tol.throughput_rel),
    });

    let abs_d = (sim.pooled.discard - analytic.discard_prob).abs();
    let bound = (tol.discard_rel * analytic.discard_prob).max(tol.discard_abs);
    checks.push(Check {
        name: "discard".into(),
        pass: abs_d <= bound,
        detail: format!("abs err {abs_d:.3e} <= {bound:.3e}"),
    });
    if analytic.discard_prob == 0.0 {
        checks.push(Check {
            name: "discard exact zero".into(),
            pass: sim.pooled.discard == 0.0,
            detail: format!("sim discard {}", sim.pooled.discard),
        });
    }

    let rel_t = match (sim.pooled.delay_us, analytic.delay_us) {
        (Some(s), Some(a)) => Some(relative(s, a)),
        _ => None,
    };
    checks.push(Check {
        name: "delay".into(),
        pass: match (rel_t, analytic.delay_us, sim.pooled.delay_us) {
            (Some(r), _, _) => r <= tol.delay_rel,
            // Nothing delivered on either side.
            (None, Some(a), None) => a == 0.0,
            _ => false,
        },
        detail: match rel_t {
            Some(r) => format!("rel err {:.4} <= {}", r, tol.delay_rel),
            None => "no delivered frames".into(),
        },
    });

    // A lone station has no competitors, so the analysis is exact and the
    // estimates must cover it.
    if scenario.n == 1 {
        if let (Some(ci), Some(a), Some(s)) = (ci, analytic.delay_us, sim.pooled.delay_us) {
            let hw = ci.delay_us.unwrap_or(0.0);
            checks.push(Check {
                name: "exact delay within ci".into(),
                pass: (s - a).abs() <= hw,
                detail: format!("|{s:.3} - {a:.3}| <= {hw:.3}"),
            });
            if analytic.discard_prob > 0.0 {
                checks.push(Check {
                    name: "exact discard within ci".into(),
                    pass: (sim.pooled.discard - analytic.discard_prob).abs() <= ci.discard,
                    detail: format!(
                        "|{:.6} - {:.6}| <= {:.6}",
                        sim.pooled.discard, analytic.discard_prob, ci.discard
                    ),
                });
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(PointReport {
        mode: scenario.mode.to_string(),
        n: scenario.n,
        w0: scenario.backoff.w0,
        m: scenario.backoff.m,
        f: scenario.backoff.f.to_string(),
        pf: scenario.p_f,
        seed: cfg.seed,
        analytic_throughput: analytic.throughput,
        sim_throughput: sim.pooled.throughput,
        ci95_throughput: ci.map(|c| c.throughput),
        rel_err_throughput: rel_s,
        analytic_discard: analytic.discard_prob,
        sim_discard: sim.pooled.discard,
        ci95_discard: ci.map(|c| c.discard),
        abs_err_discard: abs_d,
        analytic_delay_us: analytic.delay_us,
        sim_delay_us: sim.pooled.delay_us,
        ci95_delay_us: ci.and_then(|c| c.delay_us),
        rel_err_delay: rel_t,
        checks,
        pass,
    })
}

/// Runs every point with its own block of replication seeds and compares
/// discard estimates across access modes.
pub fn run(points: &[Scenario], sim: &SimConfig, tol: &Tolerances) -> Result<ValidationReport> {
    let reports = points
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let cfg = SimConfig {
                seed: sim
                    .seed
                    .wrapping_add((k as u64).wrapping_mul(u64::from(sim.replications))),
                ..sim.clone()
            };
            check_point(s, &cfg, tol)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mode_pairs = Vec::new();
    for (i, a) in reports.iter().enumerate() {
        if a.mode != AccessMode::Basic.as_str() {
            continue;
        }
        let partner = reports[i + 1..].iter().find(|b| {
            b.mode == AccessMode::RtsCts.as_str()
                && (b.n, b.w0, b.m, &b.f) == (a.n, a.w0, a.m, &a.f)
                && b.pf == a.pf
        });
        let Some(b) = partner else { continue };
        let se = |ci: Option<f64>| ci.unwrap_or(0.0) / dcf_core::sim::Z95;
        let z_bound = tol.mode_z * (se(a.ci95_discard).powi(2) + se(b.ci95_discard).powi(2)).sqrt();
        let analytic_equal = a.analytic_discard == b.analytic_discard;
        mode_pairs.push(ModePairReport {
            n: a.n,
            pf: a.pf,
            f: a.f.clone(),
            analytic_equal,
            sim_basic: a.sim_discard,
            sim_rtscts: b.sim_discard,
            z_bound,
            pass: analytic_equal && (a.sim_discard - b.sim_discard).abs() <= z_bound,
        });
    }

    let pass = reports.iter().all(|r| r.pass) && mode_pairs.iter().all(|p| p.pass);
    Ok(ValidationReport {
        tolerances: *tol,
        frames: sim.frames_target,
        reps: sim.replications,
        points: reports,
        mode_pairs,
        pass,
    })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<7} {:>3} {:>5} {:>4} | {:>8} {:>8} {:>7} | {:>9} {:>9} | {:>11} {:>11} {:>7} | result",
            "mode", "n", "pf", "f", "S_ana", "S_sim", "rel", "PD_ana", "PD_sim", "Td_ana", "Td_sim", "rel"
        );
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:<7} {:>3} {:>5} {:>4} | {:>8.5} {:>8.5} {:>7.4} | {:>9.3e} {:>9.3e} | {:>11} {:>11} {:>7} | {}",
                p.mode,
                p.n,
                p.pf,
                p.f,
                p.analytic_throughput,
                p.sim_throughput,
                p.rel_err_throughput,
                p.analytic_discard,
                p.sim_discard,
                fmt_opt(p.analytic_delay_us, 1),
                fmt_opt(p.sim_delay_us, 1),
                fmt_opt(p.rel_err_delay, 4),
                if p.pass { "PASS" } else { "FAIL" }
            );
            for c in p.checks.iter().filter(|c| !c.pass) {
                let _ = writeln!(s, "    FAIL {}: {}", c.name, c.detail);
            }
        }
        for m in &self.mode_pairs {
            let _ = writeln!(
                s,
                "discard basic vs rtscts n={} pf={} f={}: analytic equal {}, sim {:.3e} vs {:.3e} (bound {:.3e}) {}",
                m.n,
                m.pf,
                m.f,
                m.analytic_equal,
                m.sim_basic,
                m.sim_rtscts,
                m.z_bound,
                if m.pass { "PASS" } else { "FAIL" }
            );
        }
        let worst_delay = self
            .points
            .iter()
            .filter_map(|p| p.rel_err_delay)
            .fold(0.0, f64::max);
        let _ = writeln!(s, "largest delay gap (renewal approximation): {worst_delay:.4}");
        let _ = writeln!(s, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}
