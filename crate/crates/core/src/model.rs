//! Backoff Markov chain and the fixed point for the per-slot transmission
//! probability τ.
//!
//! A station in backoff stage `i` draws its timer uniformly from
//! `0..window_size(i)`. Every unsuccessful attempt (collision or frame error)
//! advances the stage; after stage `m + f` the frame is dropped. The
//! stationary distribution gives τ as a function of the per-attempt failure
//! probability `p`, and `p` in turn depends on τ through the other `n - 1`
//! stations. [`solve_fixed_point`] finds the unique τ satisfying both.

use serde::{Deserialize, Serialize};

use crate::error::{DcfError, Result};
use crate::timing::{AccessMode, ChannelTimes, MacTimingParams};

/// Retries allowed in the frozen-window stages beyond `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RetryLimit {
    Finite(u32),
    /// Persist until success (f → ∞); frames are never dropped.
    Persistent,
}

impl RetryLimit {
    pub fn finite(self) -> Option<u32> {
        match self {
            RetryLimit::Finite(f) => Some(f),
            RetryLimit::Persistent => None,
        }
    }
}

impl std::fmt::Display for RetryLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RetryLimit::Finite(v) => write!(f, "{v}"),
            RetryLimit::Persistent => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for RetryLimit {
    type Err = DcfError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("persistent") {
            return Ok(RetryLimit::Persistent);
        }
        s.parse::<u32>().map(RetryLimit::Finite).map_err(|_| {
            DcfError::InvalidParameter(format!("f must be a non-negative integer or `inf`, got `{s}`"))
        })
    }
}

/// Contention window schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackoffParams {
    /// Initial contention window W (slots).
    pub w0: u32,
    /// Number of doublings before the window freezes.
    pub m: u32,
    pub f: RetryLimit,
}

impl Default for BackoffParams {
    fn default() -> Self {
        Self {
            w0: 8,
            m: 5,
            f: RetryLimit::Finite(10),
        }
    }
}

impl BackoffParams {
    pub fn validate(&self) -> Result<()> {
        if self.w0 < 1 {
            return Err(DcfError::InvalidParameter("w0 must be at least 1".into()));
        }
        // Keep W·2^m exactly representable and the series sums well scaled.
        if self.m > 40 || f64::from(self.w0) * 2f64.powi(self.m as i32) > 1e15 {
            return Err(DcfError::InvalidParameter(format!(
                "window w0·2^m too large (w0 = {}, m = {})",
                self.w0, self.m
            )));
        }
        Ok(())
    }

    /// Index of the last stage, `m + f`; `None` in persistent mode.
    pub fn last_stage(&self) -> Option<u32> {
        self.f.finite().map(|f| self.m + f)
    }

    /// Number of transmission attempts before a drop, `m + f + 1`.
    pub fn retry_limit(&self) -> Option<u32> {
        self.last_stage().map(|k| k + 1)
    }

    /// W_i = W·2^min(i, m).
    pub fn window_size(&self, stage: u32) -> Result<f64> {
        if let Some(last) = self.last_stage() {
            if stage > last {
                return Err(DcfError::StageOutOfRange { stage, last });
            }
        }
        Ok(self.window_unchecked(stage))
    }

    pub(crate) fn window_unchecked(&self, stage: u32) -> f64 {
        f64::from(self.w0) * 2f64.powi(stage.min(self.m) as i32)
    }
}

/// One evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of saturated stations.
    pub n: u32,
    /// Per-attempt frame error probability.
    pub p_f: f64,
    pub backoff: BackoffParams,
    pub mode: AccessMode,
    pub timing: MacTimingParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 30,
            p_f: 0.0,
            backoff: BackoffParams::default(),
            mode: AccessMode::Basic,
            timing: MacTimingParams::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(DcfError::InvalidParameter("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_f) {
            return Err(DcfError::InvalidParameter(format!(
                "p_f must lie in [0, 1], got {}",
                self.p_f
            )));
        }
        self.backoff.validate()?;
        self.timing.validate()
    }

    pub fn channel_times(&self) -> ChannelTimes {
        self.timing.channel_times(self.mode)
    }
}

/// Collision-only probability `p1` and total failure probability `p` seen by
/// an attempt when every other station transmits with probability `tau`.
pub fn failure_prob(tau: f64, n: u32, p_f: f64) -> (f64, f64) {
    let p1 = 1.0 - (1.0 - tau).powi(n as i32 - 1);
    // Written out so that p_f = 1 gives p = 1 exactly.
    let p = if p_f >= 1.0 { 1.0 } else { p1 + p_f - p1 * p_f };
    (p1, p)
}

/// τ as a function of the per-attempt failure probability `p`.
///
/// Finite `f` uses the series `b00 = 2 / Σ p^i (W_i + 1)`, `τ = b00 Σ p^i`,
/// which has no singularity anywhere on `[0, 1]`. Persistent mode uses the
/// f → ∞ limit, undefined at `p = 1`.
pub fn tau_of_p(p: f64, backoff: &BackoffParams) -> Result<f64> {
    check_probability("p", p)?;
    match backoff.f {
        RetryLimit::Finite(_) => Ok(tau_series(p, backoff)),
        RetryLimit::Persistent => {
            if p >= 1.0 {
                return Err(DcfError::Domain(
                    "tau_of_p is undefined at p = 1 in persistent mode".into(),
                ));
            }
            Ok(tau_persistent(p, backoff))
        }
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(DcfError::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn tau_series(p: f64, backoff: &BackoffParams) -> f64 {
    let last = backoff.last_stage().expect("finite retry limit");
    let mut weight = 1.0;
    let mut attempts = 0.0;
    let mut occupancy = 0.0;
    for i in 0..=last {
        attempts += weight;
        occupancy += weight * (backoff.window_unchecked(i) + 1.0);
        weight *= p;
    }
    2.0 * attempts / occupancy
}

/// Σ_{k<m} (2p)^k, the stable form of (1 - (2p)^m) / (1 - 2p).
fn doubling_sum(p: f64, m: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..m {
        sum += term;
        term *= 2.0 * p;
    }
    sum
}

// (1 - p - p(2p)^m) / (1 - 2p) = (1 - p) Σ_{k<m} (2p)^k + (2p)^m
fn tau_persistent(p: f64, backoff: &BackoffParams) -> f64 {
    let w = f64::from(backoff.w0);
    let m = backoff.m;
    let ratio = (1.0 - p) * doubling_sum(p, m) + (2.0 * p).powi(m as i32);
    2.0 / (1.0 + w * ratio)
}

/// Closed form of [`tau_of_p`] for finite `f`:
/// `2(1-2p)(1-p^{m+f+1}) / [(1-2p)(1-p^{m+f+1}) + W(1 - p - p(2p)^m (1 + p^f - 2p^{1+f}))]`.
///
/// Singular at `p = 1/2` and `p = 1`; kept as a cross-check of [`tau_of_p`].
pub fn tau_closed_form(p: f64, backoff: &BackoffParams) -> Option<f64> {
    let f = backoff.f.finite()?;
    let w = f64::from(backoff.w0);
    let m = backoff.m as i32;
    let tail = 1.0 - p.powi(m + f as i32 + 1);
    let num = 2.0 * (1.0 - 2.0 * p) * tail;
    let den = (1.0 - 2.0 * p) * tail
        + w * (1.0 - p - p * (2.0 * p).powi(m) * (1.0 + p.powi(f as i32) - 2.0 * p.powi(1 + f as i32)));
    Some(num / den)
}

/// Closed f → ∞ form `2(1-2p) / [(1-2p) + W(1 - p - p(2p)^m)]`.
pub fn tau_persistent_closed_form(p: f64, w0: u32, m: u32) -> f64 {
    let w = f64::from(w0);
    let q = 1.0 - 2.0 * p;
    2.0 * q / (q + w * (1.0 - p - p * (2.0 * p).powi(m as i32)))
}

/// The classical persist-until-success form
/// `2(1-2p) / [(1-2p)(W+1) + pW(1-(2p)^m)]`.
pub fn tau_classical(p: f64, w0: u32, m: u32) -> f64 {
    let w = f64::from(w0);
    let q = 1.0 - 2.0 * p;
    2.0 * q / (q * (w + 1.0) + p * w * (1.0 - (2.0 * p).powi(m as i32)))
}

/// Result of the fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub tau: f64,
    pub p: f64,
    pub p1: f64,
    /// |τ - τ(p(τ))| at the returned point.
    pub residual: f64,
    pub iterations: u32,
}

pub const MAX_BISECTION_ITERATIONS: u32 = 200;
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

/// g(τ) = τ - τ(p(τ)). Persistent mode at p = 1 uses the continuous
/// extension τ(1) = 2 / (W·2^m + 1).
pub fn fixed_point_residual(tau: f64, scenario: &Scenario) -> f64 {
    let (_, p) = failure_prob(tau, scenario.n, scenario.p_f);
    tau - tau_extended(p, &scenario.backoff)
}

fn tau_extended(p: f64, backoff: &BackoffParams) -> f64 {
    match backoff.f {
        RetryLimit::Finite(_) => tau_series(p, backoff),
        RetryLimit::Persistent => tau_persistent(p.min(1.0), backoff),
    }
}

/// `(g(0), g(1))`; a valid scenario always gives `g(0) <= 0 <= g(1)`.
pub fn bracket_residuals(scenario: &Scenario) -> (f64, f64) {
    (
        fixed_point_residual(0.0, scenario),
        fixed_point_residual(1.0, scenario),
    )
}

/// Solves τ = τ(p(τ)) by bisection on `[0, 1]`.
///
/// g is strictly increasing (p grows with τ, τ(p) shrinks with p), so the
/// bracket always holds a single root. Bisection runs until the bracket is
/// down to adjacent floats.
pub fn solve_fixed_point(scenario: &Scenario) -> Result<FixedPointSolution> {
    scenario.validate()?;
    let g = |t: f64| fixed_point_residual(t, scenario);

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut g_lo, mut g_hi) = (g(lo), g(hi));
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(DcfError::NoConvergence {
            iterations: 0,
            lo: g_lo,
            hi: g_hi,
            residual: f64::NAN,
        });
    }

    let mut iterations = 0;
    while g_lo != 0.0 && g_hi != 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if iterations == MAX_BISECTION_ITERATIONS {
            return Err(DcfError::NoConvergence {
                iterations,
                lo,
                hi,
                residual: g_lo.abs().min(g_hi.abs()),
            });
        }
        iterations += 1;
        let g_mid = g(mid);
        if g_mid > 0.0 {
            hi = mid;
            g_hi = g_mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }

    let (tau, residual) = if g_lo.abs() <= g_hi.abs() {
        (lo, g_lo.abs())
    } else {
        (hi, g_hi.abs())
    };
    if residual > RESIDUAL_TOLERANCE {
        return Err(DcfError::NoConvergence {
            iterations,
            lo,
            hi,
            residual,
        });
    }
    let (p1, p) = failure_prob(tau, scenario.n, scenario.p_f);
    Ok(FixedPointSolution {
        tau,
        p,
        p1,
        residual,
        iterations,
    })
}

/// Stationary distribution `b[i][k]` of the backoff chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDistribution {
    /// Row `i` has `W_i` entries.
    pub b: Vec<Vec<f64>>,
    pub b00: f64,
}

impl ChainDistribution {
    pub fn total(&self) -> f64 {
        self.b.iter().flatten().sum()
    }

    /// Probability of being in a transmitting state, Σ_i b_{i,0}.
    pub fn transmit_probability(&self) -> f64 {
        self.b.iter().map(|row| row[0]).sum()
    }
}

pub fn chain_distribution(p: f64, backoff: &BackoffParams) -> Result<ChainDistribution> {
    check_probability("p", p)?;
    backoff.validate()?;
    let last = backoff.last_stage().ok_or_else(|| {
        DcfError::Domain("the chain is infinite in persistent mode".into())
    })?;

    let occupancy: f64 = (0..=last)
        .map(|i| p.powi(i as i32) * (backoff.window_unchecked(i) + 1.0))
        .sum();
    let b00 = 2.0 / occupancy;

    let b = (0..=last)
        .map(|i| {
            let head = p.powi(i as i32) * b00;
            let w = backoff.window_unchecked(i);
            (0..w as u64)
                .map(|k| (w - k as f64) / w * head)
                .collect()
        })
        .collect();
    Ok(ChainDistribution { b, b00 })
}
