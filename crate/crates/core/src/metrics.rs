//! Saturation throughput, discard probability and mean frame delay evaluated
//! at a solved fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{DcfError, Result};
use crate::model::{solve_fixed_point, BackoffParams, FixedPointSolution, RetryLimit, Scenario};
use crate::timing::ChannelTimes;

/// How the finite-retry mean delay is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayNormalization {
    /// Σ (1-p) p^i (T_ict,i + T_s) as is; the weights sum to 1 - p^{m+f+1}.
    #[default]
    Paper,
    /// Divided by 1 - p^{m+f+1}: mean delay of frames that are delivered.
    Conditional,
}

impl std::str::FromStr for DelayNormalization {
    type Err = DcfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(DelayNormalization::Paper),
            "conditional" => Ok(DelayNormalization::Conditional),
            other => Err(DcfError::InvalidParameter(format!(
                "unknown delay normalization `{other}` (expected paper or conditional)"
            ))),
        }
    }
}

impl std::fmt::Display for DelayNormalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DelayNormalization::Paper => "paper",
            DelayNormalization::Conditional => "conditional",
        })
    }
}

/// Slot-class probabilities for one slot of the whole cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotProbabilities {
    /// At least one transmission.
    pub p_tr: f64,
    /// Exactly one transmission, given at least one.
    pub p_s: f64,
}

pub fn slot_probabilities(tau: f64, n: u32) -> SlotProbabilities {
    let p_tr = 1.0 - (1.0 - tau).powi(n as i32);
    let p_s = if p_tr > 0.0 {
        f64::from(n) * tau * (1.0 - tau).powi(n as i32 - 1) / p_tr
    } else {
        0.0
    };
    SlotProbabilities { p_tr, p_s }
}

/// Normalized saturation throughput: the fraction of channel time carrying
/// successfully delivered payload.
pub fn throughput(sol: &FixedPointSolution, scenario: &Scenario, times: &ChannelTimes) -> f64 {
    let SlotProbabilities { p_tr, p_s } = slot_probabilities(sol.tau, scenario.n);
    if p_tr == 0.0 {
        return 0.0;
    }
    let p_f = scenario.p_f;
    let sigma = scenario.timing.slot_sigma;
    let success = p_tr * p_s * (1.0 - p_f);
    let busy = (1.0 - p_tr) * sigma
        + success * times.t_s
        + p_tr * (1.0 - p_s) * times.t_c
        + p_tr * p_s * p_f * times.t_e;
    success * times.payload_airtime / busy
}

/// Probability that a frame is dropped after `m + f + 1` failed attempts.
pub fn discard_probability(sol: &FixedPointSolution, backoff: &BackoffParams) -> f64 {
    match backoff.retry_limit() {
        Some(attempts) => sol.p.powi(attempts as i32),
        None => 0.0,
    }
}

/// The other `n - 1` stations' busy/idle process, as seen by one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalCycle {
    /// Exactly one of the others transmits, given at least one does.
    pub p1s: f64,
    /// Mean idle slots between busy slots; `None` when nobody else transmits.
    pub n_idle: Option<f64>,
    /// Mean cycle duration; `None` when nobody else transmits.
    pub t_rc: Option<f64>,
    /// `p1 · T_rc`, the mean duration of one slot of the others' process.
    /// Finite for every `p1`.
    pub p1_t_rc: f64,
    /// Mean channel occupancy of the station's own failed attempt.
    pub t_coe: f64,
}

pub fn renewal_cycle(sol: &FixedPointSolution, scenario: &Scenario, times: &ChannelTimes) -> RenewalCycle {
    let FixedPointSolution { tau, p, p1, .. } = *sol;
    let n = scenario.n;
    let p_f = scenario.p_f;
    let sigma = scenario.timing.slot_sigma;

    let p1s = if p1 > 0.0 {
        f64::from(n - 1) * tau * (1.0 - tau).powi(n as i32 - 2) / p1
    } else {
        0.0
    };
    let busy = p1s * (1.0 - p_f) * times.t_s + (1.0 - p1s) * times.t_c + p1s * p_f * times.t_e;
    let p1_t_rc = (1.0 - p1) * sigma + p1 * busy;
    let (n_idle, t_rc) = if p1 > 0.0 {
        let n_idle = 1.0 / p1 - 1.0;
        (Some(n_idle), Some(n_idle * sigma + busy))
    } else {
        (None, None)
    };
    let t_coe = if p > 0.0 {
        (p1 * times.t_c + (1.0 - p1) * p_f * times.t_e) / p
    } else {
        0.0
    };
    RenewalCycle {
        p1s,
        n_idle,
        t_rc,
        p1_t_rc,
        t_coe,
    }
}

/// Mean time before the attempt made from stage `i`, by summing the mean
/// deferral of every stage up to `i` plus `i` failed attempts.
pub fn stage_entry_time_sum(stage: u32, backoff: &BackoffParams, cycle: &RenewalCycle) -> f64 {
    let deferral: f64 = (0..=stage)
        .map(|k| (backoff.window_unchecked(k) - 1.0) / 2.0 * cycle.p1_t_rc)
        .sum();
    deferral + f64::from(stage) * cycle.t_coe
}

/// Closed form of [`stage_entry_time_sum`].
pub fn stage_entry_time_closed(stage: u32, backoff: &BackoffParams, cycle: &RenewalCycle) -> f64 {
    let w = f64::from(backoff.w0);
    let m = backoff.m;
    let i = f64::from(stage);
    let half = cycle.p1_t_rc / 2.0;
    let windows = if stage < m {
        2f64.powi(stage as i32 + 1) - 1.0
    } else {
        2f64.powi(m as i32 + 1) - 1.0 + 2f64.powi(m as i32) * f64::from(stage - m)
    };
    i * cycle.t_coe - (i + 1.0) * half + half * w * windows
}

/// Mean frame delay for a finite retry limit, from backoff start to the end
/// of the successful transmission.
pub fn mean_delay(
    sol: &FixedPointSolution,
    scenario: &Scenario,
    times: &ChannelTimes,
    normalization: DelayNormalization,
) -> Result<f64> {
    let last = scenario.backoff.last_stage().ok_or_else(|| {
        DcfError::Domain("mean_delay needs a finite retry limit; use mean_delay_persistent".into())
    })?;
    let p = sol.p;
    let cycle = renewal_cycle(sol, scenario, times);
    let mut weight = 1.0 - p;
    let mut delay = 0.0;
    for i in 0..=last {
        delay += weight * (stage_entry_time_sum(i, &scenario.backoff, &cycle) + times.t_s);
        weight *= p;
    }
    Ok(match normalization {
        DelayNormalization::Paper => delay,
        DelayNormalization::Conditional => {
            let delivered = 1.0 - p.powi(last as i32 + 1);
            if delivered > 0.0 {
                delay / delivered
            } else {
                0.0
            }
        }
    })
}

/// Largest `p` for which the persistent delay is reported as finite.
pub const PERSISTENT_P_LIMIT: f64 = 1.0 - 1e-12;

/// Mean frame delay when frames are retried until success.
pub fn mean_delay_persistent(sol: &FixedPointSolution, scenario: &Scenario, times: &ChannelTimes) -> Result<f64> {
    if scenario.backoff.f != RetryLimit::Persistent {
        return Err(DcfError::Domain("mean_delay_persistent needs f = inf".into()));
    }
    let p = sol.p;
    if p >= PERSISTENT_P_LIMIT {
        return Err(DcfError::DivergentDelay { p });
    }
    let cycle = renewal_cycle(sol, scenario, times);
    let w = f64::from(scenario.backoff.w0);
    let m = scenario.backoff.m;
    // Σ_k W_k p^k / W = (1 - p - p(2p)^m) / ((1 - p)(1 - 2p)), written without
    // the removable singularity at p = 1/2.
    let mut doubling = 0.0;
    let mut term = 1.0;
    for _ in 0..m {
        doubling += term;
        term *= 2.0 * p;
    }
    let windows = doubling + term / (1.0 - p);
    Ok(times.t_s
        + (cycle.t_coe * p - cycle.p1_t_rc / 2.0) / (1.0 - p)
        + cycle.p1_t_rc * w / 2.0 * windows)
}

/// Everything the model says about one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMetrics {
    pub solution: FixedPointSolution,
    pub times: ChannelTimes,
    pub throughput: f64,
    /// Mean delay in microseconds. `None` when it diverges (persistent mode
    /// with p = 1).
    pub delay_us: Option<f64>,
    pub discard_prob: f64,
    pub p_tr: f64,
    pub p_s: f64,
    pub cycle: RenewalCycle,
}

pub fn evaluate(scenario: &Scenario, normalization: DelayNormalization) -> Result<PerfMetrics> {
    let solution = solve_fixed_point(scenario)?;
    let times = scenario.channel_times();
    let slots = slot_probabilities(solution.tau, scenario.n);
    let delay_us = match scenario.backoff.f {
        RetryLimit::Finite(_) => Some(mean_delay(&solution, scenario, &times, normalization)?),
        RetryLimit::Persistent => match mean_delay_persistent(&solution, scenario, &times) {
            Ok(d) => Some(d),
            Err(DcfError::DivergentDelay { .. }) => None,
            Err(e) => return Err(e),
        },
    };
    Ok(PerfMetrics {
        solution,
        times,
        throughput: throughput(&solution, scenario, &times),
        delay_us,
        discard_prob: discard_probability(&solution, &scenario.backoff),
        p_tr: slots.p_tr,
        p_s: slots.p_s,
        cycle: renewal_cycle(&solution, scenario, &times),
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::timing::AccessMode;

    fn scenario(n: u32, p_f: f64, f: RetryLimit, mode: AccessMode) -> Scenario {
        Scenario {
            n,
            p_f,
            backoff: BackoffParams { w0: 8, m: 5, f },
            mode,
            ..Default::default()
        }
    }

    #[test]
    fn full_error_kills_throughput_and_delay() {
        let s = scenario(10, 1.0, RetryLimit::Finite(3), AccessMode::Basic);
        let r = evaluate(&s, DelayNormalization::Paper).unwrap();
        assert_eq!(r.throughput, 0.0);
        assert_eq!(r.discard_prob, 1.0);
        assert_eq!(r.delay_us, Some(0.0));
    }

    #[test]
    fn single_station_throughput_by_hand() {
        let s = scenario(1, 0.0, RetryLimit::Finite(10), AccessMode::Basic);
        let r = evaluate(&s, DelayNormalization::Paper).unwrap();
        let tau = 2.0 / 9.0;
        let t = s.channel_times();
        let expected = tau * t.payload_airtime / ((1.0 - tau) * 20.0 + tau * t.t_s);
        assert!((r.throughput - expected).abs() < 1e-14);
    }

    #[test]
    fn single_station_delay() {
        for f in [RetryLimit::Finite(10), RetryLimit::Persistent] {
            let s = scenario(1, 0.0, f, AccessMode::Basic);
            let r = evaluate(&s, DelayNormalization::Paper).unwrap();
            let expected = s.channel_times().t_s + 70.0;
            assert!((r.delay_us.unwrap() - expected).abs() < 1e-9, "{f}");
            assert!((expected - 2230.4).abs() < 0.05);
        }
    }

    #[test]
    fn single_station_discard() {
        let s = Scenario {
            backoff: BackoffParams {
                w0: 8,
                m: 5,
                f: RetryLimit::Finite(0),
            },
            ..scenario(1, 0.5, RetryLimit::Finite(0), AccessMode::Basic)
        };
        let r = evaluate(&s, DelayNormalization::Paper).unwrap();
        assert_eq!(r.discard_prob, 0.015625);
    }

    #[test]
    fn renewal_cycle_examples() {
        let times = AccessMode::Basic;
        let s = scenario(1, 0.0, RetryLimit::Finite(1), times);
        let sol = solve_fixed_point(&s).unwrap();
        let c = renewal_cycle(&sol, &s, &s.channel_times());
        assert_eq!(c.p1_t_rc, 20.0);
        assert_eq!(c.p1s, 0.0);
        assert_eq!(c.n_idle, None);
        assert_eq!(c.t_coe, 0.0);

        let fake = |p1: f64| FixedPointSolution {
            tau: 0.3,
            p: p1,
            p1,
            residual: 0.0,
            iterations: 0,
        };
        let s = scenario(5, 0.0, RetryLimit::Finite(1), times);
        let c = renewal_cycle(&fake(0.5), &s, &s.channel_times());
        assert_eq!(c.n_idle, Some(1.0));
        let c = renewal_cycle(&fake(1.0), &s, &s.channel_times());
        assert_eq!(c.n_idle, Some(0.0));
    }

    #[test]
    fn golden_metrics() {
        // Frozen from an independent 40-digit evaluation.
        let cases = [
            (AccessMode::Basic, 0.42442529502424876, 115709.43756608604, 115879.06446730619),
            (AccessMode::RtsCts, 0.54224349764105293, 90559.323722114806, 90692.081237687389),
        ];
        for (mode, s_ref, td_ref, td_cond_ref) in cases {
            let s = scenario(30, 0.1, RetryLimit::Finite(10), mode);
            let r = evaluate(&s, DelayNormalization::Paper).unwrap();
            assert!((r.throughput - s_ref).abs() < 1e-12, "{mode} S {}", r.throughput);
            assert!(((r.delay_us.unwrap() - td_ref) / td_ref).abs() < 1e-12);
            assert!((r.discard_prob - 0.0014638269820344079).abs() < 1e-15);
            let c = evaluate(&s, DelayNormalization::Conditional).unwrap();
            assert!(((c.delay_us.unwrap() - td_cond_ref) / td_cond_ref).abs() < 1e-12);
        }
    }

    #[test]
    fn persistent_delay_diverges_at_full_failure() {
        let s = scenario(5, 1.0, RetryLimit::Persistent, AccessMode::Basic);
        let sol = solve_fixed_point(&s).unwrap();
        assert!(matches!(
            mean_delay_persistent(&sol, &s, &s.channel_times()),
            Err(DcfError::DivergentDelay { .. })
        ));
        assert_eq!(evaluate(&s, DelayNormalization::Paper).unwrap().delay_us, None);
    }

    #[test]
    fn mode_mismatch_errors() {
        let s = scenario(5, 0.1, RetryLimit::Persistent, AccessMode::Basic);
        let sol = solve_fixed_point(&s).unwrap();
        assert!(mean_delay(&sol, &s, &s.channel_times(), DelayNormalization::Paper).is_err());
        let s = scenario(5, 0.1, RetryLimit::Finite(2), AccessMode::Basic);
        assert!(mean_delay_persistent(&sol, &s, &s.channel_times()).is_err());
    }
}
