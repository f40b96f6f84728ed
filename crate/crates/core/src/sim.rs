//! Seeded slot-level Monte Carlo simulation of `n` saturated stations.
//!
//! Each station runs the same backoff chain as the analytical model. In every
//! slot the stations whose timer reached zero transmit; everyone else ticks
//! down by one, whether the slot was idle or busy. A lone transmitter
//! succeeds unless a Bernoulli(P_f) frame error hits it; two or more
//! transmitters always collide.
//!
//! Since every slot decrements every waiting timer by exactly one, a timer is
//! stored as the absolute slot index at which the station fires, and runs of
//! idle slots are skipped in one step.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DcfError, Result};
use crate::model::{RetryLimit, Scenario};
use crate::timing::ChannelTimes;

pub const GENERATOR: &str = "ChaCha8Rng";

/// Two-sided 95% normal quantile used for confidence half-widths.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Completed frames (delivered or dropped) to observe, warmup included.
    pub frames_target: u64,
    /// Leading outcomes excluded from every estimator.
    pub warmup_frames: u64,
    pub replications: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            frames_target: 100_000,
            warmup_frames: 1_000,
            replications: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_target <= self.warmup_frames {
            return Err(DcfError::InvalidParameter(format!(
                "frames ({}) must exceed warmup ({})",
                self.frames_target, self.warmup_frames
            )));
        }
        if self.replications < 1 {
            return Err(DcfError::InvalidParameter("replications must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of replication `index`.
    pub fn replication_seed(&self, index: u32) -> u64 {
        self.seed.wrapping_add(u64::from(index))
    }
}

/// Per-station state: backoff stage, absolute slot at which the timer
/// expires, and the clock at which the current frame's backoff began.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationState {
    pub stage: u32,
    pub fire_slot: u64,
    pub frame_birth: f64,
}

/// Slot and outcome counters over the measurement window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub slots: u64,
    pub idle: u64,
    pub successes: u64,
    pub collisions: u64,
    pub error_slots: u64,
    /// Individual transmission attempts (a collision slot holds several).
    pub attempts: u64,
    pub discards: u64,
    /// Delivered plus dropped frames.
    pub completed: u64,
}

impl SlotCounts {
    fn minus(&self, base: &SlotCounts) -> SlotCounts {
        SlotCounts {
            slots: self.slots - base.slots,
            idle: self.idle - base.idle,
            successes: self.successes - base.successes,
            collisions: self.collisions - base.collisions,
            error_slots: self.error_slots - base.error_slots,
            attempts: self.attempts - base.attempts,
            discards: self.discards - base.discards,
            completed: self.completed - base.completed,
        }
    }

    fn add(&mut self, other: &SlotCounts) {
        self.slots += other.slots;
        self.idle += other.idle;
        self.successes += other.successes;
        self.collisions += other.collisions;
        self.error_slots += other.error_slots;
        self.attempts += other.attempts;
        self.discards += other.discards;
        self.completed += other.completed;
    }

    /// Channel time spanned by these slots.
    pub fn elapsed(&self, sigma: f64, times: &ChannelTimes) -> f64 {
        self.idle as f64 * sigma
            + self.successes as f64 * times.t_s
            + self.collisions as f64 * times.t_c
            + self.error_slots as f64 * times.t_e
    }
}

/// Estimates from one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub seed: u64,
    pub tau_hat: f64,
    pub throughput_hat: f64,
    /// Mean delay over delivered frames; `None` if nothing was delivered.
    pub delay_hat_us: Option<f64>,
    pub discard_hat: f64,
    pub counts: SlotCounts,
    pub elapsed_us: f64,
    /// Attempts made from each backoff stage.
    pub stage_attempts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub tau: f64,
    pub throughput: f64,
    pub delay_us: Option<f64>,
    pub discard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub generator: String,
    pub replications: Vec<ReplicationEstimate>,
    /// Means over replications.
    pub pooled: Estimates,
    /// 1.96·s/√R half-widths; `None` with a single replication.
    pub ci95: Option<Estimates>,
    /// Summed over replications.
    pub counts: SlotCounts,
    pub elapsed_us: f64,
    pub stage_attempts: Vec<u64>,
}

/// Largest number of slots a replication may run per requested frame before
/// giving up.
const SLOTS_PER_FRAME_CAP: u64 = 1_000_000;

/// Runs one replication with the given seed.
pub fn run_replication(scenario: &Scenario, cfg: &SimConfig, seed: u64) -> Result<ReplicationEstimate> {
    let backoff = scenario.backoff;
    let times = scenario.channel_times();
    let sigma = scenario.timing.slot_sigma;
    let last_stage = backoff.last_stage();
    let n = scenario.n as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_timer = |rng: &mut ChaCha8Rng, stage: u32| -> u64 {
        rng.gen_range(0..backoff.window_unchecked(stage) as u64)
    };

    let mut stations: Vec<StationState> = Vec::with_capacity(n);
    let mut queue = BinaryHeap::with_capacity(n);
    for idx in 0..n {
        let fire_slot = draw_timer(&mut rng, 0);
        stations.push(StationState {
            stage: 0,
            fire_slot,
            frame_birth: 0.0,
        });
        queue.push(Reverse((fire_slot, idx)));
    }

    let mut counts = SlotCounts::default();
    let mut baseline: Option<SlotCounts> = if cfg.warmup_frames == 0 { Some(counts) } else { None };
    let mut delay_sum = 0.0;
    let mut delay_count = 0u64;
    let mut stage_attempts: Vec<u64> = vec![0; last_stage.map_or(backoff.m as usize + 1, |k| k as usize + 1)];
    let mut transmitters: Vec<usize> = Vec::new();
    let mut slot: u64 = 0;
    let slot_cap = cfg.frames_target.saturating_mul(SLOTS_PER_FRAME_CAP);

    while counts.completed < cfg.frames_target {
        let Reverse((next, _)) = *queue.peek().expect("at least one station");
        if next > slot {
            counts.idle += next - slot;
            counts.slots += next - slot;
            slot = next;
        }
        transmitters.clear();
        while let Some(&Reverse((fire, idx))) = queue.peek() {
            if fire != slot {
                break;
            }
            queue.pop();
            transmitters.push(idx);
        }

        counts.slots += 1;
        counts.attempts += transmitters.len() as u64;
        let measuring = baseline.is_some();
        if measuring {
            for &idx in &transmitters {
                let stage = stations[idx].stage as usize;
                if stage >= stage_attempts.len() {
                    stage_attempts.resize(stage + 1, 0);
                }
                stage_attempts[stage] += 1;
            }
        }

        let delivered = if transmitters.len() == 1 {
            if rng.gen::<f64>() < scenario.p_f {
                counts.error_slots += 1;
                false
            } else {
                counts.successes += 1;
                true
            }
        } else {
            counts.collisions += 1;
            false
        };
        let clock = counts.elapsed(sigma, &times);

        for &idx in &transmitters {
            let station = &mut stations[idx];
            let new_frame = if delivered {
                if measuring {
                    delay_sum += clock - station.frame_birth;
                    delay_count += 1;
                }
                counts.completed += 1;
                true
            } else if Some(station.stage) == last_stage {
                counts.discards += 1;
                counts.completed += 1;
                true
            } else {
                station.stage = station.stage.saturating_add(1);
                false
            };
            if new_frame {
                station.stage = 0;
                station.frame_birth = clock;
            }
            station.fire_slot = slot + 1 + draw_timer(&mut rng, station.stage);
            queue.push(Reverse((station.fire_slot, idx)));
        }
        slot += 1;

        if baseline.is_none() && counts.completed >= cfg.warmup_frames {
            baseline = Some(counts);
        }
        if counts.slots > slot_cap {
            return Err(DcfError::Domain(format!(
                "simulation exceeded {slot_cap} slots without completing {} frames",
                cfg.frames_target
            )));
        }
    }

    let window = counts.minus(&baseline.expect("warmup below frames target"));
    if window.completed == 0 || window.slots == 0 {
        return Err(DcfError::NoCompletedFrames);
    }
    let elapsed_us = window.elapsed(sigma, &times);
    Ok(ReplicationEstimate {
        seed,
        tau_hat: window.attempts as f64 / (scenario.n as f64 * window.slots as f64),
        throughput_hat: window.successes as f64 * times.payload_airtime / elapsed_us,
        delay_hat_us: (delay_count > 0).then(|| delay_sum / delay_count as f64),
        discard_hat: window.discards as f64 / window.completed as f64,
        counts: window,
        elapsed_us,
        stage_attempts,
    })
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, Z95 * var.sqrt() / r.sqrt())
}

/// Pools replication estimates in index order.
pub fn pool(seed: u64, replications: Vec<ReplicationEstimate>) -> SimResult {
    let column = |f: &dyn Fn(&ReplicationEstimate) -> f64| -> (f64, f64) {
        mean_and_ci(&replications.iter().map(f).collect::<Vec<_>>())
    };
    let (tau, tau_ci) = column(&|r| r.tau_hat);
    let (thr, thr_ci) = column(&|r| r.throughput_hat);
    let (dis, dis_ci) = column(&|r| r.discard_hat);
    let delays: Option<Vec<f64>> = replications.iter().map(|r| r.delay_hat_us).collect();
    let (delay, delay_ci) = match delays {
        Some(d) => {
            let (m, c) = mean_and_ci(&d);
            (Some(m), Some(c))
        }
        None => (None, None),
    };

    let mut counts = SlotCounts::default();
    let mut stage_attempts: Vec<u64> = Vec::new();
    for r in &replications {
        counts.add(&r.counts);
        if r.stage_attempts.len() > stage_attempts.len() {
            stage_attempts.resize(r.stage_attempts.len(), 0);
        }
        for (acc, v) in stage_attempts.iter_mut().zip(&r.stage_attempts) {
            *acc += v;
        }
    }
    let elapsed_us = replications.iter().map(|r| r.elapsed_us).sum();

    let ci95 = (replications.len() >= 2).then_some(Estimates {
        tau: tau_ci,
        throughput: thr_ci,
        delay_us: delay_ci,
        discard: dis_ci,
    });
    SimResult {
        seed,
        generator: GENERATOR.to_string(),
        replications,
        pooled: Estimates {
            tau,
            throughput: thr,
            delay_us: delay,
            discard: dis,
        },
        ci95,
        counts,
        elapsed_us,
        stage_attempts,
    }
}

/// Runs `cfg.replications` independent replications (seeds `seed`,
/// `seed + 1`, ...) in parallel and pools them.
pub fn replicate_and_pool(scenario: &Scenario, cfg: &SimConfig) -> Result<SimResult> {
    let estimates = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(scenario, cfg, cfg.replication_seed(r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(pool(cfg.seed, estimates))
}

/// Validates inputs and runs [`replicate_and_pool`].
pub fn simulate(scenario: &Scenario, cfg: &SimConfig) -> Result<SimResult> {
    scenario.validate()?;
    cfg.validate()?;
    if scenario.backoff.f == RetryLimit::Persistent && scenario.p_f >= 1.0 {
        return Err(DcfError::Domain(
            "no frame is ever completed with f = inf and p_f = 1".into(),
        ));
    }
    replicate_and_pool(scenario, cfg)
}
