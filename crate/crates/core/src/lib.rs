//! Saturation performance of the 802.11 DCF over an error-prone channel.
//!
//! * [`timing`] derives the busy-period durations T_s, T_c, T_e from PHY/MAC
//!   parameters for Basic and RTS/CTS access.
//! * [`model`] solves the backoff-chain fixed point for the per-slot
//!   transmission probability τ.
//! * [`metrics`] turns a solved point into throughput, mean frame delay and
//!   discard probability.
//! * [`sim`] is a seeded slot-level simulator of the same stations, used to
//!   check the analysis.

pub mod error;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod timing;

pub use error::{DcfError, Result};
pub use metrics::{evaluate, DelayNormalization, PerfMetrics, RenewalCycle};
pub use model::{
    chain_distribution, failure_prob, solve_fixed_point, tau_of_p, BackoffParams,
    ChainDistribution, FixedPointSolution, RetryLimit, Scenario,
};
pub use sim::{simulate, SimConfig, SimResult};
pub use timing::{AccessMode, ChannelTimes, MacTimingParams};
