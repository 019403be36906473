//! Danger-aware V2X channel access.
//!
//! * [`params`]: MAC/PHY timings and scenario configuration.
//! * [`markov`]: busy-probability-aware DCF backoff chain, its fixed point and
//!   a transition-matrix oracle.
//! * [`metrics`]: PDR, throughput, delay-state probabilities and total delay.
//! * [`scenario`]: random vehicle placement and the distance-threshold filter.
//! * [`slotsim`]: slot-level DCF simulator used to check the analytical model.
//! * [`report`]: end-to-end evaluation and averaging over placements.

pub mod markov;
pub mod metrics;
pub mod params;
pub mod report;
pub mod scenario;
pub mod slotsim;

pub use markov::{ChainGeometry, FixedPointSolution, MarkovError, ModelMode, SolverOptions};
pub use metrics::ThroughputMode;
pub use params::{Config, ConfigError, MacTimings, RawConfig, ScenarioConfig};
pub use report::{evaluate, MetricRow, PerfReport, ReportCache};
pub use scenario::DangerMetric;
