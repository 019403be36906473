//! MAC/PHY timing parameters, scenario parameters and their JSON form.
//!
//! Configuration is a single flat JSON object whose keys are the field names
//! of [`MacTimings`] and [`ScenarioConfig`]. Omitted keys take the defaults
//! below; unknown keys are rejected.
//!
//! Window convention: a minimum contention window `cw_min` admits backoff
//! counters `0..=cw_min`, so the stage-0 window is `W_0 = cw_min + 1` slots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{ChainGeometry, ModelMode};
use crate::metrics::ThroughputMode;
use crate::scenario::DangerMetric;

/// Largest supported backoff stage. `W_m = 2^m * W_0` must stay well inside `u64`
/// and the full chain (`W_0 * (2^(m+1) - 1)` states) must stay enumerable.
pub const MAX_BACKOFF_STAGE: u32 = 16;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("`{field}` = {value} is out of range: must be {bound}")]
    OutOfRange {
        field: &'static str,
        bound: &'static str,
        value: String,
    },
}

/// PHY/MAC durations (µs) and sizes. Defaults follow the DSRC parameter set
/// used throughout this crate: DIFS 64 µs, SIFS 32 µs, 13 µs slots, 1023-byte
/// payloads, 1 µs propagation delay and `CW_min = 7`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacTimings {
    pub difs_us: f64,
    pub sifs_us: f64,
    pub slot_us: f64,
    /// Propagation delay δ.
    pub prop_delay_us: f64,
    pub payload_bytes: u32,
    pub data_rate_mbps: f64,
    /// MAC + PHY header size H, sent at `data_rate_mbps`.
    pub header_bytes: u32,
    pub ack_us: f64,
    /// Zero for basic access.
    pub rts_us: f64,
    pub cts_us: f64,
    pub cw_min: u32,
    /// Maximum backoff stage m.
    pub max_stage: u32,
}

impl Default for MacTimings {
    fn default() -> Self {
        Self {
            difs_us: 64.0,
            sifs_us: 32.0,
            slot_us: 13.0,
            prop_delay_us: 1.0,
            payload_bytes: 1023,
            data_rate_mbps: 6.0,
            header_bytes: 50,
            ack_us: 44.0,
            rts_us: 0.0,
            cts_us: 0.0,
            cw_min: 7,
            max_stage: 5,
        }
    }
}

/// Frame durations derived from byte counts and the data rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDurations {
    /// E[P], payload airtime.
    pub payload_us: f64,
    /// H, header airtime.
    pub header_us: f64,
    pub t_slot_us: f64,
}

impl MacTimings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("difs_us", self.difs_us)?;
        positive("sifs_us", self.sifs_us)?;
        positive("slot_us", self.slot_us)?;
        positive("data_rate_mbps", self.data_rate_mbps)?;
        non_negative("prop_delay_us", self.prop_delay_us)?;
        non_negative("ack_us", self.ack_us)?;
        non_negative("rts_us", self.rts_us)?;
        non_negative("cts_us", self.cts_us)?;
        if self.payload_bytes < 1 {
            return Err(out_of_range("payload_bytes", ">= 1", self.payload_bytes));
        }
        if self.cw_min < 1 {
            return Err(out_of_range("cw_min", ">= 1", self.cw_min));
        }
        if self.max_stage > MAX_BACKOFF_STAGE {
            return Err(out_of_range("max_stage", "<= 16", self.max_stage));
        }
        Ok(())
    }

    /// `W_0 = cw_min + 1`.
    pub fn stage0_window(&self) -> u64 {
        u64::from(self.cw_min) + 1
    }

    pub fn geometry(&self) -> ChainGeometry {
        ChainGeometry::new(self.max_stage, self.stage0_window())
            .expect("validated timings always form a valid chain geometry")
    }
}

/// Airtime of `bytes` at `rate_mbps`, in µs.
fn airtime_us(bytes: u32, rate_mbps: f64) -> f64 {
    f64::from(bytes) * 8.0 / rate_mbps
}

pub fn derive_durations(t: &MacTimings) -> FrameDurations {
    FrameDurations {
        payload_us: airtime_us(t.payload_bytes, t.data_rate_mbps),
        header_us: airtime_us(t.header_bytes, t.data_rate_mbps),
        t_slot_us: t.slot_us,
    }
}

/// Road scenario and evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_vehicles: u32,
    pub road_length_m: f64,
    /// Danger threshold d_th. `None` disables the filter (every vehicle contends).
    pub threshold_m: Option<f64>,
    /// Number of Monte Carlo placements.
    pub trials: u32,
    pub rng_seed: u64,
    pub model_mode: ModelMode,
    pub throughput_mode: ThroughputMode,
    pub danger_metric: DangerMetric,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 50,
            road_length_m: 1000.0,
            threshold_m: None,
            trials: 1000,
            rng_seed: 1,
            model_mode: ModelMode::BusyAware,
            throughput_mode: ThroughputMode::SlotScaled,
            danger_metric: DangerMetric::MinGap,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_vehicles < 1 {
            return Err(out_of_range("n_vehicles", ">= 1", self.n_vehicles));
        }
        positive("road_length_m", self.road_length_m)?;
        if let Some(th) = self.threshold_m {
            non_negative("threshold_m", th)?;
        }
        if self.trials < 1 {
            return Err(out_of_range("trials", ">= 1", self.trials));
        }
        Ok(())
    }
}

/// The threshold values swept by default, in metres.
pub const DEFAULT_THRESHOLDS_M: [f64; 3] = [300.0, 500.0, 700.0];

/// A fully populated, validated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub mac: MacTimings,
    pub scenario: ScenarioConfig,
}

/// Flat, partially specified configuration as read from JSON or CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub difs_us: Option<f64>,
    pub sifs_us: Option<f64>,
    pub slot_us: Option<f64>,
    pub prop_delay_us: Option<f64>,
    pub payload_bytes: Option<u32>,
    pub data_rate_mbps: Option<f64>,
    pub header_bytes: Option<u32>,
    pub ack_us: Option<f64>,
    pub rts_us: Option<f64>,
    pub cts_us: Option<f64>,
    pub cw_min: Option<u32>,
    pub max_stage: Option<u32>,
    pub n_vehicles: Option<u32>,
    pub road_length_m: Option<f64>,
    pub threshold_m: Option<f64>,
    pub trials: Option<u32>,
    pub rng_seed: Option<u64>,
    pub model_mode: Option<ModelMode>,
    pub throughput_mode: Option<ThroughputMode>,
    pub danger_metric: Option<DangerMetric>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $( if let Some(v) = $src.$field { $dst.$field = v; } )+
    };
}

macro_rules! overlay_opt {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )+
    };
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(text)?)
    }

    /// Fields set in `other` replace the ones in `self`.
    pub fn merge(mut self, other: &RawConfig) -> Self {
        overlay_opt!(
            self, other, difs_us, sifs_us, slot_us, prop_delay_us, payload_bytes,
            data_rate_mbps, header_bytes, ack_us, rts_us, cts_us, cw_min, max_stage,
            n_vehicles, road_length_m, threshold_m, trials, rng_seed, model_mode,
            throughput_mode, danger_metric,
        );
        self
    }

    /// Apply defaults for omitted fields and validate.
    pub fn resolve(&self) -> Result<Config, ConfigError> {
        let mut mac = MacTimings::default();
        overlay!(
            mac, self, difs_us, sifs_us, slot_us, prop_delay_us, payload_bytes,
            data_rate_mbps, header_bytes, ack_us, rts_us, cts_us, cw_min, max_stage,
        );
        let mut scenario = ScenarioConfig::default();
        overlay!(
            scenario, self, n_vehicles, road_length_m, trials, rng_seed, model_mode,
            throughput_mode, danger_metric,
        );
        scenario.threshold_m = self.threshold_m;
        mac.validate()?;
        scenario.validate()?;
        Ok(Config { mac, scenario })
    }
}

impl From<&Config> for RawConfig {
    fn from(c: &Config) -> Self {
        let (m, s) = (&c.mac, &c.scenario);
        RawConfig {
            difs_us: Some(m.difs_us),
            sifs_us: Some(m.sifs_us),
            slot_us: Some(m.slot_us),
            prop_delay_us: Some(m.prop_delay_us),
            payload_bytes: Some(m.payload_bytes),
            data_rate_mbps: Some(m.data_rate_mbps),
            header_bytes: Some(m.header_bytes),
            ack_us: Some(m.ack_us),
            rts_us: Some(m.rts_us),
            cts_us: Some(m.cts_us),
            cw_min: Some(m.cw_min),
            max_stage: Some(m.max_stage),
            n_vehicles: Some(s.n_vehicles),
            road_length_m: Some(s.road_length_m),
            threshold_m: s.threshold_m,
            trials: Some(s.trials),
            rng_seed: Some(s.rng_seed),
            model_mode: Some(s.model_mode),
            throughput_mode: Some(s.throughput_mode),
            danger_metric: Some(s.danger_metric),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        RawConfig::from_json(text)?.resolve()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawConfig::from(self)).expect("config serializes")
    }
}

/// Load a configuration from optional JSON text, then overlay flag values.
pub fn load_config(json: Option<&str>, flags: &RawConfig) -> Result<Config, ConfigError> {
    let base = match json {
        Some(text) => RawConfig::from_json(text)?,
        None => RawConfig::default(),
    };
    base.merge(flags).resolve()
}

fn out_of_range(field: &'static str, bound: &'static str, value: impl ToString) -> ConfigError {
    ConfigError::OutOfRange {
        field,
        bound,
        value: value.to_string(),
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(out_of_range(field, "finite and > 0", v))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(out_of_range(field, "finite and >= 0", v))
    }
}
