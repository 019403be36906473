//! The four commands, producing in-memory tables and charts.

use std::fmt;
use std::str::FromStr;

use danger_v2x::markov::SolverOptions;
use danger_v2x::metrics::{access_probabilities, frame_times};
use danger_v2x::params::{derive_durations, DEFAULT_THRESHOLDS_M};
use danger_v2x::scenario::{expected_n_eff, mean_std, NEffSummary};
use danger_v2x::slotsim::{self, BackoffRule, SimStats, SlotWeights};
use danger_v2x::{evaluate, Config, MetricRow, ModelMode, ReportCache};
use rayon::prelude::*;

use crate::error::CliError;
use crate::svg::{LineChart, Series};
use crate::table::{Cell, Table};

pub const BENCHMARK: &str = "benchmark";

pub const POINT_COLUMNS: &[&str] = &[
    "n_vehicles",
    "threshold_m",
    "n_eff_mean",
    "n_eff_std",
    "tau",
    "p_tr",
    "p_su",
    "pdr",
    "throughput",
    "p_emp",
    "p_suc",
    "p_own",
    "p_col",
    "p_bus",
    "t_tt_us",
    "t_tc_us",
    "cw_star_us",
    "t_emp_us",
    "t_td_us",
    "max_iterations",
    "max_residual",
    "model_mode",
    "throughput_mode",
];

pub const SWEEP_COLUMNS: &[&str] = &[
    "x",
    "threshold_m",
    "n_eff_mean",
    "tau",
    "p_tr",
    "p_su",
    "pdr",
    "throughput",
    "p_emp",
    "p_suc",
    "p_own",
    "p_col",
    "p_bus",
    "t_td_us",
    "model_mode",
    "throughput_mode",
];

/// Sweep columns followed by simulator estimates at the rounded mean `n_eff`.
pub const SWEEP_SIM_COLUMNS: &[&str] = &[
    "x",
    "threshold_m",
    "n_eff_mean",
    "tau",
    "p_tr",
    "p_su",
    "pdr",
    "throughput",
    "p_emp",
    "p_suc",
    "p_own",
    "p_col",
    "p_bus",
    "t_td_us",
    "model_mode",
    "throughput_mode",
    "sim_n",
    "tau_sim",
    "p_su_sim",
    "throughput_sim",
];

pub const COMPARE_COLUMNS: &[&str] = &[
    "n",
    "seed",
    "model_mode",
    "backoff_rule",
    "slots",
    "tau_analytic",
    "tau_sim",
    "tau_rel_err",
    "p_su_analytic",
    "p_su_sim",
    "p_su_rel_err",
    "throughput_analytic",
    "throughput_sim",
    "throughput_rel_err",
    "col_frac_analytic",
    "col_frac_sim",
    "col_frac_rel_err",
];

pub const SCENARIO_TRIAL_COLUMNS: &[&str] = &["trial", "threshold_m", "n_eff"];

pub const SCENARIO_SUMMARY_COLUMNS: &[&str] =
    &["n_vehicles", "threshold_m", "trials", "n_eff_mean", "n_eff_std"];

fn solver() -> SolverOptions {
    SolverOptions::default()
}

fn threshold_cell(th: Option<f64>) -> Cell {
    match th {
        Some(v) => Cell::Num(v),
        None => Cell::from(BENCHMARK),
    }
}

/// Contender counts of every trial, or the full population without a filter.
fn contender_samples(cfg: &Config, n_vehicles: u32, thresholds: &[f64]) -> NEffSummary {
    let s = &cfg.scenario;
    expected_n_eff(
        n_vehicles,
        s.road_length_m,
        s.danger_metric,
        thresholds,
        s.trials,
        s.rng_seed,
    )
}

// ---------------------------------------------------------------- point

pub fn run_point(cfg: &Config) -> Result<Table, CliError> {
    let s = &cfg.scenario;
    let n_effs = match s.threshold_m {
        Some(th) => contender_samples(cfg, s.n_vehicles, &[th]).samples(0),
        None => vec![s.n_vehicles],
    };
    let (mean, std) = mean_std(&n_effs);
    let max_n = *n_effs.iter().max().expect("at least one trial");
    let cache = ReportCache::build(max_n, &cfg.mac, s.model_mode, s.throughput_mode, &solver())?;
    let row = cache.mean_over(&n_effs);

    let mut used: Vec<u32> = n_effs.clone();
    used.sort_unstable();
    used.dedup();
    let (mut max_iter, mut max_res) = (0u32, 0.0f64);
    for n in used {
        if let Some(sol) = cache.get(n).solution {
            max_iter = max_iter.max(sol.iterations);
            max_res = max_res.max(sol.residual);
        }
    }

    let mut t = Table::new(POINT_COLUMNS);
    t.push(vec![
        s.n_vehicles.into(),
        threshold_cell(s.threshold_m),
        mean.into(),
        std.into(),
        row.tau.into(),
        row.p_tr.into(),
        row.p_su.into(),
        row.pdr.into(),
        row.throughput.into(),
        row.p_emp.into(),
        row.p_suc.into(),
        row.p_own.into(),
        row.p_col.into(),
        row.p_bus.into(),
        row.t_tt_us.into(),
        row.t_tc_us.into(),
        row.cw_star_us.into(),
        row.t_emp_us.into(),
        row.t_td_us.into(),
        max_iter.into(),
        max_res.into(),
        s.model_mode.as_str().into(),
        s.throughput_mode.as_str().into(),
    ]);
    Ok(t)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    NVehicles,
    ThresholdM,
}

impl XAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            XAxis::NVehicles => "n_vehicles",
            XAxis::ThresholdM => "threshold_m",
        }
    }
}

impl FromStr for XAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "n_vehicles" => Ok(XAxis::NVehicles),
            "threshold_m" => Ok(XAxis::ThresholdM),
            other => Err(format!("unknown x axis `{other}` (n_vehicles | threshold_m)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Pdr,
    Throughput,
    TotalDelay,
    PBus,
    PCol,
    NEff,
    Tau,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Pdr,
        Metric::Throughput,
        Metric::TotalDelay,
        Metric::PBus,
        Metric::PCol,
        Metric::NEff,
        Metric::Tau,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pdr => "pdr",
            Metric::Throughput => "throughput",
            Metric::TotalDelay => "total_delay",
            Metric::PBus => "p_bus",
            Metric::PCol => "p_col",
            Metric::NEff => "n_eff",
            Metric::Tau => "tau",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            Metric::Pdr => "packet delivery rate",
            Metric::Throughput => "normalized throughput",
            Metric::TotalDelay => "total delay (us)",
            Metric::PBus => "channel busy probability",
            Metric::PCol => "collision probability",
            Metric::NEff => "mean transmitters",
            Metric::Tau => "transmission probability",
        }
    }

    pub fn value(self, row: &MetricRow) -> f64 {
        match self {
            Metric::Pdr => row.pdr,
            Metric::Throughput => row.throughput,
            Metric::TotalDelay => row.t_td_us,
            Metric::PBus => row.p_bus,
            Metric::PCol => row.p_col,
            Metric::NEff => row.n_eff,
            Metric::Tau => row.tau,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Metric::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown metric `{s}` ({})", names.join(" | "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub x_axis: XAxis,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
    /// Filter thresholds drawn as curves when sweeping over `n_vehicles`.
    pub thresholds: Vec<f64>,
    pub compare_sim: bool,
    pub sim_slots: u64,
    pub backoff_rule: BackoffRule,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            x_axis: XAxis::NVehicles,
            values: (1..=50).map(f64::from).collect(),
            metrics: vec![
                Metric::Pdr,
                Metric::Throughput,
                Metric::TotalDelay,
                Metric::PBus,
                Metric::PCol,
            ],
            thresholds: DEFAULT_THRESHOLDS_M.to_vec(),
            compare_sim: false,
            sim_slots: 100_000,
            backoff_rule: BackoffRule::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.values.is_empty() {
            return usage("sweep values must not be empty".into());
        }
        if self.metrics.is_empty() {
            return usage("metrics list must not be empty".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return usage("sweep values must be finite".into());
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return usage("sweep values must be strictly increasing".into());
        }
        match self.x_axis {
            XAxis::NVehicles => {
                if self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0 || v > f64::from(u32::MAX)) {
                    return usage("n_vehicles values must be positive integers".into());
                }
                if self.thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return usage("thresholds must be finite and >= 0".into());
                }
            }
            XAxis::ThresholdM => {
                if self.values[0] < 0.0 {
                    return usage("threshold values must be >= 0".into());
                }
            }
        }
        if self.compare_sim && self.sim_slots == 0 {
            return usage("sim slots must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    /// `None` is the unfiltered benchmark.
    pub threshold_m: Option<f64>,
    pub row: MetricRow,
    pub sim: Option<SimEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub n: u32,
    pub tau: f64,
    pub p_su: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub table: Table,
    pub charts: Vec<(Metric, LineChart)>,
}

/// Contender samples of one curve at one x, tagged with its threshold.
type Curve = (Option<f64>, Vec<u32>);

pub fn run_sweep(spec: &SweepSpec, cfg: &Config) -> Result<SweepOutput, CliError> {
    spec.validate()?;
    let s = &cfg.scenario;
    let mut points = Vec::new();
    let max_n;
    let samples: Vec<(f64, Vec<Curve>)> = match spec.x_axis {
        XAxis::NVehicles => {
            max_n = spec.values.last().copied().unwrap_or(1.0) as u32;
            spec.values
                .par_iter()
                .map(|&x| {
                    let n = x as u32;
                    let summary = contender_samples(cfg, n, &spec.thresholds);
                    let mut curves: Vec<Curve> = spec
                        .thresholds
                        .iter()
                        .enumerate()
                        .map(|(j, &th)| (Some(th), summary.samples(j)))
                        .collect();
                    curves.push((None, vec![n]));
                    (x, curves)
                })
                .collect()
        }
        XAxis::ThresholdM => {
            max_n = s.n_vehicles;
            let summary = contender_samples(cfg, s.n_vehicles, &spec.values);
            spec.values
                .iter()
                .enumerate()
                .map(|(j, &x)| (x, vec![(Some(x), summary.samples(j)), (None, vec![s.n_vehicles])]))
                .collect()
        }
    };

    let cache = ReportCache::build(max_n, &cfg.mac, s.model_mode, s.throughput_mode, &solver())?;
    for (x, curves) in &samples {
        for (th, n_effs) in curves {
            points.push(SweepPoint {
                x: *x,
                threshold_m: *th,
                row: cache.mean_over(n_effs),
                sim: None,
            });
        }
    }

    if spec.compare_sim {
        let mut wanted: Vec<u32> = points.iter().map(|p| p.row.n_eff.round() as u32).collect();
        wanted.sort_unstable();
        wanted.dedup();
        let estimates: Vec<SimEstimate> = wanted
            .par_iter()
            .map(|&n| simulate_estimate(cfg, n, spec.sim_slots, spec.backoff_rule))
            .collect();
        for p in &mut points {
            let n = p.row.n_eff.round() as u32;
            let idx = wanted.binary_search(&n).expect("simulated");
            p.sim = Some(estimates[idx]);
        }
    }

    let table = sweep_table(&points, cfg, spec.compare_sim);
    let charts = spec
        .metrics
        .iter()
        .map(|&m| (m, sweep_chart(m, spec, &points)))
        .collect();
    Ok(SweepOutput {
        points,
        table,
        charts,
    })
}

fn simulate_estimate(cfg: &Config, n: u32, slots: u64, rule: BackoffRule) -> SimEstimate {
    if n == 0 {
        return SimEstimate {
            n,
            tau: 0.0,
            p_su: 1.0,
            throughput: 0.0,
        };
    }
    let stats = simulate(cfg, n, slots, rule, cfg.scenario.rng_seed);
    SimEstimate {
        n,
        tau: stats.tau_hat,
        p_su: stats.p_su_hat,
        throughput: stats.payload_time_fraction,
    }
}

fn simulate(cfg: &Config, n: u32, slots: u64, rule: BackoffRule, seed: u64) -> SimStats {
    let durations = derive_durations(&cfg.mac);
    let weights = SlotWeights::new(&durations, &frame_times(&durations, &cfg.mac));
    slotsim::run(n, slots, &cfg.mac.geometry(), rule, &weights, seed)
}

fn sweep_table(points: &[SweepPoint], cfg: &Config, with_sim: bool) -> Table {
    let s = &cfg.scenario;
    let mut t = Table::new(if with_sim { SWEEP_SIM_COLUMNS } else { SWEEP_COLUMNS });
    for p in points {
        let r = &p.row;
        let mut cells = vec![
            p.x.into(),
            threshold_cell(p.threshold_m),
            r.n_eff.into(),
            r.tau.into(),
            r.p_tr.into(),
            r.p_su.into(),
            r.pdr.into(),
            r.throughput.into(),
            r.p_emp.into(),
            r.p_suc.into(),
            r.p_own.into(),
            r.p_col.into(),
            r.p_bus.into(),
            r.t_td_us.into(),
            s.model_mode.as_str().into(),
            s.throughput_mode.as_str().into(),
        ];
        if let Some(sim) = p.sim {
            cells.extend([sim.n.into(), sim.tau.into(), sim.p_su.into(), sim.throughput.into()]);
        }
        t.push(cells);
    }
    t
}

fn curve_label(th: Option<f64>) -> String {
    match th {
        Some(v) => format!("{} m", crate::table::fmt_num(v)),
        None => BENCHMARK.to_string(),
    }
}

fn sweep_chart(metric: Metric, spec: &SweepSpec, points: &[SweepPoint]) -> LineChart {
    let mut series: Vec<Series> = Vec::new();
    for p in points {
        // Threshold sweeps draw a single filtered curve whose threshold is x.
        let label = match (spec.x_axis, p.threshold_m) {
            (XAxis::ThresholdM, Some(_)) => "filtered".to_string(),
            (_, th) => curve_label(th),
        };
        let point = (p.x, metric.value(&p.row));
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    let x_label = match spec.x_axis {
        XAxis::NVehicles => "number of vehicles",
        XAxis::ThresholdM => "threshold distance (m)",
    };
    LineChart {
        title: format!("{} vs {}", metric.axis_label(), x_label),
        x_label: x_label.to_string(),
        y_label: metric.axis_label().to_string(),
        series,
    }
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub n_values: Vec<u32>,
    pub slots: u64,
    pub seeds: Vec<u64>,
    pub modes: Vec<ModelMode>,
    pub backoff_rule: BackoffRule,
}

impl CompareSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return usage("compare needs at least one station count, each >= 1");
        }
        if self.seeds.is_empty() {
            return usage("compare needs at least one seed");
        }
        if self.modes.is_empty() {
            return usage("compare needs at least one model mode");
        }
        if self.slots == 0 {
            return usage("slots must be >= 1");
        }
        Ok(())
    }
}

/// `|sim − analytic| / |analytic|`, or the absolute error when the analytic
/// value is zero.
pub fn relative_error(analytic: f64, sim: f64) -> f64 {
    let diff = (sim - analytic).abs();
    if analytic == 0.0 {
        diff
    } else {
        diff / analytic.abs()
    }
}

pub fn run_compare(spec: &CompareSpec, cfg: &Config) -> Result<Table, CliError> {
    spec.validate()?;
    let s = &cfg.scenario;
    let jobs: Vec<(u32, u64)> = spec
        .n_values
        .iter()
        .flat_map(|&n| spec.seeds.iter().map(move |&seed| (n, seed)))
        .collect();
    let sims: Vec<SimStats> = jobs
        .par_iter()
        .map(|&(n, seed)| simulate(cfg, n, spec.slots, spec.backoff_rule, seed))
        .collect();

    let mut t = Table::new(COMPARE_COLUMNS);
    for (&(n, seed), sim) in jobs.iter().zip(&sims) {
        let col_sim = if sim.tx_slots == 0 {
            0.0
        } else {
            sim.collision_slots as f64 / sim.tx_slots as f64
        };
        for &mode in &spec.modes {
            let rep = evaluate(n, &cfg.mac, mode, s.throughput_mode, &solver())?;
            let ap = access_probabilities(rep.tau, n);
            let col = 1.0 - ap.p_su;
            t.push(vec![
                n.into(),
                seed.into(),
                mode.as_str().into(),
                spec.backoff_rule.as_str().into(),
                spec.slots.into(),
                rep.tau.into(),
                sim.tau_hat.into(),
                relative_error(rep.tau, sim.tau_hat).into(),
                ap.p_su.into(),
                sim.p_su_hat.into(),
                relative_error(ap.p_su, sim.p_su_hat).into(),
                rep.throughput.s.into(),
                sim.payload_time_fraction.into(),
                relative_error(rep.throughput.s, sim.payload_time_fraction).into(),
                col.into(),
                col_sim.into(),
                relative_error(col, col_sim).into(),
            ]);
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------- scenario

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub trials: Table,
    pub summary: Table,
}

pub fn run_scenario(thresholds: &[f64], cfg: &Config) -> Result<ScenarioOutput, CliError> {
    if thresholds.is_empty() {
        return Err(CliError::Usage("thresholds list must not be empty".into()));
    }
    if thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CliError::Usage("thresholds must be finite and >= 0".into()));
    }
    let s = &cfg.scenario;
    let summary = contender_samples(cfg, s.n_vehicles, thresholds);

    let mut trials = Table::new(SCENARIO_TRIAL_COLUMNS);
    for r in &summary.records {
        trials.push(vec![r.trial.into(), r.threshold_m.into(), r.n_eff.into()]);
    }
    let mut stats = Table::new(SCENARIO_SUMMARY_COLUMNS);
    for st in &summary.thresholds {
        stats.push(vec![
            s.n_vehicles.into(),
            st.threshold_m.into(),
            s.trials.into(),
            st.mean.into(),
            st.std.into(),
        ]);
    }
    Ok(ScenarioOutput {
        trials,
        summary: stats,
    })
}
