//! Argument parsing and output writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use danger_v2x::params::{load_config, DEFAULT_THRESHOLDS_M};
use danger_v2x::slotsim::{warmup_for, BackoffRule};
use danger_v2x::{Config, DangerMetric, ModelMode, RawConfig, ThroughputMode};

use crate::commands::{
    run_compare, run_point, run_scenario, run_sweep, CompareSpec, Metric, SweepSpec, XAxis,
};
use crate::error::CliError;
use crate::table::Table;

#[derive(Debug, Parser)]
#[command(name = "danger-v2x", version, about = "Danger-aware V2X channel access model")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every metric for one configuration.
    Point,
    /// Sweep the vehicle count or the threshold distance.
    Sweep(SweepArgs),
    /// Compare the analytical model with the slot simulator.
    Compare(CompareArgs),
    /// Monte Carlo placements and their transmitter counts.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed (same as --rng-seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory. CSV goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts (sweep only, needs --out).
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Args, Default)]
pub struct ConfigFlags {
    #[arg(long, global = true)]
    pub difs_us: Option<f64>,
    #[arg(long, global = true)]
    pub sifs_us: Option<f64>,
    #[arg(long, global = true)]
    pub slot_us: Option<f64>,
    #[arg(long, global = true)]
    pub prop_delay_us: Option<f64>,
    #[arg(long, global = true)]
    pub payload_bytes: Option<u32>,
    #[arg(long, global = true)]
    pub data_rate_mbps: Option<f64>,
    #[arg(long, global = true)]
    pub header_bytes: Option<u32>,
    #[arg(long, global = true)]
    pub ack_us: Option<f64>,
    #[arg(long, global = true)]
    pub rts_us: Option<f64>,
    #[arg(long, global = true)]
    pub cts_us: Option<f64>,
    #[arg(long, global = true)]
    pub cw_min: Option<u32>,
    #[arg(long, global = true)]
    pub max_stage: Option<u32>,
    #[arg(long, global = true)]
    pub n_vehicles: Option<u32>,
    #[arg(long, global = true)]
    pub road_length_m: Option<f64>,
    #[arg(long, global = true)]
    pub threshold_m: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<u32>,
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
    /// busy_aware | classic
    #[arg(long, global = true)]
    pub model_mode: Option<ModelMode>,
    /// slot_scaled | paper_literal
    #[arg(long, global = true)]
    pub throughput_mode: Option<ThroughputMode>,
    /// min_gap | front_gap_only
    #[arg(long, global = true)]
    pub danger_metric: Option<DangerMetric>,
}

impl ConfigFlags {
    fn to_raw(&self, seed: Option<u64>) -> RawConfig {
        RawConfig {
            difs_us: self.difs_us,
            sifs_us: self.sifs_us,
            slot_us: self.slot_us,
            prop_delay_us: self.prop_delay_us,
            payload_bytes: self.payload_bytes,
            data_rate_mbps: self.data_rate_mbps,
            header_bytes: self.header_bytes,
            ack_us: self.ack_us,
            rts_us: self.rts_us,
            cts_us: self.cts_us,
            cw_min: self.cw_min,
            max_stage: self.max_stage,
            n_vehicles: self.n_vehicles,
            road_length_m: self.road_length_m,
            threshold_m: self.threshold_m,
            trials: self.trials,
            rng_seed: seed.or(self.rng_seed),
            model_mode: self.model_mode,
            throughput_mode: self.throughput_mode,
            danger_metric: self.danger_metric,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// n_vehicles | threshold_m
    #[arg(long, default_value = "n_vehicles")]
    pub x_axis: XAxis,
    /// Comma list; `a..b` is an inclusive integer range.
    #[arg(long)]
    pub values: Option<String>,
    /// Comma list of pdr, throughput, total_delay, p_bus, p_col, n_eff, tau.
    #[arg(long, default_value = "pdr,throughput,total_delay,p_bus,p_col")]
    pub metrics: String,
    /// Filter thresholds in metres (n_vehicles axis).
    #[arg(long, default_value = "300,500,700")]
    pub thresholds: String,
    /// Add simulator estimates at the rounded mean transmitter count.
    #[arg(long)]
    pub compare_sim: bool,
    #[arg(long, default_value_t = 100_000)]
    pub sim_slots: u64,
    /// count_through | freeze
    #[arg(long, default_value = "count_through")]
    pub backoff_rule: BackoffRule,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Station counts.
    #[arg(long = "n", default_value = "1,5,10,20,50")]
    pub n_values: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    /// Simulator seeds; defaults to the configured seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value = "classic,busy_aware")]
    pub modes: String,
    /// count_through | freeze
    #[arg(long, default_value = "count_through")]
    pub backoff_rule: BackoffRule,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Thresholds in metres; defaults to --threshold-m, else 300,500,700.
    #[arg(long)]
    pub thresholds: Option<String>,
}

/// Parse a comma list, expanding `a..b` into the integers `a..=b`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u32 = parse_item(a)?;
            let b: u32 = parse_item(b)?;
            out.extend((a..=b).map(f64::from));
        } else {
            out.push(parse_item(item)?);
        }
    }
    Ok(out)
}

fn parse_item<T: std::str::FromStr>(s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid list item `{s}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_item)
        .collect()
}

fn load(common: &CommonArgs) -> Result<Config, CliError> {
    let text = match &common.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?),
        None => None,
    };
    Ok(load_config(text.as_deref(), &common.flags.to_raw(common.seed))?)
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn emit(table: &Table, out: Option<&Path>, name: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(dir) => table.save(&dir.join(name)),
        None => stdout
            .write_all(table.to_csv_string().as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn write_meta(dir: &Path, command: &str, cfg: &Config, extra: serde_json::Value) -> Result<(), CliError> {
    let mut meta = serde_json::json!({
        "command": command,
        "config": RawConfig::from(cfg),
        "definitions": {
            "pdr": "probability that a busy slot carries exactly one transmission",
            "t_emp_us": "slot_us * p_emp * n_eff",
            "cw_star_us": "cw_min * slot_us / 2",
        },
    });
    if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
        m.extend(e);
    }
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    write_file(&dir.join(format!("{command}.meta.json")), &text)
}

/// Execute a parsed command line, writing CSV to `stdout` unless `--out` is set.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let common = &cli.common;
    let cfg = load(common)?;
    let out = common.out.as_deref();
    if common.svg && out.is_none() {
        return Err(CliError::Usage("--svg requires --out".into()));
    }
    if common.svg && !matches!(cli.command, Command::Sweep(_)) {
        return Err(CliError::Usage("--svg is only supported by sweep".into()));
    }
    if let Some(dir) = out {
        prepare_out(dir)?;
    }

    match &cli.command {
        Command::Point => {
            let table = run_point(&cfg)?;
            emit(&table, out, "point.csv", stdout)?;
            if let Some(dir) = out {
                write_meta(dir, "point", &cfg, serde_json::json!({}))?;
            }
        }
        Command::Sweep(args) => {
            let spec = SweepSpec {
                x_axis: args.x_axis,
                values: match &args.values {
                    Some(v) => parse_values(v)?,
                    None => SweepSpec::default().values,
                },
                metrics: parse_list::<Metric>(&args.metrics)?,
                thresholds: parse_list(&args.thresholds)?,
                compare_sim: args.compare_sim,
                sim_slots: args.sim_slots,
                backoff_rule: args.backoff_rule,
            };
            let result = run_sweep(&spec, &cfg)?;
            emit(&result.table, out, "sweep.csv", stdout)?;
            if let Some(dir) = out {
                if common.svg {
                    for (metric, chart) in &result.charts {
                        write_file(&dir.join(format!("sweep_{metric}.svg")), &chart.to_svg())?;
                    }
                }
                let sim = spec.compare_sim.then(|| {
                    serde_json::json!({
                        "slots": spec.sim_slots,
                        "warmup_slots": warmup_for(spec.sim_slots),
                        "backoff_rule": spec.backoff_rule.as_str(),
                    })
                });
                write_meta(
                    dir,
                    "sweep",
                    &cfg,
                    serde_json::json!({
                        "x_axis": spec.x_axis.as_str(),
                        "thresholds_m": spec.thresholds,
                        "metrics": spec.metrics.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
                        "simulation": sim,
                    }),
                )?;
            }
        }
        Command::Compare(args) => {
            let spec = CompareSpec {
                n_values: parse_list(&args.n_values)?,
                slots: args.slots,
                seeds: match &args.seeds {
                    Some(s) => parse_list(s)?,
                    None => vec![cfg.scenario.rng_seed],
                },
                modes: parse_list(&args.modes)?,
                backoff_rule: args.backoff_rule,
            };
            let table = run_compare(&spec, &cfg)?;
            emit(&table, out, "compare.csv", stdout)?;
            if let Some(dir) = out {
                write_meta(
                    dir,
                    "compare",
                    &cfg,
                    serde_json::json!({
                        "warmup_slots": warmup_for(spec.slots),
                        "backoff_rule": spec.backoff_rule.as_str(),
                    }),
                )?;
            }
        }
        Command::Scenario(args) => {
            let thresholds = match (&args.thresholds, cfg.scenario.threshold_m) {
                (Some(t), _) => parse_list(t)?,
                (None, Some(t)) => vec![t],
                (None, None) => DEFAULT_THRESHOLDS_M.to_vec(),
            };
            let result = run_scenario(&thresholds, &cfg)?;
            match out {
                Some(dir) => {
                    result.trials.save(&dir.join("scenario_trials.csv"))?;
                    result.summary.save(&dir.join("scenario_summary.csv"))?;
                    write_meta(dir, "scenario", &cfg, serde_json::json!({ "thresholds_m": thresholds }))?;
                }
                None => emit(&result.summary, None, "", stdout)?,
            }
        }
    }
    Ok(())
}
