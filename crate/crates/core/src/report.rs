//! End-to-end evaluation of one contender count, and averages over the
//! contender counts produced by random placements.

use crate::markov::{solve_fixed_point, FixedPointSolution, MarkovError, ModelMode, SolverOptions};
use crate::metrics::{
    access_probabilities, delay_state_probabilities, frame_times, pdr, throughput, total_delay,
    AccessProbabilities, DelayBreakdown, ThroughputMode, ThroughputReport,
};
use crate::params::{derive_durations, MacTimings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfReport {
    pub n: u32,
    /// `None` for an empty network.
    pub solution: Option<FixedPointSolution>,
    pub tau: f64,
    pub access: AccessProbabilities,
    pub pdr: f64,
    pub throughput: ThroughputReport,
    pub delay: DelayBreakdown,
}

/// Solve the chain for `n` contenders and derive every metric. `n = 0` is an
/// idle network: nothing is sent, `S = 0`, `PDR = 1`.
pub fn evaluate(
    n: u32,
    mac: &MacTimings,
    mode: ModelMode,
    throughput_mode: ThroughputMode,
    opts: &SolverOptions,
) -> Result<PerfReport, MarkovError> {
    let solution = if n == 0 {
        None
    } else {
        Some(solve_fixed_point(n, &mac.geometry(), mode, opts)?)
    };
    let tau = solution.map_or(0.0, |s| s.tau);
    let durations = derive_durations(mac);
    let frames = frame_times(&durations, mac);
    let access = access_probabilities(tau, n);
    let thr = throughput(
        &access,
        &frames,
        durations.payload_us,
        durations.t_slot_us,
        throughput_mode,
    );
    let probs = delay_state_probabilities(tau, n);
    let delay = total_delay(&probs, &access, n, mac, &durations);
    Ok(PerfReport {
        n,
        solution,
        tau,
        access,
        pdr: pdr(&access),
        throughput: thr,
        delay,
    })
}

/// The scalar metrics that get averaged over placements.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricRow {
    pub n_eff: f64,
    pub tau: f64,
    pub p_tr: f64,
    pub p_su: f64,
    pub pdr: f64,
    pub throughput: f64,
    pub p_emp: f64,
    pub p_suc: f64,
    pub p_own: f64,
    pub p_col: f64,
    pub p_bus: f64,
    pub t_tt_us: f64,
    pub t_tc_us: f64,
    pub cw_star_us: f64,
    pub t_emp_us: f64,
    pub t_td_us: f64,
}

impl From<&PerfReport> for MetricRow {
    fn from(r: &PerfReport) -> Self {
        let p = &r.delay.probs;
        MetricRow {
            n_eff: f64::from(r.n),
            tau: r.tau,
            p_tr: r.access.p_tr,
            p_su: r.access.p_su,
            pdr: r.pdr,
            throughput: r.throughput.s,
            p_emp: p.p_emp,
            p_suc: p.p_suc,
            p_own: p.p_own,
            p_col: p.p_col,
            p_bus: p.p_bus,
            t_tt_us: r.delay.t_tt_us,
            t_tc_us: r.delay.t_tc_us,
            cw_star_us: r.delay.cw_star_us,
            t_emp_us: r.delay.t_emp_us,
            t_td_us: r.delay.t_td_us,
        }
    }
}

impl MetricRow {
    fn fields_mut(&mut self) -> [&mut f64; 16] {
        [
            &mut self.n_eff,
            &mut self.tau,
            &mut self.p_tr,
            &mut self.p_su,
            &mut self.pdr,
            &mut self.throughput,
            &mut self.p_emp,
            &mut self.p_suc,
            &mut self.p_own,
            &mut self.p_col,
            &mut self.p_bus,
            &mut self.t_tt_us,
            &mut self.t_tc_us,
            &mut self.cw_star_us,
            &mut self.t_emp_us,
            &mut self.t_td_us,
        ]
    }

    fn fields(&self) -> [f64; 16] {
        let mut copy = *self;
        copy.fields_mut().map(|f| *f)
    }
}

/// Memoized reports for `n = 0..=max_n` under one configuration.
#[derive(Debug, Clone)]
pub struct ReportCache {
    reports: Vec<PerfReport>,
}

impl ReportCache {
    pub fn build(
        max_n: u32,
        mac: &MacTimings,
        mode: ModelMode,
        throughput_mode: ThroughputMode,
        opts: &SolverOptions,
    ) -> Result<Self, MarkovError> {
        use rayon::prelude::*;
        let reports = (0..=max_n)
            .into_par_iter()
            .map(|n| evaluate(n, mac, mode, throughput_mode, opts))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { reports })
    }

    pub fn get(&self, n: u32) -> &PerfReport {
        &self.reports[n as usize]
    }

    pub fn max_n(&self) -> u32 {
        self.reports.len() as u32 - 1
    }

    /// Mean of every metric over the given contender counts. Samples are
    /// grouped by count and weighted by their frequency, so a constant sample
    /// reproduces that count's row exactly.
    pub fn mean_over(&self, n_effs: &[u32]) -> MetricRow {
        assert!(!n_effs.is_empty());
        let mut counts = vec![0u64; self.reports.len()];
        for &n in n_effs {
            counts[n as usize] += 1;
        }
        let total = n_effs.len() as f64;
        let mut acc = [0.0; 16];
        for (n, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            let w = c as f64 / total;
            let row = MetricRow::from(&self.reports[n]);
            for (a, v) in acc.iter_mut().zip(row.fields()) {
                *a += w * v;
            }
        }
        let mut out = MetricRow::default();
        for (f, a) in out.fields_mut().into_iter().zip(acc) {
            *f = a;
        }
        out
    }
}
