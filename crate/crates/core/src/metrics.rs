//! Performance figures derived from the per-slot transmission probability:
//! access probabilities, packet delivery rate, saturation throughput, the
//! five per-slot delay states and the total-delay decomposition.
//!
//! PDR is the success probability of a transmission, `P_su`.

use serde::{Deserialize, Serialize};

use crate::params::{FrameDurations, MacTimings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessProbabilities {
    /// At least one station transmits in a slot.
    pub p_tr: f64,
    /// A transmission is successful, given that one occurs.
    pub p_su: f64,
    pub n: u32,
}

/// `P_tr = 1 − (1−τ)^n`, `P_su = nτ(1−τ)^(n−1) / P_tr`.
///
/// `P_su` is taken as 1 when `P_tr = 0` (no transmission can fail).
pub fn access_probabilities(tau: f64, n: u32) -> AccessProbabilities {
    if n == 0 {
        return AccessProbabilities {
            p_tr: 0.0,
            p_su: 1.0,
            n,
        };
    }
    let idle = (1.0 - tau).powi(n as i32);
    let p_tr = 1.0 - idle;
    let p_su = if p_tr > 0.0 {
        let single = f64::from(n) * tau * (1.0 - tau).powi(n as i32 - 1);
        (single / p_tr).min(1.0)
    } else {
        1.0
    };
    AccessProbabilities { p_tr, p_su, n }
}

pub fn pdr(ap: &AccessProbabilities) -> f64 {
    ap.p_su
}

/// Busy-channel durations of a successful and a colliding transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTimes {
    pub t_s_us: f64,
    pub t_c_us: f64,
}

/// `T_s = H + E[P] + SIFS + δ + ACK + DIFS + δ`, `T_c = H + E[P] + DIFS + δ`.
pub fn frame_times(d: &FrameDurations, t: &MacTimings) -> FrameTimes {
    let h = d.header_us;
    let ep = d.payload_us;
    let delta = t.prop_delay_us;
    FrameTimes {
        t_s_us: h + ep + t.sifs_us + delta + t.ack_us + t.difs_us + delta,
        t_c_us: h + ep + t.difs_us + delta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputMode {
    /// Idle slots contribute `(1 − P_tr)·T_slot` to the mean slot length.
    SlotScaled,
    /// Idle slots contribute a bare `(1 − P_tr)`, with no slot duration.
    PaperLiteral,
}

impl ThroughputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThroughputMode::SlotScaled => "slot_scaled",
            ThroughputMode::PaperLiteral => "paper_literal",
        }
    }
}

impl std::str::FromStr for ThroughputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slot_scaled" => Ok(ThroughputMode::SlotScaled),
            "paper_literal" => Ok(ThroughputMode::PaperLiteral),
            _ => Err(format!(
                "unknown throughput mode `{s}` (expected slot_scaled or paper_literal)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    /// Fraction of channel time carrying payload.
    pub s: f64,
    pub t_s_us: f64,
    pub t_c_us: f64,
    pub mode: ThroughputMode,
}

/// `S = P_su·P_tr·E[P] / ((1−P_tr)·σ + P_tr·P_su·T_s + P_tr·(1−P_su)·T_c)`,
/// with `σ = T_slot` or `σ = 1` depending on `mode`.
pub fn throughput(
    ap: &AccessProbabilities,
    frames: &FrameTimes,
    e_p_us: f64,
    t_slot_us: f64,
    mode: ThroughputMode,
) -> ThroughputReport {
    let idle_cost = match mode {
        ThroughputMode::SlotScaled => t_slot_us,
        ThroughputMode::PaperLiteral => 1.0,
    };
    let (p_tr, p_su) = (ap.p_tr, ap.p_su);
    let numerator = p_su * p_tr * e_p_us;
    let denominator =
        (1.0 - p_tr) * idle_cost + p_tr * p_su * frames.t_s_us + p_tr * (1.0 - p_su) * frames.t_c_us;
    let s = if numerator == 0.0 { 0.0 } else { numerator / denominator };
    ThroughputReport {
        s,
        t_s_us: frames.t_s_us,
        t_c_us: frames.t_c_us,
        mode,
    }
}

/// Per-slot states seen by a tagged station, with `τ_tr = τ_nb = τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStateProbabilities {
    /// Nobody transmits.
    pub p_emp: f64,
    /// Exactly one other station transmits, the tagged one is silent.
    pub p_suc: f64,
    /// Only the tagged station transmits.
    pub p_own: f64,
    /// The tagged station and exactly one other transmit.
    pub p_col: f64,
    /// Everything else.
    pub p_bus: f64,
}

impl DelayStateProbabilities {
    /// Sum in the canonical order `p_emp + p_suc + p_own + p_col + p_bus`.
    pub fn total(&self) -> f64 {
        self.p_emp + self.p_suc + self.p_own + self.p_col + self.p_bus
    }
}

pub fn delay_state_probabilities(tau: f64, n: u32) -> DelayStateProbabilities {
    if n == 0 {
        return DelayStateProbabilities {
            p_emp: 1.0,
            p_suc: 0.0,
            p_own: 0.0,
            p_col: 0.0,
            p_bus: 0.0,
        };
    }
    let others = f64::from(n - 1);
    let silent_others = (1.0 - tau).powi(n as i32 - 1);
    // (1−τ)^(n−2); the terms using it vanish for n = 1.
    let silent_but_one = if n >= 2 {
        (1.0 - tau).powi(n as i32 - 2)
    } else {
        0.0
    };
    let p_emp = (1.0 - tau) * silent_others;
    let p_suc = others * tau * (1.0 - tau) * silent_but_one;
    let p_own = tau * silent_others;
    let p_col = tau * others * tau * silent_but_one;
    // Residual: 1 − s is exact for s in [1/2, 2] and rounds back to exactly 1
    // when added to s otherwise, so the canonical sum is exactly one.
    let p_bus = 1.0 - (p_emp + p_suc + p_own + p_col);
    DelayStateProbabilities {
        p_emp,
        p_suc,
        p_own,
        p_col,
        p_bus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown {
    pub probs: DelayStateProbabilities,
    pub n_transmission: f64,
    pub n_collision: f64,
    /// Airtime of one successful exchange, `RTS + CTS + 3·SIFS + Data + ACK + DIFS`.
    pub t_tsp_us: f64,
    /// Time lost to one collision, `RTS + DIFS`.
    pub t_tsc_us: f64,
    pub t_tt_us: f64,
    pub t_tc_us: f64,
    /// Mean backoff, `CW_min · T_slot / 2`.
    pub cw_star_us: f64,
    /// Idle time, `T_slot · p_emp · N_transmitter`.
    pub t_emp_us: f64,
    pub t_td_us: f64,
}

/// Total delay `T_td = T_tt + T_tc + CW* + T_emp`, with expected counts
/// `N_transmission = P_tr·N` and `N_collision = p_col·N` for `N` transmitters.
pub fn total_delay(
    probs: &DelayStateProbabilities,
    ap: &AccessProbabilities,
    n_transmitter: u32,
    timings: &MacTimings,
    durations: &FrameDurations,
) -> DelayBreakdown {
    let n = f64::from(n_transmitter);
    let n_transmission = ap.p_tr * n;
    let n_collision = probs.p_col * n;
    let t_tsp_us = timings.rts_us
        + timings.cts_us
        + 3.0 * timings.sifs_us
        + durations.payload_us
        + timings.ack_us
        + timings.difs_us;
    let t_tsc_us = timings.rts_us + timings.difs_us;
    let t_tt_us = t_tsp_us * n_transmission;
    let t_tc_us = t_tsc_us * n_collision;
    let cw_star_us = f64::from(timings.cw_min) * durations.t_slot_us / 2.0;
    let t_emp_us = durations.t_slot_us * probs.p_emp * n;
    DelayBreakdown {
        probs: *probs,
        n_transmission,
        n_collision,
        t_tsp_us,
        t_tsc_us,
        t_tt_us,
        t_tc_us,
        cw_star_us,
        t_emp_us,
        t_td_us: t_tt_us + t_tc_us + cw_star_us + t_emp_us,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_durations;

    const EPS: f64 = 1e-12;

    #[test]
    fn access_probability_examples() {
        let a = access_probabilities(0.1, 1);
        assert!((a.p_tr - 0.1).abs() < EPS);
        assert_eq!(a.p_su, 1.0);
        assert_eq!(pdr(&a), 1.0);

        let a = access_probabilities(0.5, 2);
        assert!((a.p_tr - 0.75).abs() < EPS);
        assert!((a.p_su - 2.0 / 3.0).abs() < EPS);
        assert!((pdr(&a) - 2.0 / 3.0).abs() < EPS);

        let idle = access_probabilities(0.0, 10);
        assert_eq!(idle.p_tr, 0.0);
        assert_eq!(idle.p_su, 1.0);
        assert_eq!(access_probabilities(0.3, 0).p_tr, 0.0);
    }

    #[test]
    fn frame_time_examples() {
        let t = MacTimings::default();
        let f = frame_times(&derive_durations(&t), &t);
        let h = 200.0 / 3.0;
        assert!((f.t_s_us - (h + 1364.0 + 32.0 + 1.0 + 44.0 + 64.0 + 1.0)).abs() < 1e-9);
        assert!((f.t_c_us - (h + 1364.0 + 64.0 + 1.0)).abs() < 1e-9);
        assert!((f.t_s_us - 1_572.666_666_667).abs() < 1e-6);
        assert!((f.t_c_us - 1_495.666_666_667).abs() < 1e-6);

        let bare = MacTimings {
            header_bytes: 0,
            ack_us: 0.0,
            prop_delay_us: 0.0,
            ..t
        };
        let f = frame_times(&derive_durations(&bare), &bare);
        assert!((f.t_s_us - f.t_c_us - bare.sifs_us).abs() < EPS);
    }

    #[test]
    fn throughput_limits() {
        let frames = FrameTimes {
            t_s_us: 1500.0,
            t_c_us: 1400.0,
        };
        for mode in [ThroughputMode::SlotScaled, ThroughputMode::PaperLiteral] {
            let none = AccessProbabilities { p_tr: 0.0, p_su: 1.0, n: 3 };
            assert_eq!(throughput(&none, &frames, 1364.0, 13.0, mode).s, 0.0);
            let full = AccessProbabilities { p_tr: 1.0, p_su: 1.0, n: 3 };
            let r = throughput(&full, &frames, 1364.0, 13.0, mode);
            assert!((r.s - 1364.0 / 1500.0).abs() < EPS);
        }
    }

    #[test]
    fn modes_agree_for_unit_slots() {
        let frames = FrameTimes { t_s_us: 900.0, t_c_us: 800.0 };
        let ap = access_probabilities(0.07, 12);
        let a = throughput(&ap, &frames, 700.0, 1.0, ThroughputMode::SlotScaled);
        let b = throughput(&ap, &frames, 700.0, 1.0, ThroughputMode::PaperLiteral);
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn delay_state_examples() {
        let p = delay_state_probabilities(0.5, 2);
        for (got, want) in [(p.p_emp, 0.25), (p.p_suc, 0.25), (p.p_own, 0.25), (p.p_col, 0.25)] {
            assert!((got - want).abs() < EPS);
        }
        assert!(p.p_bus.abs() < EPS);

        let p = delay_state_probabilities(0.0, 7);
        assert_eq!((p.p_emp, p.p_suc, p.p_own, p.p_col, p.p_bus), (1.0, 0.0, 0.0, 0.0, 0.0));

        let p = delay_state_probabilities(0.2, 10);
        assert_eq!(p.total(), 1.0);
        // ≥ 2 of the 9 others transmit.
        let oracle = 1.0 - 0.8f64.powi(9) - 9.0 * 0.2 * 0.8f64.powi(8);
        assert!((p.p_bus - oracle).abs() < 1e-12);

        let p = delay_state_probabilities(0.3, 1);
        assert_eq!(p.p_suc, 0.0);
        assert_eq!(p.p_col, 0.0);
        assert!(p.p_bus.abs() < EPS);
        assert_eq!(p.total(), 1.0);
    }

    #[test]
    fn table_one_delay_anchors() {
        let t = MacTimings::default();
        let d = derive_durations(&t);
        let ap = access_probabilities(0.05, 20);
        let probs = delay_state_probabilities(0.05, 20);
        let b = total_delay(&probs, &ap, 20, &t, &d);
        assert_eq!(b.cw_star_us, 45.5);
        assert_eq!(b.t_tsc_us, 64.0);
        assert_eq!(b.t_tsp_us, 3.0 * 32.0 + 1364.0 + 44.0 + 64.0);
        assert_eq!(b.t_td_us, b.t_tt_us + b.t_tc_us + b.cw_star_us + b.t_emp_us);
        assert!((b.n_transmission - ap.p_tr * 20.0).abs() < EPS);
        assert!((b.n_collision - probs.p_col * 20.0).abs() < EPS);
        assert!((b.t_emp_us - 13.0 * probs.p_emp * 20.0).abs() < 1e-9);

        let handshake = MacTimings {
            rts_us: 52.0,
            cts_us: 44.0,
            ..t
        };
        let b = total_delay(&probs, &ap, 20, &handshake, &d);
        assert_eq!(b.t_tsc_us, 52.0 + 64.0);
        assert_eq!(b.t_tsp_us, 52.0 + 44.0 + 96.0 + 1364.0 + 44.0 + 64.0);
    }

    #[test]
    fn empty_network_delay_is_backoff_only() {
        let t = MacTimings::default();
        let d = derive_durations(&t);
        let b = total_delay(
            &delay_state_probabilities(0.0, 0),
            &access_probabilities(0.0, 0),
            0,
            &t,
            &d,
        );
        assert_eq!(b.t_td_us, 45.5);
    }
}
