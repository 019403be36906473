use danger_v2x::markov::{solve_fixed_point, ModelMode, SolverOptions};
use danger_v2x::metrics::{
    access_probabilities, delay_state_probabilities, frame_times, throughput, ThroughputMode,
};
use danger_v2x::params::derive_durations;
use danger_v2x::{evaluate, MacTimings};
use proptest::prelude::*;

proptest! {
    #[test]
    fn delay_states_close_exactly(tau in 0.0..=1.0f64, n in 1u32..500) {
        let p = delay_state_probabilities(tau, n);
        let sum = p.p_emp + p.p_suc + p.p_own + p.p_col + p.p_bus;
        prop_assert_eq!(sum, 1.0);
        for v in [p.p_emp, p.p_suc, p.p_own, p.p_col] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn slot_scaled_throughput_is_bounded(tau in 0.0..=1.0f64, n in 1u32..200) {
        let mac = MacTimings::default();
        let d = derive_durations(&mac);
        let f = frame_times(&d, &mac);
        let ap = access_probabilities(tau, n);
        let s = throughput(&ap, &f, d.payload_us, d.t_slot_us, ThroughputMode::SlotScaled).s;
        prop_assert!(s >= 0.0);
        prop_assert!(s <= d.payload_us / f.t_s_us + 1e-15);
    }

    #[test]
    fn success_share_falls_with_more_stations(tau in 0.001..0.999f64, n in 2u32..200) {
        let a = access_probabilities(tau, n).p_su;
        let b = access_probabilities(tau, n + 1).p_su;
        // Strict while representable; both underflow to 0 for extreme tau, n.
        prop_assert!(b < a || (a < f64::MIN_POSITIVE && b <= a));
    }

    #[test]
    fn access_probabilities_are_probabilities(tau in 0.0..=1.0f64, n in 0u32..300) {
        let ap = access_probabilities(tau, n);
        prop_assert!((0.0..=1.0).contains(&ap.p_tr));
        prop_assert!((0.0..=1.0).contains(&ap.p_su));
    }
}

#[test]
fn delivery_degrades_with_population() {
    let mac = MacTimings::default();
    for mode in [ModelMode::BusyAware, ModelMode::Classic] {
        let reports: Vec<_> = (1..=100)
            .map(|n| evaluate(n, &mac, mode, ThroughputMode::SlotScaled, &SolverOptions::default()).unwrap())
            .collect();
        for w in reports.windows(2) {
            assert!(w[1].pdr <= w[0].pdr, "{mode:?} n={}", w[1].n);
            assert!(w[1].throughput.s <= w[0].throughput.s, "{mode:?} n={}", w[1].n);
        }
    }
}

#[test]
fn total_delay_is_sum_of_parts() {
    let mac = MacTimings::default();
    for n in [0, 1, 2, 10, 50] {
        let r = evaluate(n, &mac, ModelMode::BusyAware, ThroughputMode::SlotScaled, &SolverOptions::default())
            .unwrap();
        let d = &r.delay;
        assert_eq!(d.t_td_us, d.t_tt_us + d.t_tc_us + d.cw_star_us + d.t_emp_us);
        assert!(d.t_tt_us >= 0.0 && d.t_tc_us >= 0.0 && d.t_emp_us >= 0.0);
        assert_eq!(d.cw_star_us, 45.5);
    }
}

#[test]
fn classic_pdr_matches_solved_success_probability() {
    let mac = MacTimings::default();
    let g = mac.geometry();
    for n in [2, 5, 20] {
        let sol = solve_fixed_point(n, &g, ModelMode::Classic, &SolverOptions::default()).unwrap();
        let r = evaluate(n, &mac, ModelMode::Classic, ThroughputMode::SlotScaled, &SolverOptions::default())
            .unwrap();
        let ap = access_probabilities(sol.tau, n);
        assert_eq!(r.pdr, ap.p_su);
    }
}
