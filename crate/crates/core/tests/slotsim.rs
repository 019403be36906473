use danger_v2x::markov::{solve_fixed_point, ChainGeometry, ModelMode, SolverOptions};
use danger_v2x::metrics::{delay_state_probabilities, frame_times};
use danger_v2x::params::derive_durations;
use danger_v2x::scenario::stream_rng;
use danger_v2x::slotsim::{init_stations, run, BackoffRule, SlotWeights};
use danger_v2x::MacTimings;

fn weights(mac: &MacTimings) -> SlotWeights {
    let d = derive_durations(mac);
    SlotWeights::new(&d, &frame_times(&d, mac))
}

#[test]
fn initial_counters_are_uniform() {
    let g = ChainGeometry::new(5, 8).unwrap();
    let mut rng = stream_rng(5, 0);
    let stations = init_stations(80_000, &g, &mut rng);
    let mut counts = [0u64; 8];
    for s in &stations {
        assert_eq!(s.stage, 0);
        counts[s.counter as usize] += 1;
    }
    let expected = stations.len() as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 7 degrees of freedom, 0.999 quantile.
    assert!(chi2 < 24.32, "chi2 = {chi2}");
}

#[test]
fn slot_accounting_is_consistent() {
    let mac = MacTimings::default();
    for rule in [BackoffRule::CountThrough, BackoffRule::Freeze] {
        for n in [1, 3, 17] {
            let s = run(n, 50_000, &mac.geometry(), rule, &weights(&mac), 4);
            assert_eq!(s.slots, 50_000);
            assert_eq!(s.tx_slots, s.success_slots + s.collision_slots);
            assert_eq!(s.idle_slots + s.tx_slots, s.slots);
            assert!(s.attempts >= s.tx_slots);
            assert!((0.0..=1.0).contains(&s.tau_hat));
            assert!((0.0..=1.0).contains(&s.payload_time_fraction));
            if n == 1 {
                assert_eq!(s.collision_slots, 0);
                assert_eq!(s.p_su_hat, 1.0);
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let mac = MacTimings::default();
    let a = run(12, 30_000, &mac.geometry(), BackoffRule::CountThrough, &weights(&mac), 99);
    let b = run(12, 30_000, &mac.geometry(), BackoffRule::CountThrough, &weights(&mac), 99);
    let c = run(12, 30_000, &mac.geometry(), BackoffRule::CountThrough, &weights(&mac), 100);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn fewer_stations_succeed_more_often() {
    let mac = MacTimings::default();
    let w = weights(&mac);
    let g = mac.geometry();
    let few = run(5, 200_000, &g, BackoffRule::CountThrough, &w, 8);
    let many = run(40, 200_000, &g, BackoffRule::CountThrough, &w, 8);
    assert!(few.p_su_hat > many.p_su_hat);
    assert!(few.payload_time_fraction > many.payload_time_fraction);
}

#[test]
fn tagged_pair_collisions_match_delay_state_model() {
    let mac = MacTimings::default();
    let g = mac.geometry();
    let n = 10;
    let sol = solve_fixed_point(n, &g, ModelMode::Classic, &SolverOptions::default()).unwrap();
    let analytic = delay_state_probabilities(sol.tau, n).p_col;
    let sim = run(n, 1_000_000, &g, BackoffRule::CountThrough, &weights(&mac), 1);
    let rel = (sim.p_col_tagged_hat - analytic).abs() / analytic;
    assert!(rel <= 0.10, "sim {} analytic {analytic}", sim.p_col_tagged_hat);
}

#[test]
fn single_station_attempt_rate() {
    let mac = MacTimings::default();
    let s = run(1, 400_000, &mac.geometry(), BackoffRule::Freeze, &weights(&mac), 2);
    assert!((s.tau_hat - 2.0 / 9.0).abs() < 0.005, "tau_hat {}", s.tau_hat);
}
