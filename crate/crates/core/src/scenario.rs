//! Danger-aware transmitter selection on a one-lane road.
//!
//! Vehicles are dropped uniformly on `[0, road_length]`. Each vehicle's
//! danger distance is its gap to the nearest adjacent vehicle; a vehicle is
//! granted a transmission opportunity when that gap is strictly below the
//! threshold. The number of granted vehicles is the effective contender count
//! `n_eff` fed to the MAC model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How a vehicle's danger distance is read off its neighbor gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DangerMetric {
    /// Smaller of the gaps to the preceding and subsequent vehicle.
    #[default]
    MinGap,
    /// Gap to the vehicle ahead (next larger coordinate). The leading vehicle
    /// has nothing ahead and is never in danger.
    FrontGapOnly,
}

impl std::str::FromStr for DangerMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_gap" => Ok(DangerMetric::MinGap),
            "front_gap_only" => Ok(DangerMetric::FrontGapOnly),
            _ => Err(format!(
                "unknown danger metric `{s}` (expected min_gap or front_gap_only)"
            )),
        }
    }
}

/// RNG stream for one independent unit of work (a trial, a sweep point).
/// Streams never overlap, so results do not depend on execution order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sorted vehicle coordinates along the lane, in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePlacement {
    pub positions: Vec<f64>,
    pub road_length_m: f64,
}

impl VehiclePlacement {
    /// Sorts `positions`.
    pub fn new(mut positions: Vec<f64>, road_length_m: f64) -> Self {
        positions.sort_by(f64::total_cmp);
        Self {
            positions,
            road_length_m,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn place_vehicles<R: Rng + ?Sized>(n: u32, road_length_m: f64, rng: &mut R) -> VehiclePlacement {
    let positions = (0..n)
        .map(|_| rng.random_range(0.0..=road_length_m))
        .collect();
    VehiclePlacement::new(positions, road_length_m)
}

/// Euclidean distance between two points.
pub fn pairwise_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DangerAssessment {
    /// Danger distance per vehicle, in placement order. `+∞` means no
    /// relevant neighbor.
    pub distances: Vec<f64>,
}

pub fn assess_danger(placement: &VehiclePlacement, metric: DangerMetric) -> DangerAssessment {
    let xs = &placement.positions;
    // Everybody shares the lane, y = 0.
    let gap = |a: usize, b: usize| pairwise_distance((xs[a], 0.0), (xs[b], 0.0));
    let n = xs.len();
    let distances = (0..n)
        .map(|i| {
            let behind = (i > 0).then(|| gap(i - 1, i));
            let ahead = (i + 1 < n).then(|| gap(i, i + 1));
            match metric {
                DangerMetric::MinGap => match (behind, ahead) {
                    (Some(b), Some(a)) => b.min(a),
                    (Some(d), None) | (None, Some(d)) => d,
                    (None, None) => f64::INFINITY,
                },
                DangerMetric::FrontGapOnly => ahead.unwrap_or(f64::INFINITY),
            }
        })
        .collect();
    DangerAssessment { distances }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub grants: Vec<bool>,
    pub n_eff: u32,
}

/// Grant every vehicle whose danger distance is strictly below `threshold_m`.
pub fn apply_threshold(assessment: &DangerAssessment, threshold_m: f64) -> FilterOutcome {
    let grants: Vec<bool> = assessment
        .distances
        .iter()
        .map(|&d| d < threshold_m)
        .collect();
    let n_eff = grants.iter().filter(|&&g| g).count() as u32;
    FilterOutcome { grants, n_eff }
}

/// Place, assess and filter one trial against every threshold.
pub fn trial_n_eff<R: Rng + ?Sized>(
    n_vehicles: u32,
    road_length_m: f64,
    metric: DangerMetric,
    thresholds: &[f64],
    rng: &mut R,
) -> Vec<u32> {
    let placement = place_vehicles(n_vehicles, road_length_m, rng);
    let assessment = assess_danger(&placement, metric);
    thresholds
        .iter()
        .map(|&th| apply_threshold(&assessment, th).n_eff)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: u32,
    pub threshold_m: f64,
    pub n_eff: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NEffStats {
    pub threshold_m: f64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NEffSummary {
    pub thresholds: Vec<NEffStats>,
    /// Trial-major, thresholds in input order.
    pub records: Vec<TrialRecord>,
}

impl NEffSummary {
    /// `n_eff` of every trial for the threshold at `index`.
    pub fn samples(&self, index: usize) -> Vec<u32> {
        let k = self.thresholds.len();
        self.records.iter().skip(index).step_by(k).map(|r| r.n_eff).collect()
    }
}

/// Summary statistics of integer samples.
pub fn mean_std(samples: &[u32]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let std = if samples.len() > 1 {
        let ss: f64 = samples.iter().map(|&x| (f64::from(x) - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Monte Carlo distribution of `n_eff` over `trials` placements. Trial `t`
/// draws from stream `t` of `seed`; all thresholds see the same placement.
pub fn expected_n_eff(
    n_vehicles: u32,
    road_length_m: f64,
    metric: DangerMetric,
    thresholds: &[f64],
    trials: u32,
    seed: u64,
) -> NEffSummary {
    let per_trial: Vec<Vec<u32>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, u64::from(t));
            trial_n_eff(n_vehicles, road_length_m, metric, thresholds, &mut rng)
        })
        .collect();
    let stats = thresholds
        .iter()
        .enumerate()
        .map(|(j, &threshold_m)| {
            let column: Vec<u32> = per_trial.iter().map(|r| r[j]).collect();
            let (mean, std) = mean_std(&column);
            NEffStats {
                threshold_m,
                mean,
                std,
            }
        })
        .collect();
    let records = per_trial
        .iter()
        .enumerate()
        .flat_map(|(t, row)| {
            thresholds
                .iter()
                .zip(row)
                .map(move |(&threshold_m, &n_eff)| TrialRecord {
                    trial: t as u32,
                    threshold_m,
                    n_eff,
                })
        })
        .collect();
    NEffSummary {
        thresholds: stats,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placement(xs: &[f64]) -> VehiclePlacement {
        VehiclePlacement::new(xs.to_vec(), 1000.0)
    }

    #[test]
    fn distances() {
        assert_eq!(pairwise_distance((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(pairwise_distance((12.5, -3.0), (12.5, -3.0)), 0.0);
        assert_eq!(pairwise_distance((0.0, 0.0), (300.0, 0.0)), 300.0);
    }

    #[test]
    fn placement_is_sorted_and_in_range() {
        let mut rng = stream_rng(42, 0);
        let p = place_vehicles(50, 1000.0, &mut rng);
        assert_eq!(p.len(), 50);
        assert!(p.positions.windows(2).all(|w| w[0] <= w[1]));
        assert!(p.positions.iter().all(|&x| (0.0..=1000.0).contains(&x)));

        let again = place_vehicles(50, 1000.0, &mut stream_rng(42, 0));
        assert_eq!(p, again);
        let other = place_vehicles(50, 1000.0, &mut stream_rng(42, 1));
        assert_ne!(p, other);
    }

    #[test]
    fn single_vehicle_is_never_in_danger() {
        let p = place_vehicles(1, 1000.0, &mut stream_rng(3, 0));
        let a = assess_danger(&p, DangerMetric::MinGap);
        assert_eq!(a.distances, vec![f64::INFINITY]);
        assert_eq!(apply_threshold(&a, 1e9).n_eff, 0);
    }

    #[test]
    fn hand_computed_danger_and_grants() {
        let a = assess_danger(&placement(&[0.0, 100.0, 900.0]), DangerMetric::MinGap);
        assert_eq!(a.distances, vec![100.0, 100.0, 800.0]);
        let f = apply_threshold(&a, 300.0);
        assert_eq!(f.grants, vec![true, true, false]);
        assert_eq!(f.n_eff, 2);
        assert_eq!(apply_threshold(&a, 0.0).n_eff, 0);
        assert_eq!(apply_threshold(&a, 1000.0).n_eff, 3);
        // Strict inequality at the boundary.
        assert_eq!(apply_threshold(&a, 100.0).n_eff, 0);

        let front = assess_danger(&placement(&[0.0, 100.0, 900.0]), DangerMetric::FrontGapOnly);
        assert_eq!(front.distances, vec![100.0, 800.0, f64::INFINITY]);
    }

    #[test]
    fn equal_spacing() {
        let xs: Vec<f64> = (0..10).map(|i| 25.0 * f64::from(i)).collect();
        let a = assess_danger(&placement(&xs), DangerMetric::MinGap);
        assert!(a.distances.iter().all(|&d| d == 25.0));
    }

    #[test]
    fn full_road_threshold_grants_everyone() {
        for t in 0..100 {
            let mut rng = stream_rng(9, t);
            let p = place_vehicles(50, 1000.0, &mut rng);
            let a = assess_danger(&p, DangerMetric::MinGap);
            assert_eq!(apply_threshold(&a, 1000.0).n_eff, 50);
            assert_eq!(apply_threshold(&a, 0.0).n_eff, 0);
        }
    }

    #[test]
    fn monte_carlo_summary() {
        let s = expected_n_eff(50, 1000.0, DangerMetric::MinGap, &[300.0, 500.0, 700.0, 1000.0], 500, 1);
        let means: Vec<f64> = s.thresholds.iter().map(|t| t.mean).collect();
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
        assert_eq!(means[3], 50.0);
        assert_eq!(s.thresholds[3].std, 0.0);
        assert_eq!(s.records.len(), 500 * 4);
        assert_eq!(s, expected_n_eff(50, 1000.0, DangerMetric::MinGap, &[300.0, 500.0, 700.0, 1000.0], 500, 1));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[2, 4, 4, 4, 5, 5, 7, 9]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3]), (3.0, 0.0));
    }
}
