//! Busy-probability-aware DCF backoff chain.
//!
//! A saturated station is described by its backoff stage `i ∈ [0, m]` and
//! counter `k ∈ [0, W_i - 1]`, with `W_i = 2^i * W_0`. Besides the usual
//! collision probability `P_c`, the chain carries a busy probability `P_b`:
//! a counter that senses the channel busy stays put instead of counting down
//! (self-loop `P_b / W_i`). The stationary distribution has the closed form
//!
//! ```text
//! c_i     = P_c^i                  i < m
//! c_m     = P_c^m / (1 - P_c)      (c_0 = 1 when m = 0)
//! b_{i,0} = c_i * b_{0,0}
//! b_{i,k} = c_i * b_{0,0} * (1 - k / W_i) / (1 - P_b / W_i)     k >= 1
//! ```
//!
//! with `b_{0,0}` fixed by normalization. The per-slot transmission
//! probability is `τ = Σ_i b_{i,0}`, and the model is closed by coupling
//! `P_c`/`P_b` to the other `n - 1` stations (see [`couple`]) and iterating to
//! a fixed point.
//!
//! [`oracle`] builds the explicit transition matrix of the same chain and
//! solves it by power iteration, independently of the closed form.

pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::MAX_BACKOFF_STAGE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("backoff stage {stage} out of range [0, {max_stage}]")]
    StageOutOfRange { stage: u32, max_stage: u32 },
    #[error("invalid chain geometry: {0}")]
    Geometry(&'static str),
    #[error("invalid chain inputs: {0}")]
    Inputs(&'static str),
    #[error(
        "fixed point did not converge after {iterations} iterations \
         (last tau = {tau}, residual = {residual:e})"
    )]
    NonConvergence {
        iterations: u32,
        tau: f64,
        residual: f64,
    },
    #[error("power iteration did not converge after {iterations} iterations (residual = {residual:e})")]
    OracleNonConvergence { iterations: u32, residual: f64 },
}

/// How the busy and collision probabilities are tied to the transmission
/// probability of the other stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// `P_c = P_b = 1 - (1 - τ)^(n-1)`.
    BusyAware,
    /// `P_c = 1 - (1 - τ)^(n-1)`, `P_b = 0`: the classic saturation model.
    Classic,
}

impl ModelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::BusyAware => "busy_aware",
            ModelMode::Classic => "classic",
        }
    }
}

impl std::str::FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "busy_aware" => Ok(ModelMode::BusyAware),
            "classic" => Ok(ModelMode::Classic),
            _ => Err(format!("unknown model mode `{s}` (expected busy_aware or classic)")),
        }
    }
}

/// Backoff-stage structure: maximum stage `m` and stage-0 window `W_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainGeometry {
    max_stage: u32,
    w0: u64,
}

impl ChainGeometry {
    pub fn new(max_stage: u32, w0: u64) -> Result<Self, MarkovError> {
        if w0 < 2 {
            return Err(MarkovError::Geometry("W_0 must be at least 2"));
        }
        if max_stage > MAX_BACKOFF_STAGE {
            return Err(MarkovError::Geometry("maximum stage too large"));
        }
        if w0.checked_shl(max_stage + 1).is_none_or(|w| w >> (max_stage + 1) != w0) {
            return Err(MarkovError::Geometry("stage window overflows"));
        }
        Ok(Self { max_stage, w0 })
    }

    pub fn max_stage(&self) -> u32 {
        self.max_stage
    }

    pub fn w0(&self) -> u64 {
        self.w0
    }

    /// `W_stage = 2^stage * W_0`.
    pub fn window_size(&self, stage: u32) -> Result<u64, MarkovError> {
        if stage > self.max_stage {
            return Err(MarkovError::StageOutOfRange {
                stage,
                max_stage: self.max_stage,
            });
        }
        Ok(self.w0 << stage)
    }

    fn window(&self, stage: u32) -> u64 {
        debug_assert!(stage <= self.max_stage);
        self.w0 << stage
    }

    /// Total number of `(stage, counter)` states.
    pub fn state_count(&self) -> usize {
        (0..=self.max_stage).map(|i| self.window(i) as usize).sum()
    }
}

pub fn window_size(g: &ChainGeometry, stage: u32) -> Result<u64, MarkovError> {
    g.window_size(stage)
}

/// Coupling probabilities fed into the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainInputs {
    pub p_c: f64,
    pub p_b: f64,
}

impl ChainInputs {
    pub fn new(p_c: f64, p_b: f64) -> Result<Self, MarkovError> {
        if !(0.0..1.0).contains(&p_c) {
            return Err(MarkovError::Inputs("P_c must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&p_b) {
            return Err(MarkovError::Inputs("P_b must lie in [0, 1)"));
        }
        Ok(Self { p_c, p_b })
    }
}

/// Relative weight `c_i` of stage `i`'s head state, `b_{i,0} = c_i * b_{0,0}`.
fn stage_weight(inputs: &ChainInputs, g: &ChainGeometry, stage: u32) -> f64 {
    let m = g.max_stage;
    if m == 0 {
        1.0
    } else if stage < m {
        inputs.p_c.powi(stage as i32)
    } else {
        inputs.p_c.powi(m as i32) / (1.0 - inputs.p_c)
    }
}

/// Counter profile within a stage: `b_{i,k} / b_{i,0}`.
fn counter_profile(inputs: &ChainInputs, w: u64, k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        let w = w as f64;
        (1.0 - k as f64 / w) / (1.0 - inputs.p_b / w)
    }
}

/// `b_{0,0}` from the normalization `Σ_{i,k} b_{i,k} = 1`.
pub fn stationary_b00(inputs: &ChainInputs, g: &ChainGeometry) -> f64 {
    // Σ_{k=1}^{W-1} (1 - k/W) = (W - 1) / 2.
    let total: f64 = (0..=g.max_stage)
        .map(|i| {
            let w = g.window(i) as f64;
            let stage_mass = 1.0 + (w - 1.0) / (2.0 * (1.0 - inputs.p_b / w));
            stage_weight(inputs, g, i) * stage_mass
        })
        .sum();
    1.0 / total
}

/// Stationary probabilities `b_{i,k}` indexed by stage then counter.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    geometry: ChainGeometry,
    stages: Vec<Vec<f64>>,
}

impl StationaryDistribution {
    /// Build from a flat vector in the canonical state order
    /// (stage-major, counter ascending).
    pub fn from_flat(geometry: ChainGeometry, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), geometry.state_count());
        let mut offset = 0;
        let stages = (0..=geometry.max_stage)
            .map(|i| {
                let w = geometry.window(i) as usize;
                let stage = flat[offset..offset + w].to_vec();
                offset += w;
                stage
            })
            .collect();
        Self { geometry, stages }
    }

    pub fn geometry(&self) -> &ChainGeometry {
        &self.geometry
    }

    /// `b_{stage,counter}`; `None` outside the chain.
    pub fn get(&self, stage: u32, counter: u64) -> Option<f64> {
        self.stages
            .get(stage as usize)
            .and_then(|s| s.get(counter as usize))
            .copied()
    }

    pub fn stage(&self, stage: u32) -> &[f64] {
        &self.stages[stage as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64, f64)> + '_ {
        self.stages.iter().enumerate().flat_map(|(i, s)| {
            s.iter()
                .enumerate()
                .map(move |(k, &p)| (i as u32, k as u64, p))
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.stages.iter().flatten().copied().collect()
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().flatten().sum()
    }

    /// L∞ distance to another distribution over the same chain.
    pub fn max_abs_diff(&self, other: &StationaryDistribution) -> f64 {
        assert_eq!(self.geometry, other.geometry);
        self.iter()
            .zip(other.iter())
            .map(|((_, _, a), (_, _, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn stationary_distribution(inputs: &ChainInputs, g: &ChainGeometry) -> StationaryDistribution {
    let b00 = stationary_b00(inputs, g);
    let stages = (0..=g.max_stage)
        .map(|i| {
            let w = g.window(i);
            let head = stage_weight(inputs, g, i) * b00;
            (0..w).map(|k| head * counter_profile(inputs, w, k)).collect()
        })
        .collect();
    StationaryDistribution {
        geometry: *g,
        stages,
    }
}

/// `τ = Σ_i b_{i,0}`: a station transmits whenever its counter is zero.
pub fn tau_from_distribution(d: &StationaryDistribution) -> f64 {
    d.stages.iter().map(|s| s[0]).sum()
}

/// Probability that at least one of the other `n - 1` stations transmits.
fn others_transmit(tau: f64, n: u32) -> f64 {
    if n <= 1 {
        0.0
    } else {
        1.0 - (1.0 - tau).powi(n as i32 - 1)
    }
}

pub fn couple(tau: f64, n: u32, mode: ModelMode) -> ChainInputs {
    let p = others_transmit(tau, n);
    match mode {
        ModelMode::BusyAware => ChainInputs { p_c: p, p_b: p },
        ModelMode::Classic => ChainInputs { p_c: p, p_b: 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointSolution {
    pub tau: f64,
    pub p_c: f64,
    pub p_b: f64,
    pub b00: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// One evaluation of the chain map `τ ↦ Σ_i b_{i,0}` at the coupling implied by `τ`.
fn chain_map(tau: f64, n: u32, g: &ChainGeometry, mode: ModelMode) -> (f64, ChainInputs, f64) {
    let inputs = couple(tau, n, mode);
    let d = stationary_distribution(&inputs, g);
    let b00 = d.stages[0][0];
    (tau_from_distribution(&d), inputs, b00)
}

/// Solve `τ = F(couple(τ, n))` by averaged iteration starting from `2 / (W_0 + 1)`.
pub fn solve_fixed_point(
    n: u32,
    g: &ChainGeometry,
    mode: ModelMode,
    opts: &SolverOptions,
) -> Result<FixedPointSolution, MarkovError> {
    if n < 1 {
        return Err(MarkovError::Inputs("at least one station is required"));
    }
    let mut tau = 2.0 / (g.w0 as f64 + 1.0);
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let (next, inputs, b00) = chain_map(tau, n, g, mode);
        residual = (next - tau).abs();
        // Coupling that rounds to 1 leaves the chain undefined.
        if !residual.is_finite() {
            return Err(MarkovError::NonConvergence {
                iterations: iter,
                tau,
                residual,
            });
        }
        if residual < opts.tol {
            return Ok(FixedPointSolution {
                tau: next,
                p_c: inputs.p_c,
                p_b: inputs.p_b,
                b00,
                iterations: iter,
                residual,
            });
        }
        tau = 0.5 * (tau + next);
    }
    Err(MarkovError::NonConvergence {
        iterations: opts.max_iter,
        tau,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(m: u32, w0: u64) -> ChainGeometry {
        ChainGeometry::new(m, w0).unwrap()
    }

    #[test]
    fn window_sizes() {
        let g = geom(5, 8);
        assert_eq!(window_size(&g, 0).unwrap(), 8);
        assert_eq!(window_size(&g, 2).unwrap(), 32);
        assert_eq!(window_size(&g, 5).unwrap(), 256);
        assert_eq!(
            window_size(&g, 6),
            Err(MarkovError::StageOutOfRange {
                stage: 6,
                max_stage: 5
            })
        );
        assert_eq!(g.state_count(), 8 * 63);
    }

    #[test]
    fn geometry_and_input_validation() {
        assert!(ChainGeometry::new(3, 1).is_err());
        assert!(ChainGeometry::new(MAX_BACKOFF_STAGE + 1, 8).is_err());
        assert!(ChainInputs::new(1.0, 0.0).is_err());
        assert!(ChainInputs::new(0.0, 1.0).is_err());
        assert!(ChainInputs::new(-0.1, 0.0).is_err());
        assert!(ChainInputs::new(0.99, 0.5).is_ok());
    }

    #[test]
    fn zero_coupling_collapses_to_stage_zero() {
        let g = geom(5, 8);
        let inputs = ChainInputs::new(0.0, 0.0).unwrap();
        let b00 = stationary_b00(&inputs, &g);
        assert!((b00 - 2.0 / 9.0).abs() < 1e-15);

        let d = stationary_distribution(&inputs, &g);
        for (i, _, p) in d.iter() {
            if i >= 1 {
                assert_eq!(p, 0.0);
            }
        }
        assert!((tau_from_distribution(&d) - 2.0 / 9.0).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_collisions_leave_retry_stages_empty_for_any_busy_probability() {
        let g = geom(3, 4);
        for p_b in [0.0, 0.3, 0.9] {
            let d = stationary_distribution(&ChainInputs::new(0.0, p_b).unwrap(), &g);
            assert!(d.iter().filter(|(i, _, _)| *i > 0).all(|(_, _, p)| p == 0.0));
        }
    }

    #[test]
    fn single_stage_chain() {
        let g = geom(0, 8);
        let inputs = ChainInputs::new(0.4, 0.3).unwrap();
        let d = stationary_distribution(&inputs, &g);
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert_eq!(tau_from_distribution(&d), d.get(0, 0).unwrap());
    }

    /// Two stages, W_0 = 2, P_c = 1/2, P_b = 0; states
    /// (0,0) (0,1) (1,0) (1,1) (1,2) (1,3). Balance equations give
    /// b00 : b01 : b10 : b11 : b12 : b13 = 1 : 1/2 : 1 : 3/4 : 1/2 : 1/4,
    /// so b00 = 1/4.
    #[test]
    fn two_stage_hand_solution() {
        let g = geom(1, 2);
        let d = stationary_distribution(&ChainInputs::new(0.5, 0.0).unwrap(), &g);
        let expected = [0.25, 0.125, 0.25, 0.1875, 0.125, 0.0625];
        for (got, want) in d.to_flat().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn coupling() {
        for mode in [ModelMode::BusyAware, ModelMode::Classic] {
            assert_eq!(couple(0.37, 1, mode), ChainInputs { p_c: 0.0, p_b: 0.0 });
        }
        assert_eq!(
            couple(0.5, 2, ModelMode::BusyAware),
            ChainInputs { p_c: 0.5, p_b: 0.5 }
        );
        let c = couple(0.1, 11, ModelMode::Classic);
        assert!((c.p_c - 0.651_321_559_9).abs() < 1e-9);
        assert_eq!(c.p_b, 0.0);
    }

    #[test]
    fn single_station_fixed_point() {
        let g = geom(5, 8);
        for mode in [ModelMode::BusyAware, ModelMode::Classic] {
            let s = solve_fixed_point(1, &g, mode, &SolverOptions::default()).unwrap();
            assert!((s.tau - 2.0 / 9.0).abs() < 1e-12);
            assert_eq!(s.p_c, 0.0);
            assert_eq!(s.p_b, 0.0);
            assert_eq!(s.iterations, 1);
        }
    }

    #[test]
    fn fixed_point_satisfies_its_own_equation() {
        let g = geom(5, 8);
        for mode in [ModelMode::BusyAware, ModelMode::Classic] {
            for n in [2, 10, 50, 100] {
                let s = solve_fixed_point(n, &g, mode, &SolverOptions::default()).unwrap();
                let (again, _, _) = chain_map(s.tau, n, &g, mode);
                assert!((again - s.tau).abs() < 1e-9, "n={n} {mode:?}");
                assert!(s.residual < 1e-10);
                assert!(s.tau > 0.0 && s.tau <= 1.0);
            }
        }
    }

    #[test]
    fn more_stations_transmit_less() {
        let g = geom(5, 8);
        let opts = SolverOptions::default();
        let t10 = solve_fixed_point(10, &g, ModelMode::BusyAware, &opts).unwrap().tau;
        let t50 = solve_fixed_point(50, &g, ModelMode::BusyAware, &opts).unwrap().tau;
        assert!(t10 > t50);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = geom(5, 8);
        let opts = SolverOptions {
            tol: 1e-10,
            max_iter: 2,
        };
        match solve_fixed_point(50, &g, ModelMode::Classic, &opts) {
            Err(MarkovError::NonConvergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-10);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(solve_fixed_point(0, &g, ModelMode::Classic, &opts).is_err());
    }

    #[test]
    fn solver_is_deterministic() {
        let g = geom(5, 8);
        let a = solve_fixed_point(37, &g, ModelMode::BusyAware, &SolverOptions::default()).unwrap();
        let b = solve_fixed_point(37, &g, ModelMode::BusyAware, &SolverOptions::default()).unwrap();
        assert_eq!(a.tau.to_bits(), b.tau.to_bits());
        assert_eq!(a, b);
    }
}
