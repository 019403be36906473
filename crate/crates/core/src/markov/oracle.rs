//! Explicit transition matrix of the backoff chain and a power-iteration
//! stationary solver. Used to cross-check the closed-form distribution.
//!
//! Transitions out of state `(i, k)`:
//!
//! * `k >= 1`: freeze `(i,k) -> (i,k)` with probability `P_b / W_i`,
//!   otherwise count down to `(i, k-1)`.
//! * `k = 0`: success with probability `1 - P_c`, re-entering stage 0
//!   uniformly (`(1 - P_c) / W_0` per counter); collision with probability
//!   `P_c`, entering stage `min(i + 1, m)` uniformly (`P_c / W_{i+1}` per counter).

use super::{ChainGeometry, ChainInputs, MarkovError, StationaryDistribution};

/// Sparse row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl StochasticMatrix {
    /// Rows of `(column, probability)` entries. Duplicate columns add up.
    ///
    /// Panics if a row does not sum to one within 1e-12.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        for (r, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            assert!(
                (sum - 1.0).abs() <= 1e-12,
                "row {r} sums to {sum}, not 1"
            );
            assert!(row.iter().all(|&(c, p)| c < n && p >= 0.0));
        }
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    /// Probability of the `from -> to` transition.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.rows[from]
            .iter()
            .filter(|&&(c, _)| c == to)
            .map(|&(_, p)| p)
            .sum()
    }

    /// `out = v P`.
    pub fn left_multiply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let mass = v[r];
            if mass == 0.0 {
                continue;
            }
            for &(c, p) in row {
                out[c] += mass * p;
            }
        }
    }
}

/// Transition matrix over the chain states, in stage-major order.
#[derive(Debug, Clone)]
pub struct ChainMatrix {
    pub geometry: ChainGeometry,
    pub matrix: StochasticMatrix,
}

impl ChainMatrix {
    /// Flat index of state `(stage, counter)`.
    pub fn index(&self, stage: u32, counter: u64) -> usize {
        state_offset(&self.geometry, stage) + counter as usize
    }
}

fn state_offset(g: &ChainGeometry, stage: u32) -> usize {
    (0..stage).map(|i| g.window(i) as usize).sum()
}

pub fn build_transition_matrix(inputs: &ChainInputs, g: &ChainGeometry) -> ChainMatrix {
    let m = g.max_stage();
    let w0 = g.window(0);
    let mut rows = Vec::with_capacity(g.state_count());
    for i in 0..=m {
        let w = g.window(i);
        let next = (i + 1).min(m);
        let wn = g.window(next);
        let next_offset = state_offset(g, next);
        for k in 0..w {
            let here = state_offset(g, i) + k as usize;
            let mut row = Vec::new();
            if k == 0 {
                let p_success = (1.0 - inputs.p_c) / w0 as f64;
                row.extend((0..w0 as usize).map(|c| (c, p_success)));
                if inputs.p_c > 0.0 {
                    let p_collision = inputs.p_c / wn as f64;
                    row.extend((0..wn as usize).map(|c| (next_offset + c, p_collision)));
                }
            } else {
                let freeze = inputs.p_b / w as f64;
                if freeze > 0.0 {
                    row.push((here, freeze));
                }
                row.push((here - 1, 1.0 - freeze));
            }
            rows.push(row);
        }
    }
    ChainMatrix {
        geometry: *g,
        matrix: StochasticMatrix::from_rows(rows),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Stop once `‖vP − v‖∞` falls to this level.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_iter: 5_000_000,
        }
    }
}

/// Left stationary vector by power iteration from the uniform vector.
pub fn power_iteration(
    matrix: &StochasticMatrix,
    opts: &OracleOptions,
) -> Result<Vec<f64>, MarkovError> {
    let n = matrix.dim();
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        matrix.left_multiply(&v, &mut next);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        residual = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if residual <= opts.tol {
            return Ok(v);
        }
    }
    Err(MarkovError::OracleNonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

pub fn oracle_stationary(
    chain: &ChainMatrix,
    opts: &OracleOptions,
) -> Result<StationaryDistribution, MarkovError> {
    let v = power_iteration(&chain.matrix, opts)?;
    Ok(StationaryDistribution::from_flat(chain.geometry, &v))
}

/// `‖vP − v‖∞`.
pub fn stationarity_residual(matrix: &StochasticMatrix, v: &[f64]) -> f64 {
    let mut out = vec![0.0; v.len()];
    matrix.left_multiply(v, &mut out);
    out.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::stationary_distribution;

    #[test]
    fn symmetric_two_state_chain_is_uniform() {
        let p = StochasticMatrix::from_rows(vec![
            vec![(0, 0.3), (1, 0.7)],
            vec![(0, 0.7), (1, 0.3)],
        ]);
        let v = power_iteration(&p, &OracleOptions::default()).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "sums to")]
    fn non_stochastic_row_panics() {
        StochasticMatrix::from_rows(vec![vec![(0, 0.5)]]);
    }

    #[test]
    fn rows_are_stochastic() {
        for (m, w0) in [(1, 2), (2, 4), (5, 8), (0, 3)] {
            let g = ChainGeometry::new(m, w0).unwrap();
            for (p_c, p_b) in [(0.0, 0.0), (0.3, 0.2), (0.9, 0.9)] {
                let chain = build_transition_matrix(&ChainInputs::new(p_c, p_b).unwrap(), &g);
                assert_eq!(chain.matrix.dim(), g.state_count());
                for r in 0..chain.matrix.dim() {
                    let s: f64 = chain.matrix.row(r).iter().map(|e| e.1).sum();
                    assert!((s - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_freeze_loops_without_busy_probability() {
        let g = ChainGeometry::new(2, 4).unwrap();
        let chain = build_transition_matrix(&ChainInputs::new(0.4, 0.0).unwrap(), &g);
        for i in 0..=2 {
            for k in 1..g.window(i) {
                let s = chain.index(i, k);
                assert_eq!(chain.matrix.entry(s, s), 0.0);
            }
        }
    }

    #[test]
    fn six_state_chain_matches_closed_form() {
        let g = ChainGeometry::new(1, 2).unwrap();
        let inputs = ChainInputs::new(0.2, 0.1).unwrap();
        let chain = build_transition_matrix(&inputs, &g);
        assert_eq!(chain.matrix.dim(), 6);
        // Freeze self-loop on (1,3): P_b / W_1.
        let s = chain.index(1, 3);
        assert!((chain.matrix.entry(s, s) - 0.1 / 4.0).abs() < 1e-15);

        let oracle = oracle_stationary(&chain, &OracleOptions::default()).unwrap();
        let closed = stationary_distribution(&inputs, &g);
        assert!(oracle.max_abs_diff(&closed) <= 1e-12);
        assert!(stationarity_residual(&chain.matrix, &oracle.to_flat()) <= 1e-12);
    }
}
