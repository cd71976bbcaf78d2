//! Frobenius-norm NMF at a fixed inner dimension.
//!
//! The solver alternates exact column-wise coordinate descent on W and H
//! (the fast HALS scheme): with the Gram matrices `B = HH'` and `D = W'W`
//! precomputed once per sweep, each basis column is replaced by the exact
//! nonnegative minimizer of the objective with every other column held
//! fixed,
//!
//! ```text
//! w_j <- max(0, w_j + ((XH')_:j - W B_:j) / B_jj)
//! h_j <- max(0, h_j + ((W'X)_j: - D_j: H) / D_jj)
//! ```
//!
//! so the objective is non-increasing by construction and both factors stay
//! nonnegative. The epsilon floor guards the `B_jj`/`D_jj` denominators when
//! a column dies.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, NonNegMatrix};
use crate::rng::RngSeed;

/// Optimizer hyperparameters for a single factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfConfig {
    /// Hard iteration cap.
    pub max_iterations: usize,
    /// Stop when the relative change of the objective falls below this.
    pub convergence_tol: f64,
    /// Small positive value added to update-rule denominators.
    pub epsilon_floor: f64,
    /// Seed for the random factor initialization.
    pub seed: RngSeed,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            max_iterations: 1000,
            convergence_tol: 1e-6,
            epsilon_floor: 1e-9,
            seed: RngSeed::new(0),
        }
    }
}

impl NmfConfig {
    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig { reason: "max_iterations must be >= 1".into() });
        }
        if self.convergence_tol < 0.0 {
            return Err(Error::InvalidConfig { reason: "convergence_tol must be >= 0".into() });
        }
        if self.epsilon_floor <= 0.0 {
            return Err(Error::InvalidConfig { reason: "epsilon_floor must be > 0".into() });
        }
        Ok(())
    }
}

/// A factorization result: `X ~ W H` with the achieved relative error.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub w: NonNegMatrix,
    pub h: NonNegMatrix,
    /// `|X - WH| / |X|` (Frobenius), recomputed from the final factors.
    pub relative_error: f64,
    pub iterations_used: usize,
}

/// Relative Frobenius reconstruction error `|X - WH| / |X|`.
pub fn relative_error(x: &NonNegMatrix, w: &NonNegMatrix, h: &NonNegMatrix) -> Result<f64> {
    if w.rows() != x.rows() || h.cols() != x.cols() || w.cols() != h.rows() {
        return Err(Error::InvalidConfig {
            reason: format!(
                "factor shapes {}x{} * {}x{} do not reconstruct {}x{}",
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols(),
                x.rows(),
                x.cols()
            ),
        });
    }
    let norm_x = x.frobenius_norm();
    if norm_x == 0.0 {
        return Err(Error::ZeroData);
    }
    let wh = w.as_array().dot(h.as_array());
    let resid = x.as_array() - &wh;
    Ok(frobenius_norm(&resid) / norm_x)
}

/// Factorizes `x` at rank `k` from a seeded uniform initialization.
pub fn nmf_factorize(x: &NonNegMatrix, k: usize, cfg: &NmfConfig) -> Result<FactorPair> {
    let (w0, h0) = initial_factors(x.rows(), x.cols(), k, cfg);
    nmf_factorize_from(x, k, cfg, w0, h0).map(|(pair, _)| pair)
}

/// As [`nmf_factorize`], but also returns the per-iteration relative-error
/// trajectory (initial value first).
pub fn nmf_factorize_traced(
    x: &NonNegMatrix,
    k: usize,
    cfg: &NmfConfig,
) -> Result<(FactorPair, Vec<f64>)> {
    let (w0, h0) = initial_factors(x.rows(), x.cols(), k, cfg);
    nmf_factorize_from(x, k, cfg, w0, h0)
}

/// Seeded uniform factor initialization in `[epsilon_floor, 1)`.
pub fn initial_factors(
    rows: usize,
    cols: usize,
    k: usize,
    cfg: &NmfConfig,
) -> (Array2<f64>, Array2<f64>) {
    let mut rng = cfg.seed.rng();
    let lo = cfg.epsilon_floor;
    let w = Array2::from_shape_simple_fn((rows, k), || rng.random_range(lo..1.0));
    let h = Array2::from_shape_simple_fn((k, cols), || rng.random_range(lo..1.0));
    (w, h)
}

/// Runs the multiplicative updates from explicit starting factors.
///
/// Exposed so callers can study update trajectories under controlled
/// initializations; `nmf_factorize` is the usual entry point.
pub fn nmf_factorize_from(
    x: &NonNegMatrix,
    k: usize,
    cfg: &NmfConfig,
    w0: Array2<f64>,
    h0: Array2<f64>,
) -> Result<(FactorPair, Vec<f64>)> {
    cfg.validate()?;
    let max_rank = x.rows().min(x.cols());
    if k == 0 || k > max_rank {
        return Err(Error::RankTooLarge { k, max: max_rank });
    }
    if w0.dim() != (x.rows(), k) || h0.dim() != (k, x.cols()) {
        return Err(Error::InvalidConfig { reason: "initial factor shapes do not match".into() });
    }
    let xa = x.as_array();
    let norm_x = x.frobenius_norm();
    if norm_x == 0.0 {
        return Err(Error::DegenerateInput);
    }

    let eps = cfg.epsilon_floor;
    let mut w = w0;
    let mut h = h0;

    let rel_err = |w: &Array2<f64>, h: &Array2<f64>| -> f64 {
        let wh = w.dot(h);
        let resid = xa - &wh;
        frobenius_norm(&resid) / norm_x
    };

    let mut trace = Vec::with_capacity(cfg.max_iterations + 1);
    let mut prev = rel_err(&w, &h);
    trace.push(prev);
    let mut iterations_used = 0;

    for iter in 1..=cfg.max_iterations {
        // sweep W: exact nonnegative coordinate minimum per column
        let a = xa.dot(&h.t()); // m x k
        let b = h.dot(&h.t()); // k x k Gram
        for j in 0..k {
            let denom = b[(j, j)].max(eps);
            let correction: Array1<f64> = w.dot(&b.column(j));
            let mut col = w.column_mut(j);
            for (i, c) in col.iter_mut().enumerate() {
                *c = (*c + (a[(i, j)] - correction[i]) / denom).max(0.0);
            }
        }

        // sweep H symmetrically, row by row
        let c = w.t().dot(xa); // k x n
        let d = w.t().dot(&w); // k x k Gram
        for j in 0..k {
            let denom = d[(j, j)].max(eps);
            let correction: Array1<f64> = d.row(j).dot(&h);
            let mut row = h.row_mut(j);
            for (i, hv) in row.iter_mut().enumerate() {
                *hv = (*hv + (c[(j, i)] - correction[i]) / denom).max(0.0);
            }
        }

        let cur = rel_err(&w, &h);
        trace.push(cur);
        iterations_used = iter;
        let change = (prev - cur).abs() / prev.max(f64::MIN_POSITIVE);
        prev = cur;
        if change < cfg.convergence_tol {
            break;
        }
    }

    let pair = FactorPair {
        w: NonNegMatrix::from_array(w)?,
        h: NonNegMatrix::from_array(h)?,
        relative_error: prev,
        iterations_used,
    };
    Ok((pair, trace))
}
