//! Scalar vector statistics: Pearson correlation and cosine distance.

use crate::error::{Error, Result};

/// Sample Pearson correlation coefficient of two equal-length vectors.
///
/// Returns [`Error::ConstantVector`] when either input has zero variance,
/// since the coefficient is undefined there.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    if u.len() < 2 {
        return Err(Error::VectorTooShort { min: 2, len: u.len() });
    }
    let n = u.len() as f64;
    let mean_u = u.iter().sum::<f64>() / n;
    let mean_v = v.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_u = 0.0;
    let mut var_v = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        let da = a - mean_u;
        let db = b - mean_v;
        cov += da * db;
        var_u += da * da;
        var_v += db * db;
    }
    if var_u == 0.0 || var_v == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((cov / (var_u * var_v).sqrt()).clamp(-1.0, 1.0))
}

/// Cosine distance `1 - u.v / (|u||v|)` between two nonnegative vectors.
///
/// For nonnegative inputs the result lies in `[0, 1]`; it is clamped there to
/// absorb roundoff. Zero-norm inputs are an error: a zero column signals a
/// degenerate factorization the caller must see.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 1.0))
}
