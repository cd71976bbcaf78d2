//! The resampled-ensemble scan: per-K model-quality statistics.
//!
//! For every candidate inner dimension K in the configured range the scan
//! draws an ensemble of multiplicative resamples of the data, factorizes
//! each member, pools the basis columns, clusters them with
//! [`crate::cluster::balanced_cluster`], and records the silhouette pair
//! together with an AIC value computed from the ensemble-mean relative
//! reconstruction error.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{balanced_cluster, silhouettes};
use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;
use crate::nmf::{nmf_factorize, FactorPair, NmfConfig};
use crate::rng::RngSeed;

/// Relative errors are clamped to this floor before the AIC logarithm so
/// exact reconstructions stay finite.
pub const REL_ERR_FLOOR: f64 = 1e-15;

/// Configuration of a scan over candidate K values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Number of resampled ensemble members per K (at least 2).
    pub ensemble_size: usize,
    /// Half-width of the uniform multiplicative perturbation, in `[0, 1)`.
    pub resample_noise: f64,
    pub nmf: NmfConfig,
    pub cluster_max_iter: usize,
    pub seed: RngSeed,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            k_min: 1,
            k_max: 10,
            ensemble_size: 32,
            resample_noise: 0.03,
            nmf: NmfConfig::default(),
            cluster_max_iter: 100,
            seed: RngSeed::new(0),
        }
    }
}

impl ScanConfig {
    fn validate(&self, x: &NonNegMatrix) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig {
                reason: format!("invalid k range [{}, {}]", self.k_min, self.k_max),
            });
        }
        let max_rank = x.rows().min(x.cols());
        if self.k_max > max_rank {
            return Err(Error::InvalidConfig {
                reason: format!("k_max {} exceeds the smaller matrix dimension {max_rank}", self.k_max),
            });
        }
        if self.ensemble_size < 2 {
            return Err(Error::InvalidConfig {
                reason: "ensemble_size must be at least 2".into(),
            });
        }
        if !(0.0..1.0).contains(&self.resample_noise) {
            return Err(Error::InvalidConfig {
                reason: format!("resample_noise {} outside [0, 1)", self.resample_noise),
            });
        }
        Ok(())
    }
}

/// Per-K statistics emitted by [`scan`]: the triple fed to the classifier
/// plus the ensemble-mean relative error it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScanRecord {
    pub k: usize,
    pub aic: f64,
    pub min_silhouette: f64,
    pub avg_silhouette: f64,
    pub mean_relative_error: f64,
}

/// Multiplicative uniform resampling: `X .* U` with `U` elementwise uniform
/// in `[1 - noise, 1 + noise)`, so the expectation equals `X`.
pub fn resample(x: &NonNegMatrix, noise: f64, seed: RngSeed) -> NonNegMatrix {
    let factors = NonNegMatrix::uniform(x.rows(), x.cols(), 1.0 - noise, 1.0 + noise, seed);
    let perturbed = x.as_array() * factors.as_array();
    NonNegMatrix::from_array(perturbed).expect("product of finite nonnegative matrices")
}

/// Akaike information criterion: `2K + N_t * ln(rel_err / N_t)`.
///
/// `rel_err` must be positive; callers clamp to [`REL_ERR_FLOOR`] first.
pub fn aic(k: usize, n_elements: usize, rel_err: f64) -> Result<f64> {
    if rel_err <= 0.0 {
        return Err(Error::NonPositiveError { value: rel_err });
    }
    let n = n_elements as f64;
    Ok(2.0 * k as f64 + n * (rel_err / n).ln())
}

/// Runs the full ensemble scan and returns one record per K, ascending.
///
/// The `ensemble_size x (k_max - k_min + 1)` factorizations are independent
/// and run in parallel; per-member seeds are derived from `(seed, k, member)`
/// so results do not depend on scheduling.
pub fn scan(x: &NonNegMatrix, cfg: &ScanConfig) -> Result<Vec<KScanRecord>> {
    cfg.validate(x)?;
    let r = cfg.ensemble_size;
    let ks: Vec<usize> = (cfg.k_min..=cfg.k_max).collect();

    let jobs: Vec<(usize, usize)> =
        ks.iter().flat_map(|&k| (0..r).map(move |member| (k, member))).collect();
    let factorized: Vec<Result<FactorPair>> = jobs
        .par_iter()
        .map(|&(k, member)| {
            let per_k = cfg.seed.derive(k as u64);
            let xi = resample(x, cfg.resample_noise, per_k.derive(1 + member as u64));
            // one shared initialization per K: members then differ only by
            // their resampling noise, which is the stability being measured
            let nmf_cfg = cfg.nmf.with_seed(per_k.derive(0));
            nmf_factorize(&xi, k, &nmf_cfg)
        })
        .collect();

    let n_elements = x.n_elements();
    let mut records = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let mut members = Vec::with_capacity(r);
        let mut err_sum = 0.0;
        for member in 0..r {
            match &factorized[ki * r + member] {
                Ok(pair) => {
                    let w = &pair.w;
                    let columns: Vec<Vec<f64>> =
                        (0..w.cols()).map(|j| w.column(j).to_vec()).collect();
                    members.push(columns);
                    err_sum += pair.relative_error;
                }
                Err(e) => {
                    return Err(Error::ScanAtK { k, source: Box::new(clone_error(e)) });
                }
            }
        }
        let mean_err = err_sum / r as f64;
        let assignment = balanced_cluster(&members, cfg.cluster_max_iter)
            .map_err(|e| Error::ScanAtK { k, source: Box::new(e) })?;
        let (min_s, avg_s) = silhouettes(&assignment);
        let aic_value = aic(k, n_elements, mean_err.max(REL_ERR_FLOOR))
            .map_err(|e| Error::ScanAtK { k, source: Box::new(e) })?;
        records.push(KScanRecord {
            k,
            aic: aic_value,
            min_silhouette: min_s,
            avg_silhouette: avg_s,
            mean_relative_error: mean_err,
        });
    }
    Ok(records)
}

// Error is not Clone (io::Error inside); rebuild the few variants a
// factorization can produce.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::RankTooLarge { k, max } => Error::RankTooLarge { k: *k, max: *max },
        Error::DegenerateInput => Error::DegenerateInput,
        Error::ZeroData => Error::ZeroData,
        other => Error::InvalidConfig { reason: other.to_string() },
    }
}

/// Writes scan records as JSON lines, one object per K.
pub fn write_records(path: impl AsRef<Path>, records: &[KScanRecord]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// Reads scan records from a JSON-lines file.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<KScanRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: KScanRecord =
            serde_json::from_str(&line).map_err(|e| Error::FileFormat {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", idx + 1),
            })?;
        records.push(record);
    }
    Ok(records)
}
