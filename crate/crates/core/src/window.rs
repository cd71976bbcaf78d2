//! Sliding 7-K windows of scan statistics: the classifier's feature space.
//!
//! A window covers 7 consecutive K values and carries 21 features: per
//! position, the window-normalized AIC and the two silhouette values. Labels
//! encode where the true K sits relative to the window origin (0 = at or
//! left of the origin, 6 = at or beyond the right edge, 1..5 = that many
//! positions right of the origin).

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::scan::KScanRecord;

/// Number of consecutive K values per window.
pub const WINDOW_WIDTH: usize = 7;
/// Statistics per window position: normalized AIC, min and mean silhouette.
pub const FEATURES_PER_POSITION: usize = 3;
/// Total feature-vector length.
pub const FEATURE_LEN: usize = WINDOW_WIDTH * FEATURES_PER_POSITION;
/// Number of window classes.
pub const N_CLASSES: usize = 7;

/// Tag identifying the feature layout and AIC normalization baked into this
/// module; stored in trained models so inference can refuse incompatible
/// pipelines.
pub const FEATURE_NORMALIZATION_TAG: &str = "window7-aic-minmax-v1";

/// One window sample: features plus the class label when the true K is
/// known (training) or `None` at inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub origin_k: usize,
    pub features: [f64; FEATURE_LEN],
    pub label: Option<u8>,
}

/// Class label for a window starting at `k_origin` when the true value is
/// `k_true`: clamped offset `k_true - k_origin` into `0..=6`.
pub fn window_label(k_true: usize, k_origin: usize) -> u8 {
    if k_true <= k_origin {
        0
    } else if k_true - k_origin >= 6 {
        6
    } else {
        (k_true - k_origin) as u8
    }
}

/// Slides a 7-wide window over the scan records and builds one unlabeled
/// sample per origin.
///
/// AIC values are min-max normalized within each window to `[0, 1]` (their
/// raw scale grows with the matrix size, so only the within-window shape is
/// transferable); a constant-AIC window maps to all 0.5. Silhouettes pass
/// through unchanged. Features are laid out position-major, ascending K.
pub fn extract_windows(records: &[KScanRecord]) -> Result<Vec<WindowSample>> {
    if records.len() < WINDOW_WIDTH {
        return Err(Error::TooFewRecords { len: records.len() });
    }
    for (i, pair) in records.windows(2).enumerate() {
        if pair[1].k != pair[0].k + 1 {
            return Err(Error::NonConsecutiveRecords { position: i + 1 });
        }
    }
    let mut samples = Vec::with_capacity(records.len() - WINDOW_WIDTH + 1);
    for window in records.windows(WINDOW_WIDTH) {
        let lo = window.iter().map(|r| r.aic).fold(f64::INFINITY, f64::min);
        let hi = window.iter().map(|r| r.aic).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let degenerate = range <= 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        let mut features = [0.0f64; FEATURE_LEN];
        for (pos, record) in window.iter().enumerate() {
            features[pos * FEATURES_PER_POSITION] =
                if degenerate { 0.5 } else { (record.aic - lo) / range };
            features[pos * FEATURES_PER_POSITION + 1] = record.min_silhouette;
            features[pos * FEATURES_PER_POSITION + 2] = record.avg_silhouette;
        }
        samples.push(WindowSample { origin_k: window[0].k, features, label: None });
    }
    Ok(samples)
}

/// Builds the labeled training set from per-matrix scans with known `k_true`,
/// in deterministic (corpus index, origin) order.
pub fn build_training_set(scans: &[(usize, Vec<KScanRecord>)]) -> Result<Vec<WindowSample>> {
    let mut samples = Vec::new();
    for (index, (k_true, records)) in scans.iter().enumerate() {
        let windows = extract_windows(records)
            .map_err(|e| Error::CorpusAtIndex { index, source: Box::new(e) })?;
        samples.extend(windows.into_iter().map(|mut sample| {
            sample.label = Some(window_label(*k_true, sample.origin_k));
            sample
        }));
    }
    Ok(samples)
}

/// Deterministic matrix-level split: returns `(train, validation)` index
/// sets. Splitting at matrix granularity keeps all windows of one scan on
/// the same side, so no information leaks between the two sets.
pub fn validation_split(
    n_matrices: usize,
    val_fraction: f64,
    seed: RngSeed,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n_matrices).collect();
    indices.shuffle(&mut seed.rng());
    let n_val = ((n_matrices as f64) * val_fraction).round() as usize;
    let n_val = n_val.min(n_matrices);
    let validation: Vec<usize> = indices[..n_val].to_vec();
    let train: Vec<usize> = indices[n_val..].to_vec();
    (train, validation)
}

/// Writes samples as the 23-column training-set CSV (header required).
pub fn write_samples(path: impl AsRef<Path>, samples: &[WindowSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(header_line());
    out.push('\n');
    for sample in samples {
        let label = sample.label.ok_or_else(|| Error::InvalidConfig {
            reason: "cannot write an unlabeled sample to a training-set file".into(),
        })?;
        let _ = write!(out, "{}", sample.origin_k);
        for f in &sample.features {
            let _ = write!(out, ",{f}");
        }
        let _ = writeln!(out, ",{label}");
    }
    std::fs::write(path, out)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Reads a training-set CSV written by [`write_samples`].
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<WindowSample>> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|source| Error::Io { path: path_str.clone(), source })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, head)) if head == header_line() => {}
        _ => {
            return Err(Error::FileFormat {
                path: path_str,
                reason: "missing or unexpected header row".into(),
            })
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_LEN + 2 {
            return Err(Error::CsvFormat {
                path: path_str,
                line: idx + 1,
                reason: format!("expected {} columns, found {}", FEATURE_LEN + 2, fields.len()),
            });
        }
        let parse = |s: &str, line: usize| -> Result<f64> {
            s.parse().map_err(|_| Error::CsvFormat {
                path: path_str.clone(),
                line,
                reason: format!("cannot parse '{s}' as a number"),
            })
        };
        let origin_k = parse(fields[0], idx + 1)? as usize;
        let mut features = [0.0f64; FEATURE_LEN];
        for (f, field) in features.iter_mut().zip(&fields[1..=FEATURE_LEN]) {
            *f = parse(field, idx + 1)?;
        }
        let label = parse(fields[FEATURE_LEN + 1], idx + 1)? as u8;
        samples.push(WindowSample { origin_k, features, label: Some(label) });
    }
    Ok(samples)
}

fn header_line() -> &'static str {
    "origin_k,aic_0,min_sil_0,avg_sil_0,aic_1,min_sil_1,avg_sil_1,aic_2,min_sil_2,avg_sil_2,\
     aic_3,min_sil_3,avg_sil_3,aic_4,min_sil_4,avg_sil_4,aic_5,min_sil_5,avg_sil_5,\
     aic_6,min_sil_6,avg_sil_6,label"
}
