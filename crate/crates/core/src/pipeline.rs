//! End-to-end rank prediction: classify every scan window, convert the
//! classifications into votes, and pick the K with the most votes.
//!
//! A window classified 1..=5 names an exact K inside the window (a hit) and
//! contributes `hit_weight` votes there; classes 0 and 6 point outside the
//! window (a miss) and contribute one vote to every K on that side. Two
//! non-learned baselines (AIC argmin and a silhouette threshold) share the
//! prediction report format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;
use crate::mlp::MlpModel;
use crate::scan::{scan, KScanRecord, ScanConfig};
use crate::window::{extract_windows, FEATURE_NORMALIZATION_TAG};

/// Votes granted to the named K of a hit window, per the 5:1 hit/miss
/// weighting.
pub const DEFAULT_HIT_WEIGHT: u32 = 5;

/// Default cutoff for the silhouette-threshold baseline.
pub const DEFAULT_SILHOUETTE_THRESHOLD: f64 = 0.75;

/// Which predictor produced a [`RankPrediction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "mlp-vote")]
    MlpVote,
    #[serde(rename = "aic-argmin")]
    AicArgmin,
    #[serde(rename = "silhouette-threshold")]
    SilhouetteThreshold,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::MlpVote => "mlp-vote",
            MethodTag::AicArgmin => "aic-argmin",
            MethodTag::SilhouetteThreshold => "silhouette-threshold",
        }
    }
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One classified window: origin K and predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowClass {
    pub origin: usize,
    pub class: u8,
}

/// Accumulated votes per candidate K plus the classification trace that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub k_min: usize,
    pub k_max: usize,
    /// Vote count for K = `k_min + index`.
    pub votes: Vec<u32>,
    pub trace: Vec<WindowClass>,
}

impl VoteTally {
    /// The K with the most votes; ties break to the smallest K.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.votes.iter().enumerate() {
            if v > self.votes[best] {
                best = i;
            }
        }
        self.k_min + best
    }

    pub fn total_votes(&self) -> u64 {
        self.votes.iter().map(|&v| v as u64).sum()
    }
}

/// A single K estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPrediction {
    pub k_predicted: usize,
    pub tally: VoteTally,
    pub method_tag: MethodTag,
}

/// Classifies every 7-wide window of the scan records, ascending origin.
///
/// Refuses models whose stored feature-normalization tag differs from this
/// pipeline's window layout.
pub fn classify_windows(records: &[KScanRecord], model: &MlpModel) -> Result<Vec<WindowClass>> {
    if model.feature_normalization_tag != FEATURE_NORMALIZATION_TAG {
        return Err(Error::NormalizationMismatch {
            model: model.feature_normalization_tag.clone(),
            expected: FEATURE_NORMALIZATION_TAG.to_string(),
        });
    }
    let windows = extract_windows(records)?;
    windows
        .iter()
        .map(|w| {
            Ok(WindowClass {
                origin: w.origin_k,
                class: model.predict_class(&w.features)? as u8,
            })
        })
        .collect()
}

/// Converts window classifications into per-K votes.
///
/// Class `c` in 1..=5 at origin `o` adds `hit_weight` votes at `K = o + c`;
/// class 0 adds one vote to every `K <= o`; class 6 adds one vote to every
/// `K >= o + 6`. Votes falling outside `[k_min, k_max]` are clipped.
pub fn tally_votes(
    classifications: &[WindowClass],
    k_min: usize,
    k_max: usize,
    hit_weight: u32,
) -> VoteTally {
    let mut votes = vec![0u32; k_max - k_min + 1];
    for &WindowClass { origin, class } in classifications {
        match class {
            0 => {
                for k in k_min..=origin.min(k_max) {
                    votes[k - k_min] += 1;
                }
            }
            6 => {
                for k in (origin + 6).max(k_min)..=k_max {
                    votes[k - k_min] += 1;
                }
            }
            c => {
                let k = origin + c as usize;
                if (k_min..=k_max).contains(&k) {
                    votes[k - k_min] += hit_weight;
                }
            }
        }
    }
    VoteTally { k_min, k_max, votes, trace: classifications.to_vec() }
}

/// Full pipeline: scan, classify every window, tally, and pick the argmax.
pub fn predict_rank(
    x: &NonNegMatrix,
    cfg: &ScanConfig,
    model: &MlpModel,
    hit_weight: u32,
) -> Result<RankPrediction> {
    if cfg.k_max < cfg.k_min + 6 {
        return Err(Error::InvalidConfig {
            reason: format!(
                "scan range [{}, {}] cannot hold a 7-wide window",
                cfg.k_min, cfg.k_max
            ),
        });
    }
    let records = scan(x, cfg)?;
    Ok(predict_from_records(&records, model, hit_weight)?.0)
}

/// Classification and voting over existing scan records; returns the
/// prediction together with the records it consumed.
pub fn predict_from_records(
    records: &[KScanRecord],
    model: &MlpModel,
    hit_weight: u32,
) -> Result<(RankPrediction, Vec<KScanRecord>)> {
    let classifications = classify_windows(records, model)?;
    let k_min = records.first().map(|r| r.k).unwrap_or(1);
    let k_max = records.last().map(|r| r.k).unwrap_or(1);
    let tally = tally_votes(&classifications, k_min, k_max, hit_weight);
    let prediction = RankPrediction {
        k_predicted: tally.argmax(),
        tally,
        method_tag: MethodTag::MlpVote,
    };
    Ok((prediction, records.to_vec()))
}

fn single_vote_tally(records: &[KScanRecord], chosen: usize) -> VoteTally {
    let k_min = records.first().map(|r| r.k).unwrap_or(1);
    let k_max = records.last().map(|r| r.k).unwrap_or(1);
    let mut votes = vec![0u32; k_max - k_min + 1];
    votes[chosen - k_min] = 1;
    VoteTally { k_min, k_max, votes, trace: Vec::new() }
}

/// Baseline: the K with the minimum AIC (ties to the smallest K).
pub fn baseline_aic_argmin(records: &[KScanRecord]) -> Result<RankPrediction> {
    if records.is_empty() {
        return Err(Error::InvalidConfig { reason: "no scan records".into() });
    }
    let mut best = &records[0];
    for record in records {
        if record.aic < best.aic {
            best = record;
        }
    }
    Ok(RankPrediction {
        k_predicted: best.k,
        tally: single_vote_tally(records, best.k),
        method_tag: MethodTag::AicArgmin,
    })
}

/// Baseline: the largest K whose minimum silhouette stays at or above the
/// threshold; the smallest scanned K when none qualifies. Documented as
/// unreliable; kept as a comparator.
pub fn baseline_silhouette_threshold(
    records: &[KScanRecord],
    threshold: f64,
) -> Result<RankPrediction> {
    if records.is_empty() {
        return Err(Error::InvalidConfig { reason: "no scan records".into() });
    }
    let chosen = records
        .iter()
        .filter(|r| r.min_silhouette >= threshold)
        .map(|r| r.k)
        .max()
        .unwrap_or(records[0].k);
    Ok(RankPrediction {
        k_predicted: chosen,
        tally: single_vote_tally(records, chosen),
        method_tag: MethodTag::SilhouetteThreshold,
    })
}

// -- report format -------------------------------------------------------------

/// Vote count for one candidate K, as serialized in prediction reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteCount {
    pub k: usize,
    pub count: u32,
}

/// The JSON prediction report: the estimate, its votes and classification
/// trace, and the scan records inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub k_predicted: usize,
    pub method_tag: MethodTag,
    pub votes: Vec<VoteCount>,
    pub trace: Vec<WindowClass>,
    pub scan: Vec<KScanRecord>,
}

impl PredictionReport {
    pub fn new(prediction: &RankPrediction, records: &[KScanRecord]) -> Self {
        PredictionReport {
            k_predicted: prediction.k_predicted,
            method_tag: prediction.method_tag,
            votes: prediction
                .tally
                .votes
                .iter()
                .enumerate()
                .map(|(i, &count)| VoteCount { k: prediction.tally.k_min + i, count })
                .collect(),
            trace: prediction.tally.trace.clone(),
            scan: records.to_vec(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json + "\n")
            .map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

// -- corpus evaluation -----------------------------------------------------------

/// One evaluated matrix: ground truth and the prediction of every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub index: usize,
    pub k_true: usize,
    pub predictions: Vec<(MethodTag, usize)>,
}

/// Aggregate rates for one method over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodTag,
    pub evaluated: usize,
    pub exact_rate: f64,
    pub within_one_rate: f64,
}

/// Runs every requested method over per-matrix scan records with known
/// `k_true` and aggregates exact and within-one rates.
pub fn evaluate_scans(
    scans: &[(usize, Vec<KScanRecord>)],
    model: Option<&MlpModel>,
    methods: &[MethodTag],
    hit_weight: u32,
    silhouette_threshold: f64,
) -> Result<(Vec<EvaluationRow>, Vec<MethodSummary>)> {
    let mut rows = Vec::with_capacity(scans.len());
    for (index, (k_true, records)) in scans.iter().enumerate() {
        let mut predictions = Vec::with_capacity(methods.len());
        for method in methods {
            let prediction = match method {
                MethodTag::MlpVote => {
                    let model = model.ok_or_else(|| Error::InvalidConfig {
                        reason: "mlp-vote evaluation requires a model".into(),
                    })?;
                    predict_from_records(records, model, hit_weight)?.0
                }
                MethodTag::AicArgmin => baseline_aic_argmin(records)?,
                MethodTag::SilhouetteThreshold => {
                    baseline_silhouette_threshold(records, silhouette_threshold)?
                }
            };
            predictions.push((*method, prediction.k_predicted));
        }
        rows.push(EvaluationRow { index, k_true: *k_true, predictions });
    }

    let summaries = methods
        .iter()
        .map(|method| {
            let mut exact = 0usize;
            let mut within = 0usize;
            for row in &rows {
                let predicted = row
                    .predictions
                    .iter()
                    .find(|(m, _)| m == method)
                    .map(|(_, k)| *k)
                    .expect("method evaluated for every row");
                if predicted == row.k_true {
                    exact += 1;
                }
                if predicted.abs_diff(row.k_true) <= 1 {
                    within += 1;
                }
            }
            MethodSummary {
                method: *method,
                evaluated: rows.len(),
                exact_rate: exact as f64 / rows.len().max(1) as f64,
                within_one_rate: within as f64 / rows.len().max(1) as f64,
            }
        })
        .collect();

    Ok((rows, summaries))
}
