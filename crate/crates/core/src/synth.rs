//! Labeled synthetic matrices with a known number of latent features.
//!
//! The generator builds W from Gaussian bump columns with controlled pairwise
//! correlations, H from `exp` of uniform noise, and multiplies them under an
//! elementwise noise band, so the true K is known by construction. The
//! swimmer fixture renders the classic 256-image stick-figure family with 16
//! independent limb parts over a constant torso.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NonNegMatrix;
use crate::rng::RngSeed;
use crate::stats::pearson;

/// The three noise half-widths used for corpus generation.
pub const NOISE_LEVELS: [f64; 3] = [0.05, 0.10, 0.20];

/// The three admissible correlation bands between the first two features.
pub const CORRELATION_BANDS: [(f64, f64); 3] = [(0.2, 0.4), (0.4, 0.6), (0.6, 0.8)];

/// Maximum Pearson correlation allowed between a new feature and any
/// previously generated one (features 3..K).
pub const CROSS_CORRELATION_CAP: f64 = 0.3;

/// Parameters for one synthetic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub k_true: usize,
    /// Half-width of the multiplicative noise band, in `[0, 1)`.
    pub noise: f64,
    /// `(min, max)` Pearson correlation required between features 1 and 2.
    pub corr_band: (f64, f64),
    pub seed: RngSeed,
    /// Per-column cap on correlation-constraint rejections.
    pub max_rejections: usize,
}

impl GenSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig {
                reason: format!("need at least 10 rows for Gaussian features, got {}", self.n),
            });
        }
        if self.k_true < 2 || self.k_true > self.n.min(self.m) {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "k_true {} outside [2, min(n, m) = {}]",
                    self.k_true,
                    self.n.min(self.m)
                ),
            });
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::InvalidConfig {
                reason: format!("noise {} outside [0, 1)", self.noise),
            });
        }
        let (lo, hi) = self.corr_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidConfig {
                reason: format!("invalid correlation band ({lo}, {hi})"),
            });
        }
        if self.max_rejections == 0 {
            return Err(Error::InvalidConfig { reason: "max_rejections must be >= 1".into() });
        }
        Ok(())
    }
}

/// A generated matrix together with its ground truth.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub x: NonNegMatrix,
    pub k_true: usize,
    pub w_true: NonNegMatrix,
    pub h_true: NonNegMatrix,
    /// Generation parameters; `None` for fixtures that are rendered rather
    /// than drawn (the swimmer family).
    pub spec: Option<GenSpec>,
}

/// One Gaussian bump over the grid `1..=n`: `exp(-(x - a)^2 / b)` with
/// `a ~ U[1, n]` and `b ~ U[1, n/10]`.
pub fn gaussian_column(n: usize, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    gaussian_column_from(n, &mut rng)
}

fn gaussian_column_from(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = rng.random_range(1.0..=n as f64);
    let b = rng.random_range(1.0..=n as f64 / 10.0);
    (1..=n).map(|x| (-((x as f64 - a).powi(2)) / b).exp()).collect()
}

/// Generates one labeled matrix.
///
/// Feature 1 is unconstrained; feature 2 is redrawn until its correlation
/// with feature 1 falls inside the band; features 3..K are redrawn until
/// their correlation with every earlier feature stays below
/// [`CROSS_CORRELATION_CAP`]. H is `exp` of uniform `[0, 1)` entries and the
/// product picks up elementwise noise from `[1 - noise, 1 + noise)`.
pub fn generate(spec: &GenSpec) -> Result<LabeledMatrix> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let (n, m, k) = (spec.n, spec.m, spec.k_true);

    let mut features: Vec<Vec<f64>> = Vec::with_capacity(k);
    features.push(gaussian_column_from(n, &mut rng));

    let (corr_lo, corr_hi) = spec.corr_band;
    let mut rejections = 0usize;
    loop {
        let candidate = gaussian_column_from(n, &mut rng);
        let corr = pearson(&features[0], &candidate)?;
        if corr_lo < corr && corr < corr_hi {
            features.push(candidate);
            break;
        }
        rejections += 1;
        if rejections >= spec.max_rejections {
            return Err(Error::RejectionBudgetExceeded {
                column: 2,
                budget: spec.max_rejections,
            });
        }
    }

    for column in 3..=k {
        let mut rejections = 0usize;
        loop {
            let candidate = gaussian_column_from(n, &mut rng);
            let ok = features
                .iter()
                .map(|f| pearson(f, &candidate))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|c| c < CROSS_CORRELATION_CAP);
            if ok {
                features.push(candidate);
                break;
            }
            rejections += 1;
            if rejections >= spec.max_rejections {
                return Err(Error::RejectionBudgetExceeded {
                    column,
                    budget: spec.max_rejections,
                });
            }
        }
    }

    // W columns are the accepted features
    let mut w = vec![0.0f64; n * k];
    for (j, feature) in features.iter().enumerate() {
        for (i, &v) in feature.iter().enumerate() {
            w[i * k + j] = v;
        }
    }
    let w = NonNegMatrix::from_rows(n, k, w)?;

    let h_data: Vec<f64> = (0..k * m).map(|_| rng.random_range(0.0f64..1.0).exp()).collect();
    let h = NonNegMatrix::from_rows(k, m, h_data)?;

    let product = w.as_array().dot(h.as_array());
    let noisy = if spec.noise > 0.0 {
        let err: Vec<f64> = (0..n * m)
            .map(|_| rng.random_range(1.0 - spec.noise..1.0 + spec.noise))
            .collect();
        let mut data = product.into_raw_vec_and_offset().0;
        for (d, e) in data.iter_mut().zip(&err) {
            *d *= e;
        }
        NonNegMatrix::from_rows(n, m, data)?
    } else {
        NonNegMatrix::from_array(product)?
    };

    Ok(LabeledMatrix { x: noisy, k_true: k, w_true: w, h_true: h, spec: Some(*spec) })
}

/// Draws `count` specs uniformly over the given ranges and generates them.
///
/// Sizes and k are sampled per index from a seed derived from `(seed, index)`
/// so corpora are reproducible and indexable.
pub fn generate_corpus(
    count: usize,
    size_range: (usize, usize),
    k_range: (usize, usize),
    seed: RngSeed,
) -> Result<Vec<LabeledMatrix>> {
    let specs = corpus_specs(count, size_range, k_range, seed);
    specs
        .iter()
        .enumerate()
        .map(|(index, spec)| {
            generate(spec).map_err(|e| Error::CorpusAtIndex { index, source: Box::new(e) })
        })
        .collect()
}

/// The deterministic spec sequence used by [`generate_corpus`].
pub fn corpus_specs(
    count: usize,
    size_range: (usize, usize),
    k_range: (usize, usize),
    seed: RngSeed,
) -> Vec<GenSpec> {
    (0..count)
        .map(|index| {
            let derived = seed.derive(index as u64);
            let mut rng = derived.rng();
            let n = rng.random_range(size_range.0..=size_range.1);
            let m = rng.random_range(size_range.0..=size_range.1);
            let k_true = rng.random_range(k_range.0..=k_range.1);
            let noise = NOISE_LEVELS[rng.random_range(0..NOISE_LEVELS.len())];
            let corr_band = CORRELATION_BANDS[rng.random_range(0..CORRELATION_BANDS.len())];
            GenSpec {
                n,
                m,
                k_true,
                noise,
                corr_band,
                seed: derived.derive(1),
                max_rejections: 10_000,
            }
        })
        .collect()
}

// -- swimmer fixture ---------------------------------------------------------

const GRID: usize = 32;
const TORSO_COLS: std::ops::RangeInclusive<usize> = 14..=17;
const TORSO_ROWS: std::ops::RangeInclusive<usize> = 10..=21;
/// (row, col) offsets of the four 6-pixel limb positions, before the
/// outward sign of the owning corner is applied.
const LIMB_SHAPES: [[(usize, usize); 6]; 4] = [
    [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)], // horizontal
    [(1, 1), (1, 2), (2, 3), (2, 4), (3, 5), (3, 6)], // shallow diagonal
    [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6)], // diagonal
    [(1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 0)], // vertical
];
/// Limb anchors: (row, col, row sign, col sign), one per torso corner.
const LIMB_ANCHORS: [(usize, usize, isize, isize); 4] = [
    (10, 14, -1, -1), // top left
    (10, 17, -1, 1),  // top right
    (21, 14, 1, -1),  // bottom left
    (21, 17, 1, 1),   // bottom right
];

/// Renders the swimmer image family: a constant torso plus each of 4 limbs
/// in one of 4 positions, giving 4^4 = 256 binary images of 32x32 pixels,
/// flattened row-major into the columns of a 1024x256 matrix. The true
/// number of varying features is 16.
pub fn swimmer() -> LabeledMatrix {
    let pixels = GRID * GRID;
    let n_images = 256;

    let mut torso = vec![0.0f64; pixels];
    for row in TORSO_ROWS {
        for col in TORSO_COLS {
            torso[row * GRID + col] = 1.0;
        }
    }

    // limb part (limb, position) -> pixel indices
    let mut parts: Vec<Vec<usize>> = Vec::with_capacity(16);
    for &(row, col, sr, sc) in &LIMB_ANCHORS {
        for shape in &LIMB_SHAPES {
            let part: Vec<usize> = shape
                .iter()
                .map(|&(dr, dc)| {
                    let r = (row as isize + sr * dr as isize) as usize;
                    let c = (col as isize + sc * dc as isize) as usize;
                    r * GRID + c
                })
                .collect();
            parts.push(part);
        }
    }

    let mut x = vec![0.0f64; pixels * n_images];
    let mut h = vec![0.0f64; 16 * n_images];
    for img in 0..n_images {
        let positions = [img / 64 % 4, img / 16 % 4, img / 4 % 4, img % 4];
        let mut frame = torso.clone();
        for (limb, &pos) in positions.iter().enumerate() {
            let feature = limb * 4 + pos;
            h[feature * n_images + img] = 1.0;
            for &p in &parts[feature] {
                frame[p] = 1.0;
            }
        }
        for (p, &v) in frame.iter().enumerate() {
            x[p * n_images + img] = v;
        }
    }

    let mut w = vec![0.0f64; pixels * 16];
    for (feature, part) in parts.iter().enumerate() {
        for &p in part {
            w[p * 16 + feature] = 1.0;
        }
    }

    LabeledMatrix {
        x: NonNegMatrix::from_rows(pixels, n_images, x).expect("swimmer renders nonnegative"),
        k_true: 16,
        w_true: NonNegMatrix::from_rows(pixels, 16, w).expect("limb parts nonnegative"),
        h_true: NonNegMatrix::from_rows(16, n_images, h).expect("activations nonnegative"),
        spec: None,
    }
}

// -- corpus persistence --------------------------------------------------------

/// One manifest row describing a stored corpus matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub k_true: usize,
    pub n: usize,
    pub m: usize,
    pub noise: f64,
    pub corr_band: (f64, f64),
    pub seed: u64,
}

/// Writes a corpus directory: `matrix_XXXX.csv` per instance plus
/// `manifest.json` listing the ground truth.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &[LabeledMatrix]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let mut entries = Vec::with_capacity(corpus.len());
    for (index, item) in corpus.iter().enumerate() {
        item.x.write_csv(dir.join(matrix_file_name(index)))?;
        let spec = item.spec.as_ref();
        entries.push(ManifestEntry {
            index,
            k_true: item.k_true,
            n: item.x.rows(),
            m: item.x.cols(),
            noise: spec.map_or(0.0, |s| s.noise),
            corr_band: spec.map_or((0.0, 0.0), |s| s.corr_band),
            seed: spec.map_or(0, |s| s.seed.0),
        });
    }
    write_manifest(dir, &entries)
}

pub fn matrix_file_name(index: usize) -> String {
    format!("matrix_{index:04}.csv")
}

pub fn write_manifest(dir: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = dir.as_ref().join("manifest.json");
    let json = serde_json::to_string_pretty(entries).expect("manifest serializes");
    std::fs::write(&path, json + "\n")
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = dir.as_ref().join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::FileFormat {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> GenSpec {
        GenSpec {
            n: 80,
            m: 60,
            k_true: 4,
            noise: 0.1,
            corr_band: (0.4, 0.6),
            seed: RngSeed::new(11),
            max_rejections: 10_000,
        }
    }

    #[test]
    fn gaussian_column_peaks_at_center() {
        for seed in 0..20u64 {
            let col = gaussian_column(50, RngSeed::new(seed));
            assert_eq!(col.len(), 50);
            // far tails may underflow to exactly 0 in f64
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(col.iter().cloned().fold(0.0, f64::max) > 0.5);
            // the maximum must be a global peak shaped around one center
            let peak = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            for i in 1..peak {
                assert!(col[i] >= col[i - 1] - 1e-15);
            }
            for i in peak + 1..50 {
                assert!(col[i] <= col[i - 1] + 1e-15);
            }
        }
    }

    #[test]
    fn gaussian_column_is_deterministic() {
        assert_eq!(gaussian_column(30, RngSeed::new(5)), gaussian_column(30, RngSeed::new(5)));
    }

    #[test]
    fn gaussian_tails_fall_off() {
        // closed form at the grid edges for a centered column
        let n = 100usize;
        let a = n as f64 / 2.0;
        let b = n as f64 / 10.0;
        let col: Vec<f64> =
            (1..=n).map(|x| (-((x as f64 - a).powi(2)) / b).exp()).collect();
        let bound = (-(a - 1.0).powi(2) / b).exp();
        assert!(col[0] <= bound * (1.0 + 1e-12));
        assert!(col[n - 1] <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn generate_respects_correlation_band() {
        for seed in 0..10u64 {
            let spec = GenSpec { seed: RngSeed::new(seed), k_true: 2, ..base_spec() };
            let lm = generate(&spec).unwrap();
            let w0: Vec<f64> = lm.w_true.column(0).to_vec();
            let w1: Vec<f64> = lm.w_true.column(1).to_vec();
            let corr = pearson(&w0, &w1).unwrap();
            assert!(
                spec.corr_band.0 < corr && corr < spec.corr_band.1,
                "corr {corr} outside band (seed {seed})"
            );
        }
    }

    #[test]
    fn generate_caps_cross_correlations() {
        let spec = GenSpec { k_true: 6, ..base_spec() };
        let lm = generate(&spec).unwrap();
        for i in 0..6 {
            for j in 0..i {
                if i >= 2 {
                    let ci: Vec<f64> = lm.w_true.column(i).to_vec();
                    let cj: Vec<f64> = lm.w_true.column(j).to_vec();
                    let corr = pearson(&ci, &cj).unwrap();
                    assert!(corr < CROSS_CORRELATION_CAP, "corr({i},{j}) = {corr}");
                }
            }
        }
    }

    #[test]
    fn noiseless_product_is_exact() {
        let spec = GenSpec { noise: 0.0, ..base_spec() };
        let lm = generate(&spec).unwrap();
        let product = lm.w_true.as_array().dot(lm.h_true.as_array());
        for (a, b) in lm.x.as_array().iter().zip(product.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn noise_band_is_respected() {
        let spec = GenSpec { noise: 0.10, ..base_spec() };
        let lm = generate(&spec).unwrap();
        let product = lm.w_true.as_array().dot(lm.h_true.as_array());
        for (x, p) in lm.x.as_array().iter().zip(product.iter()) {
            assert!((x / p - 1.0).abs() <= 0.10 + 1e-12);
        }
    }

    #[test]
    fn noiseless_matrix_reaches_low_error_at_true_rank() {
        let spec = GenSpec { noise: 0.0, k_true: 3, ..base_spec() };
        let lm = generate(&spec).unwrap();
        let cfg = crate::nmf::NmfConfig::default();
        let pair = crate::nmf::nmf_factorize(&lm.x, 3, &cfg).unwrap();
        assert!(pair.relative_error < 1e-3, "err {}", pair.relative_error);
        // underfitting the same instance is strictly worse
        let under = crate::nmf::nmf_factorize(&lm.x, 1, &cfg).unwrap();
        assert!(under.relative_error > pair.relative_error);
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = base_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.w_true, b.w_true);
    }

    #[test]
    fn infeasible_spec_exhausts_budget() {
        // a correlation band that is (almost) unreachable burns the budget
        let spec = GenSpec {
            corr_band: (0.999, 1.0),
            max_rejections: 50,
            ..base_spec()
        };
        match generate(&spec) {
            Err(Error::RejectionBudgetExceeded { column: 2, budget: 50 }) => {}
            other => panic!("expected rejection budget error, got {other:?}"),
        }
    }

    #[test]
    fn corpus_is_stratified_and_deterministic() {
        let corpus = generate_corpus(60, (50, 90), (2, 6), RngSeed::new(3)).unwrap();
        assert_eq!(corpus.len(), 60);
        assert!(corpus.iter().all(|lm| (2..=6).contains(&lm.k_true)));
        let mut noises: Vec<f64> = corpus
            .iter()
            .map(|lm| lm.spec.unwrap().noise)
            .collect();
        noises.sort_by(|a, b| a.partial_cmp(b).unwrap());
        noises.dedup();
        assert_eq!(noises.len(), NOISE_LEVELS.len(), "all noise levels present");
        let again = generate_corpus(60, (50, 90), (2, 6), RngSeed::new(3)).unwrap();
        for (a, b) in corpus.iter().zip(&again) {
            assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn empty_corpus_is_empty() {
        assert!(generate_corpus(0, (50, 60), (2, 3), RngSeed::new(0)).unwrap().is_empty());
    }

    #[test]
    fn swimmer_has_256_unique_columns_and_constant_torso() {
        let lm = swimmer();
        assert_eq!(lm.x.cols(), 256);
        assert_eq!(lm.x.rows(), 1024);
        assert_eq!(lm.k_true, 16);
        assert_eq!(lm.w_true.cols(), 16);
        // torso pixels lit in every image
        for row in TORSO_ROWS {
            for col in TORSO_COLS {
                let p = row * GRID + col;
                for img in 0..256 {
                    assert_eq!(lm.x.get(p, img), 1.0, "torso pixel {p} off in image {img}");
                }
            }
        }
        // all columns distinct
        let cols: Vec<Vec<u8>> = (0..256)
            .map(|j| (0..1024).map(|p| lm.x.get(p, j) as u8).collect())
            .collect();
        for i in 0..256 {
            for j in 0..i {
                assert_ne!(cols[i], cols[j], "images {i} and {j} coincide");
            }
        }
        // binary pixels
        assert!(lm.x.as_array().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn swimmer_limb_parts_are_disjoint_across_limbs() {
        let lm = swimmer();
        // each feature's pixel set must not intersect another limb's pixels
        let part_pixels: Vec<Vec<usize>> = (0..16)
            .map(|f| (0..1024).filter(|&p| lm.w_true.get(p, f) == 1.0).collect())
            .collect();
        for a in 0..16 {
            for b in 0..a {
                if a / 4 != b / 4 {
                    assert!(
                        part_pixels[a].iter().all(|p| !part_pixels[b].contains(p)),
                        "limb parts {a} and {b} overlap"
                    );
                }
            }
        }
    }

    #[test]
    fn corpus_round_trips_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(4, (50, 60), (2, 3), RngSeed::new(8)).unwrap();
        write_corpus(dir.path(), &corpus).unwrap();
        let manifest = read_manifest(dir.path()).unwrap();
        assert_eq!(manifest.len(), 4);
        for entry in &manifest {
            assert_eq!(entry.k_true, corpus[entry.index].k_true);
            let x = NonNegMatrix::read_csv(dir.path().join(matrix_file_name(entry.index)))
                .unwrap();
            assert_eq!(x, corpus[entry.index].x);
        }
    }
}
