//! The 7-class window classifier: a dense feed-forward network trained with
//! ADAM on the logistic loss.
//!
//! The production architecture is 21 inputs, hidden layers of 300, 200, and
//! 100 rectified-linear units, and a 7-way softmax output, with an L2 weight
//! penalty. Training follows an adaptive schedule: the learning rate drops by
//! a fixed factor when two successive epochs fail to improve validation
//! accuracy beyond a tolerance, and training stops after ten such epochs.
//! The best-validation snapshot is returned.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::window::{WindowSample, FEATURE_LEN, FEATURE_NORMALIZATION_TAG, N_CLASSES};

/// Hidden-layer widths of the production classifier.
pub const HIDDEN_DIMS: [usize; 3] = [300, 200, 100];

/// Log arguments are clamped here to keep the loss finite.
pub const LOG_FLOOR: f64 = 1e-15;

const MODEL_FORMAT_VERSION: u32 = 1;

/// Softmax output over the 7 window classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbabilities(pub [f64; N_CLASSES]);

impl ClassProbabilities {
    /// Index of the most probable class; ties break to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dims: Vec<usize>,
    pub batch_size: usize,
    /// Minimum accuracy improvement that counts as progress.
    pub tolerance: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    /// Epochs without progress before the learning rate decays.
    pub patience_decay: usize,
    /// Epochs without progress before training stops.
    pub patience_stop: usize,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub l2_lambda: f64,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dims: HIDDEN_DIMS.to_vec(),
            batch_size: 200,
            tolerance: 2e-4,
            lr_initial: 1e-3,
            lr_decay_factor: 5.0,
            patience_decay: 2,
            patience_stop: 10,
            max_epochs: 500,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            l2_lambda: 0.01,
            seed: RngSeed::new(0),
        }
    }
}

/// Training provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ModelMetadata {
    pub epochs_trained: usize,
    pub validation_accuracy: f64,
    pub epoch_accuracies: Vec<f64>,
    pub training_fingerprint: String,
    pub train_config: Option<TrainConfig>,
}

/// Dense feed-forward classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// Per layer, shape `(out, in)`.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    pub l2_lambda: f64,
    pub feature_normalization_tag: String,
    pub metadata: ModelMetadata,
}

/// Loss gradients, one array per parameter tensor.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpModel {
    /// Fresh model with scaled-uniform fan-in initialization
    /// (`U[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`) and zero biases.
    pub fn new(layer_dims: &[usize], l2_lambda: f64, seed: RngSeed) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidConfig { reason: "need at least input and output layers".into() });
        }
        if *layer_dims.last().unwrap() != N_CLASSES {
            return Err(Error::InvalidConfig {
                reason: format!("output layer must have {N_CLASSES} units"),
            });
        }
        let mut rng = seed.rng();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            l2_lambda,
            feature_normalization_tag: FEATURE_NORMALIZATION_TAG.to_string(),
            metadata: ModelMetadata::default(),
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<ClassProbabilities> {
        if features.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        let x = Array2::from_shape_vec((1, features.len()), features.to_vec())
            .expect("row vector");
        let probs = self.forward_batch(&x);
        let mut out = [0.0; N_CLASSES];
        for (o, &p) in out.iter_mut().zip(probs.row(0)) {
            *o = p;
        }
        Ok(ClassProbabilities(out))
    }

    /// Most probable class for one feature vector.
    pub fn predict_class(&self, features: &[f64]) -> Result<usize> {
        Ok(self.forward(features)?.argmax())
    }

    /// Batched forward pass; rows of the result sum to 1.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_batch_traced(x).pop().expect("at least one layer")
    }

    /// Forward pass keeping every post-activation layer output (the last
    /// entry is the softmax output). Used by backpropagation.
    fn forward_batch_traced(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len());
        let mut current = x.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = current.dot(&w.t()) + b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                softmax_rows(&mut z);
            }
            current = z.clone();
            activations.push(z);
        }
        activations
    }

    /// Logistic loss of a labeled batch: mean cross-entropy plus
    /// `l2_lambda` times the sum of squared weights.
    pub fn loss(&self, batch: &[WindowSample]) -> Result<f64> {
        let (x, labels) = batch_arrays(batch, self.input_dim())?;
        let probs = self.forward_batch(&x);
        let mut ce = 0.0;
        for (row, &label) in probs.rows().into_iter().zip(&labels) {
            ce -= row[label as usize].max(LOG_FLOOR).ln();
        }
        ce /= batch.len() as f64;
        let l2: f64 = self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
        Ok(ce + self.l2_lambda * l2)
    }

    /// Exact gradient of [`MlpModel::loss`] with respect to every parameter.
    pub fn gradient(&self, batch: &[WindowSample]) -> Result<Gradients> {
        let (x, labels) = batch_arrays(batch, self.input_dim())?;
        Ok(self.gradient_arrays(&x, &labels))
    }

    fn gradient_arrays(&self, x: &Array2<f64>, labels: &[u8]) -> Gradients {
        let batch_len = labels.len() as f64;
        let activations = self.forward_batch_traced(x);
        let n_layers = self.weights.len();

        // softmax + cross-entropy: delta = (P - Y) / B
        let mut delta = activations[n_layers - 1].clone();
        for (mut row, &label) in delta.rows_mut().into_iter().zip(labels) {
            row[label as usize] -= 1.0;
        }
        delta.mapv_inplace(|v| v / batch_len);

        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for layer in (0..n_layers).rev() {
            let input: &Array2<f64> =
                if layer == 0 { x } else { &activations[layer - 1] };
            grad_w[layer] = delta.t().dot(input) + &(2.0 * self.l2_lambda * &self.weights[layer]);
            grad_b[layer] = delta.sum_axis(ndarray::Axis(0));
            if layer > 0 {
                let mut next = delta.dot(&self.weights[layer]);
                // rectifier mask: gradients flow only through active units
                next.zip_mut_with(&activations[layer - 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
        }
        Gradients { weights: grad_w, biases: grad_b }
    }

    /// Classification accuracy over labeled samples.
    pub fn accuracy(&self, samples: &[WindowSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let (x, labels) = batch_arrays(samples, self.input_dim())?;
        let probs = self.forward_batch(&x);
        let correct = probs
            .rows()
            .into_iter()
            .zip(&labels)
            .filter(|(row, &label)| argmax(row.as_slice().unwrap()) == label as usize)
            .count();
        Ok(correct as f64 / samples.len() as f64)
    }

    /// Serializes the model as versioned JSON.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
            activation: activation_tags(self.weights.len()),
            l2_lambda: self.l2_lambda,
            feature_normalization_tag: self.feature_normalization_tag.clone(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_string(&file).expect("model serializes");
        std::fs::write(path, json)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    /// Loads and validates a model file written by [`MlpModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path_str.clone(), source })?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path_str.clone(),
            reason: e.to_string(),
        })?;
        let bad = |reason: String| Error::FileFormat { path: path_str.clone(), reason };
        if file.version != MODEL_FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        if file.layer_dims.len() < 2
            || file.weights.len() != file.layer_dims.len() - 1
            || file.biases.len() != file.weights.len()
        {
            return Err(bad("layer structure is inconsistent".into()));
        }
        if file.activation != activation_tags(file.weights.len()) {
            return Err(bad("unexpected activation tags".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, pair) in file.layer_dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if file.weights[i].len() != fan_in * fan_out || file.biases[i].len() != fan_out {
                return Err(bad(format!("layer {i} parameter arrays have wrong length")));
            }
            if file.weights[i].iter().chain(&file.biases[i]).any(|v| !v.is_finite()) {
                return Err(bad(format!("layer {i} contains non-finite parameters")));
            }
            weights.push(
                Array2::from_shape_vec((fan_out, fan_in), file.weights[i].clone())
                    .expect("checked length"),
            );
            biases.push(Array1::from_vec(file.biases[i].clone()));
        }
        Ok(MlpModel {
            layer_dims: file.layer_dims,
            weights,
            biases,
            l2_lambda: file.l2_lambda,
            feature_normalization_tag: file.feature_normalization_tag,
            metadata: file.metadata,
        })
    }
}

fn activation_tags(n_layers: usize) -> Vec<String> {
    let mut tags = vec!["relu".to_string(); n_layers - 1];
    tags.push("softmax".to_string());
    tags
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    layer_dims: Vec<usize>,
    /// Row-major `(out, in)` weight entries per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Vec<String>,
    l2_lambda: f64,
    feature_normalization_tag: String,
    metadata: ModelMetadata,
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn batch_arrays(batch: &[WindowSample], input_dim: usize) -> Result<(Array2<f64>, Vec<u8>)> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if input_dim != FEATURE_LEN {
        return Err(Error::ShapeMismatch { expected: FEATURE_LEN, got: input_dim });
    }
    let mut x = Array2::zeros((batch.len(), FEATURE_LEN));
    let mut labels = Vec::with_capacity(batch.len());
    for (i, sample) in batch.iter().enumerate() {
        for (j, &f) in sample.features.iter().enumerate() {
            x[(i, j)] = f;
        }
        labels.push(sample.label.ok_or(Error::EmptyTrainingSet)?);
    }
    Ok((x, labels))
}

/// FNV-1a fingerprint of a training set, recorded in model metadata.
pub fn fingerprint(samples: &[WindowSample]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for sample in samples {
        eat(&(sample.origin_k as u64).to_le_bytes());
        for f in &sample.features {
            eat(&f.to_bits().to_le_bytes());
        }
        eat(&[sample.label.map_or(u8::MAX, |l| l)]);
    }
    format!("{hash:016x}")
}

/// Trains the canonical classifier from a fresh seeded initialization.
///
/// `validation` drives the adaptive learning rate, the stopping rule, and
/// the best-snapshot selection; pass a matrix-level held-out split (see
/// [`crate::window::validation_split`]).
pub fn train(
    train_samples: &[WindowSample],
    validation: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    let mut dims = vec![FEATURE_LEN];
    dims.extend_from_slice(&cfg.hidden_dims);
    dims.push(N_CLASSES);
    let model = MlpModel::new(&dims, cfg.l2_lambda, cfg.seed)?;
    train_from(model, train_samples, validation, cfg)
}

/// Trains starting from an explicit model (warm starts, equivariance tests).
pub fn train_from(
    mut model: MlpModel,
    train_samples: &[WindowSample],
    validation: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    if train_samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut class_seen = [false; N_CLASSES];
    for sample in train_samples {
        class_seen[sample.label.ok_or(Error::EmptyTrainingSet)? as usize] = true;
    }
    if class_seen.iter().any(|seen| !seen) {
        let missing: Vec<usize> =
            class_seen.iter().enumerate().filter(|(_, s)| !**s).map(|(i, _)| i).collect();
        eprintln!("warning: training set has no samples for classes {missing:?}");
    }

    let (x_all, labels_all) = batch_arrays(train_samples, model.input_dim())?;
    let eval_set = if validation.is_empty() { train_samples } else { validation };

    let mut adam = AdamState::new(&model);
    let mut lr = cfg.lr_initial;
    // shuffle stream kept distinct from the init stream
    let mut rng = cfg.seed.derive(SHUFFLE_SALT).rng();
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    let mut best_acc = f64::NEG_INFINITY;
    let mut best_loss = f64::INFINITY;
    let mut snapshot = model.clone();
    let mut snapshot_acc = f64::NEG_INFINITY;
    let mut no_improve_lr = 0usize;
    let mut no_improve_stop = 0usize;
    let mut epoch_accuracies = Vec::new();
    let mut epochs_trained = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut x = Array2::zeros((chunk.len(), model.input_dim()));
            let mut labels = Vec::with_capacity(chunk.len());
            for (row, &idx) in chunk.iter().enumerate() {
                x.row_mut(row).assign(&x_all.row(idx));
                labels.push(labels_all[idx]);
            }
            let grads = model.gradient_arrays(&x, &labels);
            adam.step(&mut model, &grads, lr, cfg);
        }

        let loss = model.loss(train_samples)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let acc = model.accuracy(eval_set)?;
        epoch_accuracies.push(acc);
        epochs_trained = epoch;

        if acc > snapshot_acc {
            snapshot = model.clone();
            snapshot_acc = acc;
        }
        // accuracy moves in coarse steps on desk-scale sets, so an epoch
        // counts as progress if either the validation accuracy or the
        // training loss improved beyond the tolerance
        let improved =
            acc > best_acc + cfg.tolerance || loss < best_loss - cfg.tolerance;
        best_acc = best_acc.max(acc);
        best_loss = best_loss.min(loss);
        if improved {
            no_improve_lr = 0;
            no_improve_stop = 0;
        } else {
            no_improve_lr += 1;
            no_improve_stop += 1;
            if no_improve_lr >= cfg.patience_decay {
                lr /= cfg.lr_decay_factor;
                no_improve_lr = 0;
            }
            if no_improve_stop >= cfg.patience_stop {
                break;
            }
        }
    }

    snapshot.metadata = ModelMetadata {
        epochs_trained,
        validation_accuracy: snapshot_acc,
        epoch_accuracies,
        training_fingerprint: fingerprint(train_samples),
        train_config: Some(cfg.clone()),
    };
    Ok(snapshot)
}

const SHUFFLE_SALT: u64 = 0x73687566666c65; // "shuffle"

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        AdamState {
            m_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.t);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.t);
        for layer in 0..model.weights.len() {
            update_tensor(
                model.weights[layer].as_slice_mut().unwrap(),
                grads.weights[layer].as_slice().unwrap(),
                self.m_w[layer].as_slice_mut().unwrap(),
                self.v_w[layer].as_slice_mut().unwrap(),
                lr,
                bc1,
                bc2,
                cfg,
            );
            update_tensor(
                model.biases[layer].as_slice_mut().unwrap(),
                grads.biases[layer].as_slice().unwrap(),
                self.m_b[layer].as_slice_mut().unwrap(),
                self.v_b[layer].as_slice_mut().unwrap(),
                lr,
                bc1,
                bc2,
                cfg,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bias_correction1: f64,
    bias_correction2: f64,
    cfg: &TrainConfig,
) {
    for i in 0..params.len() {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grads[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bias_correction1;
        let v_hat = v[i] / bias_correction2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Mutable access to one parameter by flat index, for finite differences.
    pub fn nudge(model: &mut MlpModel, index: usize, delta: f64) {
        let mut remaining = index;
        for layer in 0..model.weights.len() {
            let wlen = model.weights[layer].len();
            if remaining < wlen {
                model.weights[layer].as_slice_mut().unwrap()[remaining] += delta;
                return;
            }
            remaining -= wlen;
            let blen = model.biases[layer].len();
            if remaining < blen {
                model.biases[layer][remaining] += delta;
                return;
            }
            remaining -= blen;
        }
        panic!("parameter index {index} out of range");
    }

    pub fn n_params(model: &MlpModel) -> usize {
        model.weights.iter().map(|w| w.len()).sum::<usize>()
            + model.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn flat_gradient(grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in 0..grads.weights.len() {
            out.extend(grads.weights[layer].iter());
            out.extend(grads.biases[layer].iter());
        }
        out
    }

    pub fn permute_output_layer(model: &MlpModel, perm: &[usize]) -> MlpModel {
        let mut permuted = model.clone();
        let last = model.weights.len() - 1;
        for (new_row, &old_row) in perm.iter().enumerate() {
            permuted.weights[last]
                .row_mut(new_row)
                .assign(&model.weights[last].row(old_row));
            permuted.biases[last][new_row] = model.biases[last][old_row];
        }
        permuted
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use approx::assert_relative_eq;

    fn sample(features: [f64; FEATURE_LEN], label: u8) -> WindowSample {
        WindowSample { origin_k: 1, features, label: Some(label) }
    }

    fn random_samples(count: usize, seed: u64) -> Vec<WindowSample> {
        let mut rng = RngSeed::new(seed).rng();
        (0..count)
            .map(|_| {
                let mut f = [0.0; FEATURE_LEN];
                for v in &mut f {
                    *v = rng.random_range(-1.0..1.0);
                }
                sample(f, rng.random_range(0..N_CLASSES as u8))
            })
            .collect()
    }

    #[test]
    fn zero_model_is_uniform() {
        let mut model = MlpModel::new(&[FEATURE_LEN, 8, N_CLASSES], 0.0, RngSeed::new(1)).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        let probs = model.forward(&[0.3; FEATURE_LEN]).unwrap();
        for p in probs.0 {
            assert_relative_eq!(p, 1.0 / 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let model =
            MlpModel::new(&[FEATURE_LEN, 8, N_CLASSES], 0.0, RngSeed::new(2)).unwrap();
        let features = [0.25; FEATURE_LEN];
        let base = model.forward(&features).unwrap();
        let mut shifted = model.clone();
        for b in shifted.biases.last_mut().unwrap().iter_mut() {
            *b += 3.7;
        }
        let moved = shifted.forward(&features).unwrap();
        for (a, b) in base.0.iter().zip(moved.0.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_matches_matrix_multiply_oracle() {
        let model =
            MlpModel::new(&[FEATURE_LEN, 5, N_CLASSES], 0.0, RngSeed::new(3)).unwrap();
        let mut rng = RngSeed::new(4).rng();
        let features: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.random_range(-1.0..1.0)).collect();

        // independent oracle: explicit loops over the stored parameters
        let mut hidden = vec![0.0f64; 5];
        for (o, h) in hidden.iter_mut().enumerate() {
            let mut z = model.biases[0][o];
            for (i, &f) in features.iter().enumerate() {
                z += model.weights[0][(o, i)] * f;
            }
            *h = z.max(0.0);
        }
        let mut logits = vec![0.0f64; N_CLASSES];
        for (o, l) in logits.iter_mut().enumerate() {
            let mut z = model.biases[1][o];
            for (i, &h) in hidden.iter().enumerate() {
                z += model.weights[1][(o, i)] * h;
            }
            *l = z;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();

        let probs = model.forward(&features).unwrap();
        for (p, e) in probs.0.iter().zip(&exps) {
            assert!((p - e / total).abs() < 1e-10);
        }
        let sum: f64 = probs.0.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let model = MlpModel::new(&[FEATURE_LEN, 4, N_CLASSES], 0.0, RngSeed::new(5)).unwrap();
        assert!(matches!(
            model.forward(&[0.0; 3]),
            Err(Error::ShapeMismatch { expected: FEATURE_LEN, got: 3 })
        ));
    }

    #[test]
    fn uniform_model_loss_is_ln_seven() {
        let mut model = MlpModel::new(&[FEATURE_LEN, 6, N_CLASSES], 0.0, RngSeed::new(6)).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        let batch = random_samples(40, 7);
        let loss = model.loss(&batch).unwrap();
        assert_relative_eq!(loss, (7.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn confident_correct_model_has_near_zero_loss() {
        let mut model = MlpModel::new(&[FEATURE_LEN, 4, N_CLASSES], 0.0, RngSeed::new(8)).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        // bias the output hard toward class 2
        model.biases[1][2] = 60.0;
        let batch: Vec<WindowSample> =
            (0..10).map(|_| sample([0.1; FEATURE_LEN], 2)).collect();
        let loss = model.loss(&batch).unwrap();
        assert!(loss < 1e-9, "loss {loss}");
    }

    #[test]
    fn loss_matches_finite_sum_oracle() {
        let model =
            MlpModel::new(&[FEATURE_LEN, 6, N_CLASSES], 0.01, RngSeed::new(9)).unwrap();
        let batch = random_samples(25, 10);
        let mut ce = 0.0;
        for s in &batch {
            let p = model.forward(&s.features).unwrap();
            ce -= p.0[s.label.unwrap() as usize].max(LOG_FLOOR).ln();
        }
        ce /= batch.len() as f64;
        let l2: f64 =
            model.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
        let oracle = ce + 0.01 * l2;
        assert!((model.loss(&batch).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn l2_term_never_decreases_loss() {
        let plain =
            MlpModel::new(&[FEATURE_LEN, 6, N_CLASSES], 0.0, RngSeed::new(11)).unwrap();
        let mut regularized = plain.clone();
        regularized.l2_lambda = 0.05;
        let batch = random_samples(20, 12);
        assert!(regularized.loss(&batch).unwrap() >= plain.loss(&batch).unwrap());
    }

    fn finite_difference_check(seed: u64, batch_seed: u64) -> (f64, f64) {
        // small 21-8-8-8-7 network, as in the acceptance gradient check
        let model =
            MlpModel::new(&[FEATURE_LEN, 8, 8, 8, N_CLASSES], 0.01, RngSeed::new(seed)).unwrap();
        let batch = random_samples(12, batch_seed);
        let grads = flat_gradient(&model.gradient(&batch).unwrap());
        let h = 1e-5;
        let mut worst_rel = 0.0f64;
        let mut worst_abs = 0.0f64;
        for index in 0..n_params(&model) {
            let mut plus = model.clone();
            nudge(&mut plus, index, h);
            let mut minus = model.clone();
            nudge(&mut minus, index, -h);
            let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
            let diff = (fd - grads[index]).abs();
            if grads[index].abs() > 1e-4 {
                worst_rel = worst_rel.max(diff / grads[index].abs());
            } else {
                worst_abs = worst_abs.max(diff);
            }
        }
        (worst_rel, worst_abs)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (rel, abs) = finite_difference_check(20, 21);
        assert!(rel < 1e-5, "worst relative gradient error {rel}");
        assert!(abs < 1e-8, "worst absolute gradient error {abs}");
    }

    #[test]
    fn zero_input_gradient_is_pure_l2() {
        let model =
            MlpModel::new(&[FEATURE_LEN, 5, N_CLASSES], 0.01, RngSeed::new(22)).unwrap();
        // biases start at zero, inputs all zero: every activation is zero
        let batch: Vec<WindowSample> = (0..4).map(|_| sample([0.0; FEATURE_LEN], 3)).collect();
        let grads = model.gradient(&batch).unwrap();
        for (gw, w) in grads.weights[0].iter().zip(model.weights[0].iter()) {
            assert_relative_eq!(*gw, 2.0 * 0.01 * w, epsilon = 1e-14);
        }
    }

    #[test]
    fn duplicated_sample_keeps_gradient() {
        let model =
            MlpModel::new(&[FEATURE_LEN, 5, N_CLASSES], 0.005, RngSeed::new(23)).unwrap();
        let one = random_samples(1, 24);
        let doubled: Vec<WindowSample> = vec![one[0].clone(), one[0].clone()];
        let g1 = flat_gradient(&model.gradient(&one).unwrap());
        let g2 = flat_gradient(&model.gradient(&doubled).unwrap());
        for (a, b) in g1.iter().zip(&g2) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn separable_samples(count: usize, seed: u64) -> Vec<WindowSample> {
        // labels 0 and 6 with far-apart feature clusters
        let mut rng = RngSeed::new(seed).rng();
        (0..count)
            .map(|i| {
                let label = if i % 2 == 0 { 0u8 } else { 6u8 };
                let center = if label == 0 { -0.8 } else { 0.8 };
                let mut f = [0.0; FEATURE_LEN];
                for v in &mut f {
                    *v = center + rng.random_range(-0.1..0.1);
                }
                sample(f, label)
            })
            .collect()
    }

    fn tiny_config(seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_dims: vec![16, 8],
            batch_size: 16,
            max_epochs: 50,
            seed: RngSeed::new(seed),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_problem_is_learned() {
        let samples = separable_samples(120, 30);
        let model = train(&samples, &[], &tiny_config(31)).unwrap();
        let acc = model.accuracy(&samples).unwrap();
        assert!(acc >= 0.99, "training accuracy {acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let samples = separable_samples(60, 32);
        let cfg = TrainConfig { max_epochs: 8, ..tiny_config(33) };
        let a = train(&samples, &[], &cfg).unwrap();
        let b = train(&samples, &[], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn returned_model_is_best_epoch_snapshot() {
        let samples = random_samples(80, 34);
        let cfg = TrainConfig { max_epochs: 12, ..tiny_config(35) };
        let model = train(&samples, &[], &cfg).unwrap();
        let best = model
            .metadata
            .epoch_accuracies
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(model.metadata.validation_accuracy, best);
    }

    #[test]
    fn label_permutation_equivariance() {
        let samples = separable_samples(60, 36);
        // swap classes 0 and 6 in both the data and the output-layer init
        let perm: Vec<usize> = vec![6, 1, 2, 3, 4, 5, 0];
        let permuted_samples: Vec<WindowSample> = samples
            .iter()
            .map(|s| WindowSample {
                label: s.label.map(|l| if l == 0 { 6 } else if l == 6 { 0 } else { l }),
                ..s.clone()
            })
            .collect();
        let cfg = TrainConfig { max_epochs: 6, ..tiny_config(37) };
        let mut dims = vec![FEATURE_LEN];
        dims.extend_from_slice(&cfg.hidden_dims);
        dims.push(N_CLASSES);
        let base_init = MlpModel::new(&dims, cfg.l2_lambda, cfg.seed).unwrap();
        let perm_init = permute_output_layer(&base_init, &perm);

        let base = train_from(base_init, &samples, &[], &cfg).unwrap();
        let permuted = train_from(perm_init, &permuted_samples, &[], &cfg).unwrap();
        for s in &samples {
            let p = base.forward(&s.features).unwrap();
            let q = permuted.forward(&s.features).unwrap();
            for (class, &target) in perm.iter().enumerate() {
                assert_relative_eq!(q.0[class], p.0[target], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let samples = separable_samples(40, 38);
        let cfg = TrainConfig { max_epochs: 4, ..tiny_config(39) };
        let model = train(&samples, &[], &cfg).unwrap();
        model.save(&path).unwrap();
        let loaded = MlpModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        let mut rng = RngSeed::new(40).rng();
        for _ in 0..100 {
            let mut f = [0.0; FEATURE_LEN];
            for v in &mut f {
                *v = rng.random_range(-1.0..1.0);
            }
            assert_eq!(model.forward(&f).unwrap().0, loaded.forward(&f).unwrap().0);
        }
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = MlpModel::new(&[FEATURE_LEN, 4, N_CLASSES], 0.0, RngSeed::new(41)).unwrap();
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(MlpModel::load(&path), Err(Error::FileFormat { .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = MlpModel::new(&[FEATURE_LEN, 4, N_CLASSES], 0.0, RngSeed::new(42)).unwrap();
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"version\":1", "\"version\":9")).unwrap();
        assert!(matches!(MlpModel::load(&path), Err(Error::FileFormat { .. })));
    }
}
