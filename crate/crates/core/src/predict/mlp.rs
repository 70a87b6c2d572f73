//! Two-hidden-layer MLP classifier over transcript features.
//!
//! The head emits (dropout, retention) probabilities through a softmax;
//! hidden layers use tanh. Training is plain mini-batch gradient descent
//! with cross-entropy loss, deterministic under its seed. Gradients are
//! exposed so tests can check them against finite differences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingClient, Featurizer, PredictError, PredictionOutcome, Stage};
use crate::dataset::PredictionInstance;

/// Output class index for dropout.
pub const CLASS_DROPOUT: usize = 0;
/// Decision threshold on the dropout probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Format version of serialized model files.
pub const MODEL_FILE_VERSION: u32 = 1;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: (usize, usize),
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig { hidden: (32, 16), learning_rate: 0.01, epochs: 300, batch_size: 32, seed: 0 }
    }
}

/// Weights of the classifier. Layer `l` maps `layer_sizes[l]` inputs to
/// `layer_sizes[l + 1]` outputs; weights are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-layer gradients in the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn softmax2(logits: &[f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

impl MlpModel {
    /// A model with all parameters zero; useful as a neutral baseline since
    /// it predicts exactly (0.5, 0.5).
    pub fn zeroed(input_dim: usize, hidden: (usize, usize)) -> MlpModel {
        let layer_sizes = vec![input_dim, hidden.0, hidden.1, 2];
        let weights = (0..3).map(|l| vec![0.0; layer_sizes[l + 1] * layer_sizes[l]]).collect();
        let biases = (0..3).map(|l| vec![0.0; layer_sizes[l + 1]]).collect();
        MlpModel { layer_sizes, weights, biases }
    }

    fn init(input_dim: usize, hidden: (usize, usize), rng: &mut ChaCha8Rng) -> MlpModel {
        let mut model = MlpModel::zeroed(input_dim, hidden);
        for l in 0..3 {
            let (fan_in, fan_out) = (model.layer_sizes[l], model.layer_sizes[l + 1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut model.weights[l] {
                *w = rng.gen_range(-s..s);
            }
        }
        model
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Activations of every layer; the last entry is the softmax output.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in 0..self.weights.len() {
            let (n_out, n_in) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            let prev = &acts[l];
            let mut out = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for (w, a) in row.iter().zip(prev) {
                    z += w * a;
                }
                out[o] = z;
            }
            if l + 1 == self.weights.len() {
                let probs = softmax2(&[out[0], out[1]]);
                out = probs.to_vec();
            } else {
                for z in &mut out {
                    *z = z.tanh();
                }
            }
            acts.push(out);
        }
        acts
    }

    /// (dropout, retention) probabilities for one feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64), PredictError> {
        if x.len() != self.input_dim() {
            return Err(PredictError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let acts = self.forward(x);
        let out = acts.last().expect("forward returns layers");
        Ok((out[CLASS_DROPOUT], out[1 - CLASS_DROPOUT]))
    }

    /// Mean cross-entropy loss over a batch. Labels are dropout flags.
    pub fn loss(&self, xs: &[Vec<f64>], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            let acts = self.forward(x);
            let out = acts.last().unwrap();
            let p_true = if y { out[CLASS_DROPOUT] } else { out[1 - CLASS_DROPOUT] };
            total -= p_true.max(1e-300).ln();
        }
        total / xs.len() as f64
    }

    /// Mean loss and its analytic gradients over a batch.
    pub fn gradients(&self, xs: &[Vec<f64>], labels: &[bool]) -> (f64, Gradients) {
        let layers = self.weights.len();
        let mut grads = Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let mut total_loss = 0.0;
        let scale = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(labels) {
            let acts = self.forward(x);
            let out = acts.last().unwrap();
            let p_true = if y { out[CLASS_DROPOUT] } else { out[1 - CLASS_DROPOUT] };
            total_loss -= p_true.max(1e-300).ln();

            // Softmax with cross-entropy: dL/dlogit = p - onehot.
            let mut delta = vec![out[0], out[1]];
            let hot = if y { CLASS_DROPOUT } else { 1 - CLASS_DROPOUT };
            delta[hot] -= 1.0;

            for l in (0..layers).rev() {
                let (n_out, n_in) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
                let prev = &acts[l];
                for o in 0..n_out {
                    grads.biases[l][o] += scale * delta[o];
                    let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(prev) {
                        *g += scale * delta[o] * a;
                    }
                }
                if l > 0 {
                    let mut next_delta = vec![0.0; n_in];
                    for i in 0..n_in {
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += self.weights[l][o * n_in + i] * delta[o];
                        }
                        // acts[l] holds tanh outputs; its derivative is 1 - a^2.
                        next_delta[i] = acc * (1.0 - prev[i] * prev[i]);
                    }
                    delta = next_delta;
                }
            }
        }
        (total_loss * scale, grads)
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * gi;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi -= lr * gi;
            }
        }
    }

    /// Train a fresh model. Requires both classes to be present and all
    /// feature vectors to share one dimension d >= 1.
    pub fn train(
        features: &[Vec<f64>],
        labels: &[bool],
        config: &TrainConfig,
    ) -> Result<MlpModel, PredictError> {
        if features.is_empty() {
            return Err(PredictError::EmptyTrainingData);
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(PredictError::DimensionMismatch { expected: 1, got: 0 });
        }
        for f in features {
            if f.len() != dim {
                return Err(PredictError::DimensionMismatch { expected: dim, got: f.len() });
            }
        }
        let positives = labels.iter().filter(|&&l| l).count();
        if positives == 0 || positives == labels.len() {
            return Err(PredictError::SingleClassTraining);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = MlpModel::init(dim, config.hidden, &mut rng);
        let mut order: Vec<usize> = (0..features.len()).collect();
        let batch = config.batch_size.max(1);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| features[i].clone()).collect();
                let ys: Vec<bool> = chunk.iter().map(|&i| labels[i]).collect();
                let (_, grads) = model.gradients(&xs, &ys);
                model.step(&grads, config.learning_rate);
            }
        }
        Ok(model)
    }
}

/// A trained classifier bundled with its featurizer, ready to persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub featurizer: Featurizer,
    pub mlp: MlpModel,
    pub threshold: f64,
    pub train_config: TrainConfig,
}

impl TrainedModel {
    /// Fit the featurizer on the train instances and train the classifier.
    pub fn fit(
        train: &[PredictionInstance],
        chapter_count: u32,
        config: &TrainConfig,
        embed: Option<&dyn EmbeddingClient>,
    ) -> Result<TrainedModel, PredictError> {
        let featurizer = match embed {
            Some(client) => Featurizer::embedding(client.dim(), chapter_count),
            None => Featurizer::fit_handcrafted(train, chapter_count)?,
        };
        let mut features = Vec::with_capacity(train.len());
        for inst in train {
            features.push(featurizer.featurize(inst, embed)?);
        }
        let labels: Vec<bool> = train.iter().map(|i| i.label).collect();
        let mlp = MlpModel::train(&features, &labels, config)?;
        Ok(TrainedModel {
            version: MODEL_FILE_VERSION,
            featurizer,
            mlp,
            threshold: DEFAULT_THRESHOLD,
            train_config: config.clone(),
        })
    }

    /// Predict one instance through the featurizer and classifier.
    pub fn predict(
        &self,
        inst: &PredictionInstance,
        embed: Option<&dyn EmbeddingClient>,
    ) -> Result<PredictionOutcome, PredictError> {
        let x = self.featurizer.featurize(inst, embed)?;
        let (p_dropout, _) = self.mlp.predict_proba(&x)?;
        Ok(PredictionOutcome {
            label: p_dropout >= self.threshold,
            p_dropout,
            stage: Stage::FineTuned,
            degraded_from: None,
            raw_response: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, serde_json::Error> {
        serde_json::from_str(text)
    }
}
