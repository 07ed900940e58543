//! Shared audio/pose embedding: encoders, matching loss, training and retrieval.

mod audio_encoder;
mod loss;
mod lstm;
mod model;
mod pairs;
mod pose_encoder;
mod retrieval;
mod train;

pub use audio_encoder::{audio_encode, AudioEncoderParams, AudioTrace, Dropout};
pub use loss::{matching_loss, matching_loss_grad, MarginMode};
pub use lstm::{LstmTrace, LstmWeights};
pub use model::{decode_model, encode_model, load_model, save_model, ModelParams, MODEL_MAGIC, MODEL_VERSION};
pub use pairs::{make_training_pairs, MAX_DELAY_S, MIN_DELAY_S, PairLabel, PairSet, PairedSource, TrainingPair};
pub use pose_encoder::{normalized_adjacency, pose_encode, pose_input, PoseEncoderParams, PoseTrace};
pub use retrieval::{attach_embeddings, correlation_accuracy, nearest_index, retrieve, retrieve_index};
pub use train::{
    assign_params, batch_gradient, fit_norms, flatten_params, initial_model, prepare_groups, train, Optimizer,
    PreparedGroup, TrainConfig, TrainOutcome,
};

/// Default embedding width.
pub const EMBEDDING_DIM: usize = 16;

/// A point in the shared audio/pose space.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Per-feature standardisation, `(x - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(n: usize) -> Self {
        FeatureNorm {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    /// Statistics over rows of `n` features; `floor` is added to each std.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, n: usize, floor: f64) -> Self {
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for r in rows {
            for k in 0..n {
                sum[k] += r[k];
                sq[k] += r[k] * r[k];
            }
            count += 1;
        }
        if count == 0 {
            return FeatureNorm::identity(n);
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let std = sq
            .iter()
            .zip(mean.iter())
            .map(|(q, m)| (q / c - m * m).max(0.0).sqrt() + floor)
            .collect();
        FeatureNorm { mean, std }
    }

    pub fn apply(&self, k: usize, x: f64) -> f64 {
        (x - self.mean[k]) / self.std[k]
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}
