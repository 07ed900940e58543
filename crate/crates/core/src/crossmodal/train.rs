use std::collections::HashMap;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::audio_encoder::{AudioEncoderParams, Dropout};
use super::loss::{matching_loss_grad, MarginMode};
use super::model::{ModelParams, MODEL_VERSION};
use super::pairs::TrainingPair;
use super::pose_encoder::{pose_input, PoseEncoderParams};
use super::{FeatureNorm, EMBEDDING_DIM};
use crate::audio::MFCC_DIM;
use crate::error::{Error, Result};
use crate::skeleton::{adjacency, NUM_JOINTS};

const AUDIO_STD_FLOOR: f64 = 1e-8;
const POSE_STD_FLOOR: f64 = 1e-3;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            other => Err(format!("unknown optimizer '{other}' (expected adam or sgd)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub dim: usize,
    pub epochs: usize,
    /// Pairs per update.
    pub batch: usize,
    pub seed: u64,
    pub hidden: usize,
    pub channels: usize,
    pub kernel: usize,
    pub margin: f64,
    pub margin_mode: MarginMode,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip.
    pub clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            dropout: 0.1,
            dim: EMBEDDING_DIM,
            epochs: 500,
            batch: 16,
            seed: 7,
            hidden: 100,
            channels: 16,
            kernel: 9,
            margin: 2.0,
            margin_mode: MarginMode::Hinge,
            optimizer: Optimizer::Adam,
            clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.dim == 0 || self.hidden == 0 || self.channels == 0 || self.kernel == 0 || self.batch == 0 {
            return bad("dim, hidden, channels, kernel and batch must be positive");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be non-negative");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ModelParams,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

/// One audio window with every pose window it was paired with, already
/// standardised for the encoders.
#[derive(Clone, Debug)]
pub struct PreparedGroup {
    /// (T, 13)
    pub audio: Array2<f64>,
    /// (T, J, 2) inputs and whether each is the corresponding pose.
    pub poses: Vec<(Array3<f64>, bool)>,
}

impl PreparedGroup {
    pub fn pairs(&self) -> usize {
        self.poses.len()
    }
}

/// Freshly initialised model for fragments of `frames` frames.
pub fn initial_model(cfg: &TrainConfig, frames: usize, fps: u32) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adj = adjacency();
    let adj = Array2::from_shape_fn((NUM_JOINTS, NUM_JOINTS), |(i, j)| adj[i][j]);
    let audio = AudioEncoderParams::init(cfg.hidden, cfg.dim, cfg.dropout, &mut rng);
    let pose = PoseEncoderParams::init(adj, frames, cfg.channels, cfg.kernel, cfg.dim, &mut rng);
    ModelParams {
        audio,
        pose,
        margin: cfg.margin,
        margin_mode: cfg.margin_mode,
        fps,
        version: MODEL_VERSION,
    }
}

/// Learnable parameters in visiting order.
pub fn flatten_params(model: &ModelParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.num_params());
    model.visit(&mut |_, _, v| out.extend_from_slice(v));
    out
}

/// Inverse of [`flatten_params`].
pub fn assign_params(model: &mut ModelParams, flat: &[f64]) {
    let mut at = 0;
    model.visit_mut(&mut |v| {
        v.copy_from_slice(&flat[at..at + v.len()]);
        at += v.len();
    });
}

/// Fit the input standardisation of both encoders on the pairs' fragments.
pub fn fit_norms(model: &mut ModelParams, pairs: &[TrainingPair]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    let mut audio_rows: Vec<&[f64]> = Vec::new();
    for p in pairs {
        let a = &p.audio_fragment;
        if seen.insert((a.source_id.as_str(), a.start_frame)) {
            audio_rows.extend(a.frames.iter().map(|f| &f[..]));
        }
    }
    model.audio.norm = FeatureNorm::fit(audio_rows.into_iter(), MFCC_DIM, AUDIO_STD_FLOOR);

    let width = 2 * model.pose.joints();
    model.pose.norm = FeatureNorm::identity(width);
    let mut seen = std::collections::HashSet::new();
    let mut raw = Vec::new();
    for p in pairs {
        let f = &p.pose_fragment;
        if seen.insert((f.source_id.as_str(), f.start_frame)) {
            raw.push(pose_input(&model.pose, f)?);
        }
    }
    let rows = raw.iter().flat_map(|x| x.as_slice().expect("standard layout").chunks(width));
    model.pose.norm = FeatureNorm::fit(rows, width, POSE_STD_FLOOR);
    Ok(())
}

/// Group pairs by audio window (first appearance order) and standardise them
/// with the model's input statistics.
pub fn prepare_groups(model: &ModelParams, pairs: &[TrainingPair]) -> Result<Vec<PreparedGroup>> {
    let mut index: HashMap<(&str, usize), usize> = HashMap::new();
    let mut groups: Vec<PreparedGroup> = Vec::new();
    for p in pairs {
        let key = (p.audio_fragment.source_id.as_str(), p.audio_fragment.start_frame);
        let g = match index.get(&key) {
            Some(&g) => g,
            None => {
                groups.push(PreparedGroup {
                    audio: model.audio.prepare(&p.audio_fragment),
                    poses: Vec::new(),
                });
                index.insert(key, groups.len() - 1);
                groups.len() - 1
            }
        };
        let x = pose_input(&model.pose, &p.pose_fragment)?;
        groups[g].poses.push((x, p.label.is_corresponding()));
    }
    Ok(groups)
}

/// Mean matching loss over every pair in `groups` and its gradient with
/// respect to all learnable parameters. With `dropout_seed` the audio states
/// get a Bernoulli mask drawn from that seed, otherwise inference scaling.
pub fn batch_gradient(model: &ModelParams, groups: &[&PreparedGroup], dropout_seed: Option<u64>) -> Result<(f64, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed.unwrap_or(0));
    let mode = if dropout_seed.is_some() { Dropout::Train(&mut rng) } else { Dropout::Eval };
    batch_gradient_with(model, groups, mode)
}

fn batch_gradient_with(model: &ModelParams, groups: &[&PreparedGroup], dropout: Dropout<'_>) -> Result<(f64, ModelParams)> {
    let n: usize = groups.iter().map(|g| g.pairs()).sum();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let inputs: Vec<Array2<f64>> = groups.iter().map(|g| g.audio.clone()).collect();
    let (a_out, a_trace) = model.audio.forward_batch(&inputs, dropout)?;
    let mut grads = model.zeros_like();
    let mut d_audio = Array2::<f64>::zeros(a_out.raw_dim());
    let inv = 1.0 / n as f64;
    let mut total = 0.0;
    for (gi, g) in groups.iter().enumerate() {
        let a = a_out.row(gi).to_vec();
        for (x, corresponding) in &g.poses {
            let (p, trace) = model.pose.forward(x)?;
            let (loss, dp) = matching_loss_grad(p.as_slice().unwrap(), &a, *corresponding, model.margin, model.margin_mode)?;
            total += loss;
            let dp = ndarray::Array1::from(dp) * inv;
            for (d, v) in d_audio.row_mut(gi).iter_mut().zip(dp.iter()) {
                *d -= v;
            }
            model.pose.backward(&trace, &dp, &mut grads.pose);
        }
    }
    model.audio.backward(&a_trace, &d_audio, &mut grads.audio);
    Ok((total * inv, grads))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    }
}

/// Train both encoders on labelled pairs. Input statistics are fitted on the
/// pairs first; every update uses `cfg.batch` pairs (whole audio groups, so a
/// batch may run one pair over).
pub fn train(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = pairs.first().ok_or_else(|| Error::invalid("no training pairs"))?;
    let frames = first.pose_fragment.len();
    let fps = first.pose_fragment.sequence.fps;
    for p in pairs {
        if p.pose_fragment.len() != frames || p.audio_fragment.len() != frames {
            return Err(Error::invalid(format!(
                "pair {} / {} is not {frames} frames long",
                p.audio_fragment.source_id, p.pose_fragment.id()
            )));
        }
    }
    let mut model = initial_model(cfg, frames, fps);
    fit_norms(&mut model, pairs)?;
    let groups = prepare_groups(&model, pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut flat = flatten_params(&model);
    let mut adam = Adam::new(flat.len());
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0usize;
        let mut cursor = 0;
        let mut batch_no = 0;
        while cursor < order.len() {
            let mut batch = Vec::new();
            let mut count = 0;
            while cursor < order.len() && count < cfg.batch {
                let g = &groups[order[cursor]];
                count += g.pairs();
                batch.push(g);
                cursor += 1;
            }
            let (loss, grads) = batch_gradient_with(&model, &batch, Dropout::Train(&mut rng))?;
            let mut g = flatten_params(&grads);
            let gn = norm(&g);
            if !loss.is_finite() || !gn.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {batch_no}; parameter norm {:.4e}, gradient norm {gn:.4e}",
                    norm(&flat)
                )));
            }
            if gn > cfg.clip {
                let s = cfg.clip / gn;
                g.iter_mut().for_each(|v| *v *= s);
            }
            match cfg.optimizer {
                Optimizer::Adam => adam.step(&mut flat, &g, cfg.lr),
                Optimizer::Sgd => flat.iter_mut().zip(&g).for_each(|(p, d)| *p -= cfg.lr * d),
            }
            assign_params(&mut model, &flat);
            epoch_loss += loss * count as f64;
            epoch_pairs += count;
            batch_no += 1;
        }
        let mean = epoch_loss / epoch_pairs as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        history.push(mean);
    }
    Ok(TrainOutcome { model, loss_history: history })
}
