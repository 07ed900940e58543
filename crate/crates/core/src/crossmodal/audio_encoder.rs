use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{LstmTrace, LstmWeights};
use super::{Embedding, FeatureNorm};
use crate::audio::{MfccFragment, MFCC_DIM};
use crate::error::{Error, Result};

/// Bidirectional LSTM over MFCC frames followed by a linear projection of the
/// concatenated final states.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioEncoderParams {
    pub fwd: LstmWeights,
    pub bwd: LstmWeights,
    /// (D, 2H)
    pub proj_w: Array2<f64>,
    /// (D)
    pub proj_b: Array1<f64>,
    /// Drop probability applied to the concatenated states while training.
    pub dropout: f64,
    /// Input standardisation, one entry per MFCC coefficient.
    pub norm: FeatureNorm,
}

pub enum Dropout<'a> {
    /// Bernoulli keep mask drawn from the generator.
    Train(&'a mut ChaCha8Rng),
    /// Deterministic scaling by the keep probability.
    Eval,
}

pub struct AudioTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
    /// Concatenated states after dropout, (B, 2H).
    features: Array2<f64>,
    /// Mask or keep-probability factors applied to the states, (B, 2H).
    scale: Array2<f64>,
}

impl AudioEncoderParams {
    pub fn init<R: Rng>(hidden: usize, dim: usize, dropout: f64, rng: &mut R) -> Self {
        let fwd = LstmWeights::init(MFCC_DIM, hidden, rng);
        let bwd = LstmWeights::init(MFCC_DIM, hidden, rng);
        let k = 1.0 / ((2 * hidden) as f64).sqrt();
        let proj_w = Array2::from_shape_fn((dim, 2 * hidden), |_| rng.gen_range(-k..k));
        let proj_b = Array1::from_shape_fn(dim, |_| rng.gen_range(-k..k));
        AudioEncoderParams {
            fwd,
            bwd,
            proj_w,
            proj_b,
            dropout,
            norm: FeatureNorm::identity(MFCC_DIM),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let h = self.hidden_size();
        AudioEncoderParams {
            fwd: LstmWeights::zeros(self.fwd.input_size(), h),
            bwd: LstmWeights::zeros(self.bwd.input_size(), h),
            proj_w: Array2::zeros(self.proj_w.raw_dim()),
            proj_b: Array1::zeros(self.proj_b.raw_dim()),
            dropout: self.dropout,
            norm: self.norm.clone(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }

    pub fn dim(&self) -> usize {
        self.proj_b.len()
    }

    /// Standardised (T, 13) input matrix for one fragment.
    pub fn prepare(&self, frag: &MfccFragment) -> Array2<f64> {
        Array2::from_shape_fn((frag.len(), MFCC_DIM), |(t, k)| self.norm.apply(k, frag.frames[t][k]))
    }

    /// Encode a batch of equally long (T, I) inputs.
    pub fn forward_batch(&self, inputs: &[Array2<f64>], dropout: Dropout<'_>) -> Result<(Array2<f64>, AudioTrace)> {
        let batch = inputs.len();
        let first = inputs.first().ok_or_else(|| Error::Shape("empty audio batch".into()))?;
        let (steps, width) = first.dim();
        if steps == 0 {
            return Err(Error::Shape("audio fragment has no frames".into()));
        }
        if width != self.fwd.input_size() {
            return Err(Error::Shape(format!(
                "audio input has {width} features, encoder expects {}",
                self.fwd.input_size()
            )));
        }
        if inputs.iter().any(|x| x.dim() != (steps, width)) {
            return Err(Error::Shape("audio batch mixes fragment lengths".into()));
        }
        let h = self.hidden_size();
        let stack = |reverse: bool| {
            Array2::from_shape_fn((steps * batch, width), |(r, k)| {
                let (step, b) = (r / batch, r % batch);
                let t = if reverse { steps - 1 - step } else { step };
                inputs[b][[t, k]]
            })
        };
        let fwd = self.fwd.forward(stack(false), steps, batch);
        let bwd = self.bwd.forward(stack(true), steps, batch);
        let mut features = Array2::<f64>::zeros((batch, 2 * h));
        features.slice_mut(s![.., ..h]).assign(&fwd.final_hidden());
        features.slice_mut(s![.., h..]).assign(&bwd.final_hidden());
        let keep = 1.0 - self.dropout;
        let scale = match dropout {
            Dropout::Train(rng) => {
                Array2::from_shape_fn((batch, 2 * h), |_| if rng.gen::<f64>() < keep { 1.0 } else { 0.0 })
            }
            Dropout::Eval => Array2::from_elem((batch, 2 * h), keep),
        };
        features *= &scale;
        let mut out = features.dot(&self.proj_w.t());
        out += &self.proj_b;
        Ok((out, AudioTrace { fwd, bwd, features, scale }))
    }

    /// Add the parameter gradients for `d_out` (B, D) into `grads`.
    pub fn backward(&self, trace: &AudioTrace, d_out: &Array2<f64>, grads: &mut AudioEncoderParams) {
        let h = self.hidden_size();
        grads.proj_w += &d_out.t().dot(&trace.features);
        grads.proj_b += &d_out.sum_axis(Axis(0));
        let mut d_feat = d_out.dot(&self.proj_w);
        d_feat *= &trace.scale;
        self.fwd.backward(&trace.fwd, d_feat.slice(s![.., ..h]), &mut grads.fwd);
        self.bwd.backward(&trace.bwd, d_feat.slice(s![.., h..]), &mut grads.bwd);
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Vec<usize>, &[f64])) {
        for (name, w) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            f(format!("{prefix}.{name}.w_ih"), w.w_ih.shape().to_vec(), w.w_ih.as_slice().unwrap());
            f(format!("{prefix}.{name}.w_hh"), w.w_hh.shape().to_vec(), w.w_hh.as_slice().unwrap());
            f(format!("{prefix}.{name}.b"), w.b.shape().to_vec(), w.b.as_slice().unwrap());
        }
        f(format!("{prefix}.proj.w"), self.proj_w.shape().to_vec(), self.proj_w.as_slice().unwrap());
        f(format!("{prefix}.proj.b"), self.proj_b.shape().to_vec(), self.proj_b.as_slice().unwrap());
    }

    pub(crate) fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for w in [&mut self.fwd, &mut self.bwd] {
            f(w.w_ih.as_slice_mut().unwrap());
            f(w.w_hh.as_slice_mut().unwrap());
            f(w.b.as_slice_mut().unwrap());
        }
        f(self.proj_w.as_slice_mut().unwrap());
        f(self.proj_b.as_slice_mut().unwrap());
    }
}

/// Embed one MFCC fragment. In training mode the dropout mask is drawn from
/// `rng_seed`; otherwise the states are scaled by the keep probability.
pub fn audio_encode(params: &AudioEncoderParams, frag: &MfccFragment, train_mode: bool, rng_seed: u64) -> Result<Embedding> {
    let input = params.prepare(frag);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mode = if train_mode { Dropout::Train(&mut rng) } else { Dropout::Eval };
    let (out, _) = params.forward_batch(std::slice::from_ref(&input), mode)?;
    Ok(Embedding::new(out.row(0).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(hidden: usize, dim: usize) -> AudioEncoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = AudioEncoderParams::init(hidden, dim, 0.0, &mut rng);
        p.visit_mut(&mut |s| s.fill(0.0));
        p
    }

    fn frag(frames: Vec<[f64; MFCC_DIM]>) -> MfccFragment {
        MfccFragment {
            source_id: "t".into(),
            start_frame: 0,
            frames,
        }
    }

    #[test]
    fn zero_model_gives_zero_embedding() {
        let p = zero_params(5, 16);
        let e = audio_encode(&p, &frag(vec![[0.0; MFCC_DIM]; 4]), false, 1).unwrap();
        assert!(e.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_is_16_for_any_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = AudioEncoderParams::init(8, 16, 0.1, &mut rng);
        for t in [1, 2, 7, 30] {
            let f = frag((0..t).map(|i| [i as f64 * 0.1; MFCC_DIM]).collect());
            assert_eq!(audio_encode(&p, &f, true, 9).unwrap().dim(), 16);
        }
    }

    #[test]
    fn same_seed_same_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = AudioEncoderParams::init(8, 16, 0.5, &mut rng);
        let f = frag((0..5).map(|i| [i as f64; MFCC_DIM]).collect());
        let a = audio_encode(&p, &f, true, 11).unwrap();
        let b = audio_encode(&p, &f, true, 11).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn matches_hand_evaluated_cell() {
        // Hidden 3, two frames, every weight set to a known value, no dropout.
        let mut p = zero_params(3, 2);
        p.dropout = 0.0;
        let h = 3;
        for (w, sign) in [(&mut p.fwd, 1.0), (&mut p.bwd, -1.0)] {
            for r in 0..4 * h {
                for c in 0..MFCC_DIM {
                    w.w_ih[[r, c]] = sign * 0.01 * ((r * 7 + c * 3) % 11) as f64 - 0.04;
                }
                for c in 0..h {
                    w.w_hh[[r, c]] = 0.05 * ((r + 2 * c) % 5) as f64 - 0.1;
                }
                w.b[r] = 0.02 * (r % 4) as f64;
            }
        }
        for d in 0..2 {
            for c in 0..2 * h {
                p.proj_w[[d, c]] = 0.1 * (d + 1) as f64 * (c as f64 - 2.5);
            }
            p.proj_b[d] = 0.3 * d as f64;
        }
        let mut x = [[0.0; MFCC_DIM]; 2];
        for t in 0..2 {
            for k in 0..MFCC_DIM {
                x[t][k] = ((t * 13 + k) as f64 * 0.37).sin();
            }
        }
        let got = audio_encode(&p, &frag(x.to_vec()), false, 0).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let run = |w: &LstmWeights, order: [usize; 2]| {
            let mut hs = [0.0; 3];
            let mut cs = [0.0; 3];
            for &t in &order {
                let mut z = [0.0; 12];
                for r in 0..12 {
                    z[r] = w.b[r];
                    for k in 0..MFCC_DIM {
                        z[r] += w.w_ih[[r, k]] * x[t][k];
                    }
                    for k in 0..3 {
                        z[r] += w.w_hh[[r, k]] * hs[k];
                    }
                }
                let mut nh = [0.0; 3];
                for k in 0..3 {
                    let c = sig(z[3 + k]) * cs[k] + sig(z[k]) * z[6 + k].tanh();
                    cs[k] = c;
                    nh[k] = sig(z[9 + k]) * c.tanh();
                }
                hs = nh;
            }
            hs
        };
        let hf = run(&p.fwd, [0, 1]);
        let hb = run(&p.bwd, [1, 0]);
        let cat = [hf[0], hf[1], hf[2], hb[0], hb[1], hb[2]];
        for d in 0..2 {
            let want: f64 = p.proj_b[d] + (0..6).map(|c| p.proj_w[[d, c]] * cat[c]).sum::<f64>();
            assert!((got.values()[d] - want).abs() < 1e-12, "{} vs {}", got.values()[d], want);
        }
    }
}
