use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;

use super::{Embedding, FeatureNorm};
use crate::error::{Error, Result};
use crate::pose::{max_nose_to_foot, PoseFragment};
use crate::skeleton::{NECK, NUM_JOINTS};

/// Temporal convolution shared across joints, one normalised graph
/// propagation step, pooling over joints and a projection of the
/// (time x channel) map.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseEncoderParams {
    /// (C, 2, K)
    pub conv_w: Array3<f64>,
    /// (C)
    pub conv_b: Array1<f64>,
    /// (C, C)
    pub graph_w: Array2<f64>,
    /// (D, T * C)
    pub proj_w: Array2<f64>,
    /// (D)
    pub proj_b: Array1<f64>,
    /// (J, J) 0/1 adjacency without self loops.
    pub adjacency: Array2<f64>,
    /// Input standardisation over (joint, axis) pairs, index `2 * joint + axis`.
    pub norm: FeatureNorm,
}

pub struct PoseTrace {
    /// Joint-weighted input, (T, 2).
    xbar: Array2<f64>,
    /// Joint-pooled propagated features before the graph kernel, (T, C).
    ybar: Array2<f64>,
    /// Pooled output map, (T, C).
    q: Array2<f64>,
}

/// `Λ^{-1/2} (A + I) Λ^{-1/2}` with `Λ_ii = Σ_j (A + I)_ij`.
pub fn normalized_adjacency(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let a_hat = a + &Array2::<f64>::eye(n);
    let d: Vec<f64> = a_hat.sum_axis(Axis(1)).iter().map(|v| 1.0 / v.sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| d[i] * a_hat[[i, j]] * d[j])
}

impl PoseEncoderParams {
    pub fn init<R: Rng>(adjacency: Array2<f64>, frames: usize, channels: usize, kernel: usize, dim: usize, rng: &mut R) -> Self {
        let j = adjacency.nrows();
        let kc = 1.0 / ((2 * kernel) as f64).sqrt();
        let kg = 1.0 / (channels as f64).sqrt();
        let kp = 1.0 / ((frames * channels) as f64).sqrt();
        PoseEncoderParams {
            conv_w: Array3::from_shape_fn((channels, 2, kernel), |_| rng.gen_range(-kc..kc)),
            conv_b: Array1::from_shape_fn(channels, |_| rng.gen_range(-kc..kc)),
            graph_w: Array2::from_shape_fn((channels, channels), |_| rng.gen_range(-kg..kg)),
            proj_w: Array2::from_shape_fn((dim, frames * channels), |_| rng.gen_range(-kp..kp)),
            proj_b: Array1::from_shape_fn(dim, |_| rng.gen_range(-kp..kp)),
            adjacency,
            norm: FeatureNorm::identity(2 * j),
        }
    }

    pub fn zeros_like(&self) -> Self {
        PoseEncoderParams {
            conv_w: Array3::zeros(self.conv_w.raw_dim()),
            conv_b: Array1::zeros(self.conv_b.raw_dim()),
            graph_w: Array2::zeros(self.graph_w.raw_dim()),
            proj_w: Array2::zeros(self.proj_w.raw_dim()),
            proj_b: Array1::zeros(self.proj_b.raw_dim()),
            adjacency: self.adjacency.clone(),
            norm: self.norm.clone(),
        }
    }

    pub fn channels(&self) -> usize {
        self.conv_b.len()
    }

    pub fn kernel(&self) -> usize {
        self.conv_w.dim().2
    }

    pub fn frames(&self) -> usize {
        self.proj_w.ncols() / self.channels()
    }

    pub fn joints(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn dim(&self) -> usize {
        self.proj_b.len()
    }

    /// Column means of the normalised adjacency: the weight each joint ends
    /// up with after propagation and pooling over joints.
    fn joint_weights(&self) -> Array1<f64> {
        normalized_adjacency(&self.adjacency).mean_axis(Axis(0)).expect("non-empty graph")
    }

    /// Forward pass on a prepared (T, J, 2) input.
    ///
    /// Every stage before the pooling is linear and shared across joints, so
    /// pooling `Â g_te W_g` over joints equals applying the convolution and
    /// `W_g` to the input averaged with the column means of `Â`. The pass is
    /// evaluated in that order.
    pub fn forward(&self, x: &Array3<f64>) -> Result<(Array1<f64>, PoseTrace)> {
        let (t_len, joints, axes) = x.dim();
        if joints != self.joints() || axes != 2 {
            return Err(Error::Shape(format!(
                "pose input has {joints} joints x {axes} axes, encoder expects {} x 2",
                self.joints()
            )));
        }
        if t_len != self.frames() {
            return Err(Error::Shape(format!(
                "pose input has {t_len} frames, encoder expects {}",
                self.frames()
            )));
        }
        let a = self.joint_weights();
        let sa = a.sum();
        let (c_len, k_len) = (self.channels(), self.kernel());
        let pad = k_len / 2;
        let mut xbar = Array2::<f64>::zeros((t_len, 2));
        for t in 0..t_len {
            for i in 0..joints {
                xbar[[t, 0]] += a[i] * x[[t, i, 0]];
                xbar[[t, 1]] += a[i] * x[[t, i, 1]];
            }
        }
        let mut ybar = Array2::<f64>::zeros((t_len, c_len));
        for t in 0..t_len {
            for c in 0..c_len {
                let mut acc = sa * self.conv_b[c];
                for k in 0..k_len {
                    let src = t as isize + k as isize - pad as isize;
                    if src < 0 || src >= t_len as isize {
                        continue;
                    }
                    let src = src as usize;
                    acc += self.conv_w[[c, 0, k]] * xbar[[src, 0]] + self.conv_w[[c, 1, k]] * xbar[[src, 1]];
                }
                ybar[[t, c]] = acc;
            }
        }
        let q = ybar.dot(&self.graph_w);
        let flat = q.view().into_shape_with_order(t_len * c_len).expect("contiguous");
        let out = self.proj_w.dot(&flat) + &self.proj_b;
        Ok((out, PoseTrace { xbar, ybar, q }))
    }

    /// Add the parameter gradients for `d_out` (D) into `grads`.
    pub fn backward(&self, trace: &PoseTrace, d_out: &Array1<f64>, grads: &mut PoseEncoderParams) {
        let (t_len, c_len) = trace.q.dim();
        let k_len = self.kernel();
        let pad = k_len / 2;
        let flat = trace.q.view().into_shape_with_order(t_len * c_len).expect("contiguous");
        for d in 0..d_out.len() {
            let g = d_out[d];
            if g != 0.0 {
                grads.proj_w.row_mut(d).scaled_add(g, &flat);
            }
        }
        grads.proj_b += d_out;
        let dq_flat = self.proj_w.t().dot(d_out);
        let dq = dq_flat.into_shape_with_order((t_len, c_len)).expect("contiguous");
        grads.graph_w += &trace.ybar.t().dot(&dq);
        let dy = dq.dot(&self.graph_w.t());
        let sa = self.joint_weights().sum();
        for c in 0..c_len {
            grads.conv_b[c] += sa * dy.column(c).sum();
        }
        for t in 0..t_len {
            for k in 0..k_len {
                let src = t as isize + k as isize - pad as isize;
                if src < 0 || src >= t_len as isize {
                    continue;
                }
                let src = src as usize;
                for c in 0..c_len {
                    let g = dy[[t, c]];
                    grads.conv_w[[c, 0, k]] += g * trace.xbar[[src, 0]];
                    grads.conv_w[[c, 1, k]] += g * trace.xbar[[src, 1]];
                }
            }
        }
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, Vec<usize>, &[f64])) {
        f(format!("{prefix}.conv.w"), self.conv_w.shape().to_vec(), self.conv_w.as_slice().unwrap());
        f(format!("{prefix}.conv.b"), self.conv_b.shape().to_vec(), self.conv_b.as_slice().unwrap());
        f(format!("{prefix}.graph.w"), self.graph_w.shape().to_vec(), self.graph_w.as_slice().unwrap());
        f(format!("{prefix}.proj.w"), self.proj_w.shape().to_vec(), self.proj_w.as_slice().unwrap());
        f(format!("{prefix}.proj.b"), self.proj_b.shape().to_vec(), self.proj_b.as_slice().unwrap());
    }

    pub(crate) fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.conv_w.as_slice_mut().unwrap());
        f(self.conv_b.as_slice_mut().unwrap());
        f(self.graph_w.as_slice_mut().unwrap());
        f(self.proj_w.as_slice_mut().unwrap());
        f(self.proj_b.as_slice_mut().unwrap());
    }
}

/// Neck-centred, height-scaled and standardised (T, 18, 2) encoder input.
pub fn pose_input(params: &PoseEncoderParams, frag: &PoseFragment) -> Result<Array3<f64>> {
    if params.joints() != NUM_JOINTS {
        return Err(Error::Schema {
            origin: frag.id(),
            frame: 0,
            message: format!("encoder built for {} joints, fragments carry {}", params.joints(), NUM_JOINTS),
        });
    }
    let scale = max_nose_to_foot(&frag.sequence).filter(|&h| h > 0.0).unwrap_or(1.0);
    let seq = &frag.sequence;
    Ok(Array3::from_shape_fn((seq.len(), NUM_JOINTS, 2), |(t, j, a)| {
        let k = seq.frames[t].keypoints[j];
        let neck = seq.frames[t].keypoints[NECK];
        let v = if a == 0 { (k.x - neck.x) / scale } else { (k.y - neck.y) / scale };
        params.norm.apply(2 * j + a, v)
    }))
}

pub fn pose_encode(params: &PoseEncoderParams, frag: &PoseFragment) -> Result<Embedding> {
    let x = pose_input(params, frag)?;
    let (out, _) = params.forward(&x)?;
    Ok(Embedding::new(out.to_vec()))
}
