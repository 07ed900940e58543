use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2, Array3};

use super::audio_encoder::AudioEncoderParams;
use super::loss::MarginMode;
use super::lstm::LstmWeights;
use super::pose_encoder::PoseEncoderParams;
use super::FeatureNorm;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CKMP";
pub const MODEL_VERSION: u32 = 1;

const KIND: &str = "model";

/// All weights of both encoders plus the loss settings they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub audio: AudioEncoderParams,
    pub pose: PoseEncoderParams,
    pub margin: f64,
    pub margin_mode: MarginMode,
    pub fps: u32,
    pub version: u32,
}

impl ModelParams {
    /// Frames per fragment the pose encoder was built for.
    pub fn frames(&self) -> usize {
        self.pose.frames()
    }

    pub fn dim(&self) -> usize {
        self.audio.dim()
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            audio: self.audio.zeros_like(),
            pose: self.pose.zeros_like(),
            ..self.clone()
        }
    }

    /// Learnable tensors in a fixed order.
    pub fn visit(&self, f: &mut dyn FnMut(String, Vec<usize>, &[f64])) {
        self.audio.visit("audio", f);
        self.pose.visit("pose", f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.audio.visit_mut(f);
        self.pose.visit_mut(f);
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _, v| n += v.len());
        n
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.audio.dim() != self.pose.dim() {
            return Err(Error::Shape(format!(
                "audio branch projects to {} dims, pose branch to {}",
                self.audio.dim(),
                self.pose.dim()
            )));
        }
        Ok(())
    }
}

type Tensor = (Vec<usize>, Vec<f64>);

fn scalar(v: f64) -> Tensor {
    (vec![1], vec![v])
}

fn collect_tensors(m: &ModelParams) -> Vec<(String, Tensor)> {
    let mut out = Vec::new();
    m.visit(&mut |name, shape, data| out.push((name, (shape, data.to_vec()))));
    let j = m.pose.joints();
    out.push(("audio.norm.mean".into(), (vec![m.audio.norm.len()], m.audio.norm.mean.clone())));
    out.push(("audio.norm.std".into(), (vec![m.audio.norm.len()], m.audio.norm.std.clone())));
    out.push(("pose.norm.mean".into(), (vec![j, 2], m.pose.norm.mean.clone())));
    out.push(("pose.norm.std".into(), (vec![j, 2], m.pose.norm.std.clone())));
    out.push(("pose.adjacency".into(), (vec![j, j], m.pose.adjacency.iter().cloned().collect())));
    out.push(("config.dropout".into(), scalar(m.audio.dropout)));
    out.push(("config.margin".into(), scalar(m.margin)));
    out.push(("config.margin_mode".into(), scalar(m.margin_mode.code() as f64)));
    out.push(("config.fps".into(), scalar(m.fps as f64)));
    out
}

pub fn encode_model(m: &ModelParams) -> Vec<u8> {
    let tensors = collect_tensors(m);
    let mut w = Vec::new();
    w.extend_from_slice(MODEL_MAGIC);
    w.write_u32::<LE>(m.version).unwrap();
    w.write_u32::<LE>(tensors.len() as u32).unwrap();
    for (name, (shape, data)) in &tensors {
        w.write_u32::<LE>(name.len() as u32).unwrap();
        w.extend_from_slice(name.as_bytes());
        w.write_u32::<LE>(shape.len() as u32).unwrap();
        for &d in shape {
            w.write_u64::<LE>(d as u64).unwrap();
        }
        for &v in data {
            w.write_f64::<LE>(v).unwrap();
        }
    }
    w
}

struct TensorMap(BTreeMap<String, Tensor>);

impl TensorMap {
    fn take(&mut self, name: &str, ndim: usize) -> Result<Tensor> {
        let t = self.0.remove(name).ok_or_else(|| Error::Corrupt {
            kind: KIND,
            message: format!("missing tensor {name}"),
        })?;
        if t.0.len() != ndim {
            return Err(Error::Corrupt {
                kind: KIND,
                message: format!("tensor {name} has {} dims, expected {ndim}", t.0.len()),
            });
        }
        Ok(t)
    }

    fn a1(&mut self, name: &str) -> Result<Array1<f64>> {
        let (_, d) = self.take(name, 1)?;
        Ok(Array1::from(d))
    }

    fn a2(&mut self, name: &str) -> Result<Array2<f64>> {
        let (s, d) = self.take(name, 2)?;
        Array2::from_shape_vec((s[0], s[1]), d).map_err(|e| Error::Corrupt { kind: KIND, message: e.to_string() })
    }

    fn a3(&mut self, name: &str) -> Result<Array3<f64>> {
        let (s, d) = self.take(name, 3)?;
        Array3::from_shape_vec((s[0], s[1], s[2]), d).map_err(|e| Error::Corrupt { kind: KIND, message: e.to_string() })
    }

    fn scalar(&mut self, name: &str) -> Result<f64> {
        let (_, d) = self.take(name, 1)?;
        d.first().copied().ok_or_else(|| Error::Corrupt { kind: KIND, message: format!("empty scalar {name}") })
    }

    fn vec(&mut self, name: &str, ndim: usize) -> Result<Vec<f64>> {
        Ok(self.take(name, ndim)?.1)
    }

    fn lstm(&mut self, prefix: &str) -> Result<LstmWeights> {
        Ok(LstmWeights {
            w_ih: self.a2(&format!("{prefix}.w_ih"))?,
            w_hh: self.a2(&format!("{prefix}.w_hh"))?,
            b: self.a1(&format!("{prefix}.b"))?,
        })
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let corrupt = |m: String| Error::Corrupt { kind: KIND, message: m };
    let eof = |e: std::io::Error| Error::Corrupt { kind: KIND, message: format!("truncated: {e}") };
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let mut r = Cursor::new(bytes);
    r.set_position(4);
    let version = r.read_u32::<LE>().map_err(eof)?;
    if version != MODEL_VERSION {
        return Err(Error::IncompatibleVersion { kind: KIND, found: version, expected: MODEL_VERSION });
    }
    let count = r.read_u32::<LE>().map_err(eof)?;
    let mut map = BTreeMap::new();
    for _ in 0..count {
        let n = r.read_u32::<LE>().map_err(eof)? as usize;
        if n > 256 {
            return Err(corrupt(format!("tensor name length {n}")));
        }
        let mut name = vec![0u8; n];
        r.read_exact(&mut name).map_err(eof)?;
        let name = String::from_utf8(name).map_err(|e| corrupt(e.to_string()))?;
        let ndim = r.read_u32::<LE>().map_err(eof)? as usize;
        if ndim > 4 {
            return Err(corrupt(format!("tensor {name} has {ndim} dims")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u64::<LE>().map_err(eof)? as usize);
        }
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
        if len > bytes.len() / 8 {
            return Err(corrupt(format!("tensor {name} larger than file")));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.read_f64::<LE>().map_err(eof)?);
        }
        map.insert(name, (shape, data));
    }
    if r.position() != bytes.len() as u64 {
        return Err(corrupt("trailing bytes".into()));
    }
    let mut t = TensorMap(map);
    let margin_mode = MarginMode::from_code(t.scalar("config.margin_mode")? as u32)
        .ok_or_else(|| corrupt("unknown margin mode".into()))?;
    let audio = AudioEncoderParams {
        fwd: t.lstm("audio.fwd")?,
        bwd: t.lstm("audio.bwd")?,
        proj_w: t.a2("audio.proj.w")?,
        proj_b: t.a1("audio.proj.b")?,
        dropout: t.scalar("config.dropout")?,
        norm: FeatureNorm { mean: t.vec("audio.norm.mean", 1)?, std: t.vec("audio.norm.std", 1)? },
    };
    let pose = PoseEncoderParams {
        conv_w: t.a3("pose.conv.w")?,
        conv_b: t.a1("pose.conv.b")?,
        graph_w: t.a2("pose.graph.w")?,
        proj_w: t.a2("pose.proj.w")?,
        proj_b: t.a1("pose.proj.b")?,
        adjacency: t.a2("pose.adjacency")?,
        norm: FeatureNorm { mean: t.vec("pose.norm.mean", 2)?, std: t.vec("pose.norm.std", 2)? },
    };
    let model = ModelParams {
        audio,
        pose,
        margin: t.scalar("config.margin")?,
        margin_mode,
        fps: t.scalar("config.fps")? as u32,
        version,
    };
    validate_shapes(&model).map_err(|e| corrupt(e.to_string()))?;
    Ok(model)
}

fn validate_shapes(m: &ModelParams) -> Result<()> {
    m.check()?;
    let bad = |what: &str| Err(Error::Shape(what.to_string()));
    for w in [&m.audio.fwd, &m.audio.bwd] {
        let h = w.hidden_size();
        if w.w_ih.nrows() != 4 * h || w.w_hh.nrows() != 4 * h || w.b.len() != 4 * h {
            return bad("lstm gate blocks inconsistent");
        }
        if w.input_size() != m.audio.norm.len() || m.audio.norm.std.len() != m.audio.norm.len() {
            return bad("audio normalisation width");
        }
    }
    if m.audio.fwd.hidden_size() != m.audio.bwd.hidden_size() || m.audio.proj_w.ncols() != 2 * m.audio.hidden_size() {
        return bad("audio projection width");
    }
    if m.audio.proj_w.nrows() != m.audio.proj_b.len() {
        return bad("audio projection bias");
    }
    let p = &m.pose;
    let c = p.channels();
    if p.conv_w.dim().0 != c || p.conv_w.dim().1 != 2 || p.graph_w.dim() != (c, c) {
        return bad("pose kernel shapes");
    }
    if p.proj_w.ncols() % c != 0 || p.proj_w.nrows() != p.proj_b.len() {
        return bad("pose projection shape");
    }
    if p.adjacency.nrows() != p.adjacency.ncols() || p.norm.len() != 2 * p.adjacency.nrows() {
        return bad("pose graph shape");
    }
    Ok(())
}

pub fn save_model(m: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
