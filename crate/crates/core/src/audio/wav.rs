use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, INTERNAL_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Read a PCM WAV file, average its channels and resample to 16 kHz.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(std::io::BufReader::new(file))
}

pub fn decode_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = WavReader::new(reader).map_err(wav_error)?;
    let spec = wav.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedEncoding("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            wav.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_error)?
        }
        (SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (fmt, bits) => {
            let name = match fmt {
                SampleFormat::Int => "integer PCM",
                SampleFormat::Float => "IEEE float",
            };
            return Err(Error::UnsupportedEncoding(format!("{bits}-bit {name}")));
        }
    };
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|c| (c.iter().sum::<f64>() / channels as f64).clamp(-1.0, 1.0))
        .collect();
    let samples = resample(&mono, spec.sample_rate, INTERNAL_SAMPLE_RATE);
    AudioClip::new(samples, INTERNAL_SAMPLE_RATE)
}

fn wav_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Parse {
            origin: "wav".into(),
            message: io.to_string(),
        },
        hound::Error::Unsupported => Error::UnsupportedEncoding("WAV format tag not PCM or IEEE float".into()),
        other => Error::UnsupportedEncoding(other.to_string()),
    }
}

/// Write a clip as 16-bit PCM mono.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    };
    let mut w = WavWriter::create(path, spec).map_err(io)?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(io)?;
    }
    w.finalize().map_err(io)
}

const ZERO_CROSSINGS: f64 = 16.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.is_empty() {
        return x.to_vec();
    }
    let step = from as f64 / to as f64;
    let cutoff = (to as f64 / from as f64).min(1.0) * 0.97;
    let half = ZERO_CROSSINGS / cutoff;
    let n_out = (x.len() as u64 * to as u64 / from as u64) as usize;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let t = i as f64 * step;
        let k0 = ((t - half).ceil().max(0.0)) as usize;
        let k1 = ((t + half).floor() as usize).min(x.len() - 1);
        let mut acc = 0.0;
        for (k, &xk) in x.iter().enumerate().take(k1 + 1).skip(k0) {
            let d = t - k as f64;
            let u = d / half;
            let window = 0.5 * (1.0 + (PI * u).cos());
            let arg = PI * cutoff * d;
            let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
            acc += xk * cutoff * sinc * window;
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    out
}
