use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioClip;
use crate::error::{Error, Result};

pub const MFCC_DIM: usize = 13;
pub const MEL_FILTERS: usize = 26;
pub const PRE_EMPHASIS: f64 = 0.97;

/// One 13-d vector per video frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccSequence {
    pub frames: Vec<[f64; MFCC_DIM]>,
    pub frame_rate: u32,
}

impl MfccSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Fixed-length MFCC window aligned with a pose fragment.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccFragment {
    pub source_id: String,
    pub start_frame: usize,
    pub frames: Vec<[f64; MFCC_DIM]>,
}

impl MfccFragment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Sample range `[start, end)` of video frame `i`, rounding half up.
pub fn frame_bounds(i: usize, sample_rate: u32, fps: u32) -> (usize, usize) {
    let at = |k: usize| ((k as u64 * sample_rate as u64 * 2 + fps as u64) / (2 * fps as u64)) as usize;
    (at(i), at(i + 1))
}

/// Whole video frames covered by `n_samples`.
pub fn frame_count(n_samples: usize, sample_rate: u32, fps: u32) -> usize {
    (n_samples as u64 * fps as u64 / sample_rate as u64) as usize
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over `nfft / 2 + 1` bins, evenly spaced on the mel scale.
pub fn mel_filterbank(n_filters: usize, nfft: usize, sample_rate: u32, low_hz: f64, high_hz: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
    let bins: Vec<usize> = (0..n_filters + 2)
        .map(|k| {
            let mel = lo + (hi - lo) * k as f64 / (n_filters + 1) as f64;
            ((nfft + 1) as f64 * mel_to_hz(mel) / sample_rate as f64).floor() as usize
        })
        .collect();
    let n_bins = nfft / 2 + 1;
    (0..n_filters)
        .map(|j| {
            let mut f = vec![0.0; n_bins];
            let (a, b, c) = (bins[j], bins[j + 1], bins[j + 2]);
            for (i, v) in f.iter_mut().enumerate().take(b.min(n_bins)).skip(a) {
                *v = (i - a) as f64 / (b - a) as f64;
            }
            for (i, v) in f.iter_mut().enumerate().take(c.min(n_bins)).skip(b) {
                *v = (c - i) as f64 / (c - b) as f64;
            }
            f
        })
        .collect()
}

pub(crate) enum Window {
    Hamming,
    Hann,
}

/// Per-video-frame power spectra `|X|^2 / nfft`.
pub(crate) struct FramePowerSpectra {
    pub nfft: usize,
    pub spectra: Vec<Vec<f64>>,
}

pub(crate) fn frame_power_spectra(signal: &[f64], sample_rate: u32, fps: u32, window: Window) -> FramePowerSpectra {
    let n_frames = frame_count(signal.len(), sample_rate, fps);
    let max_len = (0..n_frames.min(2 * fps as usize + 1))
        .map(|i| {
            let (s, e) = frame_bounds(i, sample_rate, fps);
            e - s
        })
        .max()
        .unwrap_or(1);
    let nfft = max_len.next_power_of_two();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(nfft);
    let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut spectra = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let (s, e) = frame_bounds(i, sample_rate, fps);
        let len = e - s;
        let w = match cache.iter().position(|(l, _)| *l == len) {
            Some(p) => &cache[p].1,
            None => {
                cache.push((len, make_window(&window, len)));
                &cache.last().unwrap().1
            }
        };
        for v in buf.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for (k, (&x, &wk)) in signal[s..e].iter().zip(w.iter()).enumerate() {
            buf[k].re = x * wk;
        }
        fft.process(&mut buf);
        spectra.push(buf[..nfft / 2 + 1].iter().map(|c| c.norm_sqr() / nfft as f64).collect());
    }
    FramePowerSpectra { nfft, spectra }
}

fn make_window(kind: &Window, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let c = (2.0 * PI * k as f64 / m).cos();
            match kind {
                Window::Hamming => 0.54 - 0.46 * c,
                Window::Hann => 0.5 - 0.5 * c,
            }
        })
        .collect()
}

/// MFCCs with one non-overlapping window per video frame.
///
/// Chain: pre-emphasis, Hamming window, zero-padded FFT, 26 mel filters from
/// 0 Hz to Nyquist, natural log (zero energies floored at machine epsilon),
/// orthonormal DCT-II, coefficients 0 through 12.
pub fn compute_mfcc(clip: &AudioClip, video_fps: u32) -> Result<MfccSequence> {
    if video_fps == 0 {
        return Err(Error::invalid("video fps must be positive"));
    }
    let sr = clip.sample_rate;
    if frame_count(clip.samples.len(), sr, video_fps) == 0 {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than one {:.2} ms window",
            clip.samples.len(),
            1000.0 / video_fps as f64
        )));
    }
    let x = &clip.samples;
    let mut emph = Vec::with_capacity(x.len());
    emph.push(x[0]);
    for i in 1..x.len() {
        emph.push(x[i] - PRE_EMPHASIS * x[i - 1]);
    }
    let spec = frame_power_spectra(&emph, sr, video_fps, Window::Hamming);
    let bank = mel_filterbank(MEL_FILTERS, spec.nfft, sr, 0.0, sr as f64 / 2.0);
    let dct = dct_matrix(MEL_FILTERS, MFCC_DIM);
    let frames = spec
        .spectra
        .iter()
        .map(|p| {
            let log_e: Vec<f64> = bank
                .iter()
                .map(|f| {
                    let e: f64 = f.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                    if e == 0.0 { f64::EPSILON } else { e }.ln()
                })
                .collect();
            let mut c = [0.0; MFCC_DIM];
            for (k, row) in dct.iter().enumerate() {
                c[k] = row.iter().zip(log_e.iter()).map(|(a, b)| a * b).sum();
            }
            c
        })
        .collect();
    Ok(MfccSequence {
        frames,
        frame_rate: video_fps,
    })
}

fn dct_matrix(n: usize, keep: usize) -> Vec<Vec<f64>> {
    (0..keep)
        .map(|k| {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Cut an MFCC stream into the same windows `segment_fragments` uses for poses.
pub fn segment_audio(mfcc: &MfccSequence, source_id: &str, duration_s: u32) -> Result<Vec<MfccFragment>> {
    crate::pose::segment_windows(mfcc.len(), duration_s, mfcc.frame_rate).map(|ranges| {
        ranges
            .map(|(s, e)| MfccFragment {
                source_id: source_id.to_string(),
                start_frame: s,
                frames: mfcc.frames[s..e].to_vec(),
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, seconds: f64, sr: u32) -> AudioClip {
        let n = (seconds * sr as f64) as usize;
        AudioClip::new((0..n).map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin()).collect(), sr).unwrap()
    }

    #[test]
    fn one_second_gives_24_frames() {
        let m = compute_mfcc(&tone(440.0, 1.0, 16_000), 24).unwrap();
        assert_eq!(m.len(), 24);
        assert_eq!(m.frame_rate, 24);
    }

    #[test]
    fn frame_count_is_floor() {
        for n in [667usize, 1000, 16_000, 16_001, 23_456] {
            let clip = AudioClip::new(vec![0.1; n], 16_000).unwrap();
            let m = compute_mfcc(&clip, 24).unwrap();
            assert_eq!(m.len(), n * 24 / 16_000);
        }
    }

    #[test]
    fn silence_frames_identical() {
        let clip = AudioClip::new(vec![0.0; 16_000], 16_000).unwrap();
        let m = compute_mfcc(&clip, 24).unwrap();
        assert!(m.frames.iter().all(|f| f == &m.frames[0]));
    }

    #[test]
    fn too_short_is_error() {
        let clip = AudioClip::new(vec![0.0; 600], 16_000).unwrap();
        assert!(compute_mfcc(&clip, 24).is_err());
    }

    #[test]
    fn frame_bounds_tile_the_signal() {
        let mut prev = 0;
        for i in 0..100 {
            let (s, e) = frame_bounds(i, 16_000, 24);
            assert_eq!(s, prev);
            assert!(e - s == 666 || e - s == 667);
            prev = e;
        }
    }

    #[test]
    fn filterbank_rows_peak_at_one() {
        let bank = mel_filterbank(26, 1024, 16_000, 0.0, 8000.0);
        assert_eq!(bank.len(), 26);
        for f in &bank {
            let m = f.iter().cloned().fold(0.0, f64::max);
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn audio_windows_match_pose_windows() {
        let m = MfccSequence { frames: vec![[0.0; MFCC_DIM]; 100], frame_rate: 24 };
        assert_eq!(segment_audio(&m, "a", 1).unwrap().len(), 4);
        let m = MfccSequence { frames: vec![[0.0; MFCC_DIM]; 96], frame_rate: 24 };
        assert_eq!(segment_audio(&m, "a", 4).unwrap().len(), 1);
    }
}
