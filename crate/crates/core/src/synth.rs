//! Synthetic paired dance/music data with known beat schedules.
//!
//! Each source is a click track at a fixed tempo and a COCO-18 skeleton that
//! cycles through a small vocabulary of moves. Every move oscillates once per
//! beat with its fastest motion straddling the beat frame, so the pose beats
//! are known exactly. Each move also has its own click pitch, which ties the
//! audio to the dance content.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{save_wav, AudioClip, INTERNAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::pose::{save_keypoint_sequence, Keypoint, PoseFrame, PoseSequence, Resolution};
use crate::skeleton::NUM_JOINTS;

const REST: [[f64; 2]; NUM_JOINTS] = [
    [0.0, -240.0],
    [0.0, -180.0],
    [-70.0, -180.0],
    [-90.0, -70.0],
    [-95.0, 30.0],
    [70.0, -180.0],
    [90.0, -70.0],
    [95.0, 30.0],
    [-45.0, 60.0],
    [-50.0, 210.0],
    [-55.0, 360.0],
    [45.0, 60.0],
    [50.0, 210.0],
    [55.0, 360.0],
    [-15.0, -255.0],
    [15.0, -255.0],
    [-35.0, -245.0],
    [35.0, -245.0],
];

type Offsets = [[f64; 2]; NUM_JOINTS];

struct Move {
    posture: Offsets,
    swing: Offsets,
    pitch_hz: f64,
}

fn moves() -> Vec<Move> {
    let z = [[0.0; 2]; NUM_JOINTS];
    let mut out = Vec::new();

    // arms up
    let (mut p, mut o) = (z, z);
    p[3][1] = -60.0;
    p[6][1] = -60.0;
    p[4][1] = -130.0;
    p[7][1] = -130.0;
    o[4][0] = -1.0;
    o[7][0] = 1.0;
    o[3][0] = -0.5;
    o[6][0] = 0.5;
    out.push(Move { posture: p, swing: o, pitch_hz: 300.0 });

    // arms out
    let (mut p, mut o) = (z, z);
    p[3][0] = -60.0;
    p[4][0] = -120.0;
    p[6][0] = 60.0;
    p[7][0] = 120.0;
    p[4][1] = -80.0;
    p[7][1] = -80.0;
    o[4][1] = 1.0;
    o[7][1] = 1.0;
    o[3][1] = 0.5;
    o[6][1] = 0.5;
    out.push(Move { posture: p, swing: o, pitch_hz: 500.0 });

    // squat
    let (mut p, mut o) = (z, z);
    for j in 0..9 {
        p[j][1] += 40.0;
    }
    p[8][1] += 40.0;
    p[11][1] += 40.0;
    p[9][0] = -40.0;
    p[12][0] = 40.0;
    p[9][1] += 20.0;
    p[12][1] += 20.0;
    for j in 14..NUM_JOINTS {
        p[j][1] += 40.0;
    }
    for j in 0..NUM_JOINTS {
        o[j][1] = 0.6;
    }
    o[10][1] = 0.0;
    o[13][1] = 0.0;
    out.push(Move { posture: p, swing: o, pitch_hz: 800.0 });

    // side step
    let (mut p, mut o) = (z, z);
    p[10][0] = -40.0;
    p[13][0] = 40.0;
    o[10][0] = 1.0;
    o[13][0] = 1.0;
    o[9][0] = 0.6;
    o[12][0] = 0.6;
    o[4][1] = 1.0;
    o[7][1] = -1.0;
    out.push(Move { posture: p, swing: o, pitch_hz: 1300.0 });

    // lean
    let (mut p, mut o) = (z, z);
    for j in [0, 1, 2, 5, 14, 15, 16, 17] {
        p[j][0] += 50.0;
    }
    for j in [3, 4, 6, 7] {
        p[j][0] += 60.0;
    }
    for j in [0, 1, 2, 3, 4, 5, 6, 7, 14, 15, 16, 17] {
        o[j][0] = 0.7;
    }
    out.push(Move { posture: p, swing: o, pitch_hz: 2000.0 });

    // kick
    let (mut p, mut o) = (z, z);
    p[9] = [-30.0, -60.0];
    p[10] = [-60.0, -90.0];
    o[10][1] = 1.0;
    o[9][1] = 0.5;
    o[4][0] = 1.0;
    o[7][0] = 1.0;
    out.push(Move { posture: p, swing: o, pitch_hz: 3150.0 });

    // clap
    let (mut p, mut o) = (z, z);
    p[3][0] = 20.0;
    p[6][0] = -20.0;
    p[4][0] = 90.0;
    p[7][0] = -90.0;
    p[4][1] = -120.0;
    p[7][1] = -120.0;
    o[4][0] = 1.0;
    o[7][0] = -1.0;
    out.push(Move { posture: p, swing: o, pitch_hz: 4000.0 });

    // diagonal
    let (mut p, mut o) = (z, z);
    p[3] = [-60.0, -80.0];
    p[4] = [-110.0, -190.0];
    p[6] = [50.0, 60.0];
    p[7] = [90.0, 40.0];
    o[4][1] = 1.0;
    o[7][1] = 1.0;
    o[0][0] = 0.5;
    o[1][0] = 0.5;
    out.push(Move { posture: p, swing: o, pitch_hz: 5000.0 });

    out
}

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_sources: usize,
    /// Tempo of source `i` is `bpm_list[i % len]`.
    pub bpm_list: Vec<f64>,
    pub duration_s: f64,
    pub seed: u64,
    pub fps: u32,
    pub resolution: Resolution,
    /// Peak swing of a joint with unit swing weight, pixels.
    pub swing_px: f64,
    /// Shortest and longest run of one move, beats.
    pub section_beats: (usize, usize),
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_sources: 4,
            bpm_list: vec![75.0, 90.0, 105.0, 120.0],
            duration_s: 40.0,
            seed: 7,
            fps: crate::DEFAULT_FPS,
            resolution: Resolution::default(),
            swing_px: 15.0,
            section_beats: (3, 5),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bpm_list.is_empty() || self.bpm_list.iter().any(|b| !(*b > 0.0 && *b <= 600.0)) {
            return Err(Error::invalid("bpm_list must hold tempos in (0, 600]"));
        }
        if !(self.duration_s >= 1.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid("synthetic sources must last at least 1 s"));
        }
        if self.fps == 0 {
            return Err(Error::invalid("fps must be positive"));
        }
        let (lo, hi) = self.section_beats;
        if lo < 2 || hi < lo {
            return Err(Error::invalid("section lengths must satisfy 2 <= min <= max"));
        }
        Ok(())
    }
}

/// One generated source with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSource {
    pub source_id: String,
    pub bpm: f64,
    pub poses: PoseSequence,
    pub audio: AudioClip,
    /// Frames carrying a click.
    pub beat_frames: Vec<usize>,
    /// Frames of fastest motion, one per beat.
    pub pose_beats: Vec<usize>,
}

/// Ground-truth schedule written next to the generated files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub source_id: String,
    pub bpm: f64,
    pub fps: u32,
    pub beat_frames: Vec<usize>,
    pub pose_beats: Vec<usize>,
}

/// Beat times `P/2 + kP` in frames for a beat period of `P` frames, while below `limit`.
pub fn beat_times(bpm: f64, fps: u32, limit: f64) -> Vec<f64> {
    let period = fps as f64 * 60.0 / bpm;
    (0..)
        .map(|k| 0.5 * period + k as f64 * period)
        .take_while(|&b| b < limit)
        .collect()
}

/// Beat frames: beat times rounded to the nearest frame.
pub fn beat_schedule(bpm: f64, fps: u32, limit: usize) -> Vec<usize> {
    beat_times(bpm, fps, limit as f64)
        .into_iter()
        .map(|t| t.round() as usize)
        .filter(|&b| b < limit)
        .collect()
}

/// Piecewise-linear beat phase: `k` at crossing `c_k`, linear in between,
/// extrapolated with the first and last interval.
fn beat_phase(t: f64, crossings: &[f64]) -> f64 {
    let n = crossings.len();
    if t < crossings[0] {
        return (t - crossings[0]) / (crossings[1] - crossings[0]);
    }
    let k = crossings.partition_point(|&c| c <= t) - 1;
    if k + 1 >= n {
        return (n - 1) as f64 + (t - crossings[n - 1]) / (crossings[n - 1] - crossings[n - 2]);
    }
    k as f64 + (t - crossings[k]) / (crossings[k + 1] - crossings[k])
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

/// Posture blend over one beat of phase; steepest at the centre.
fn transition(u: f64) -> f64 {
    smoothstep(smoothstep(u))
}

/// Move index per beat, in sections of `lo..=hi` beats, drawn from shuffled
/// bags of the vocabulary so consecutive sections differ.
fn section_plan(beats: usize, n_moves: usize, (lo, hi): (usize, usize), rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut plan = Vec::with_capacity(beats + hi);
    let mut bag: Vec<usize> = Vec::new();
    let mut prev = usize::MAX;
    while plan.len() < beats {
        if bag.is_empty() {
            bag = (0..n_moves).collect();
            bag.shuffle(rng);
            if bag[0] == prev {
                bag.rotate_left(1);
            }
        }
        let m = bag.remove(0);
        let len = rng.gen_range(lo..=hi);
        plan.extend(std::iter::repeat(m).take(len));
        prev = m;
    }
    plan
}

/// Generate one source. `pose_lags[k]` delays the motion of beat `k` by that
/// many frames relative to its click (0 when absent).
pub fn synth_source(spec: &SynthSpec, index: usize, pose_lags: &[usize], rng: &mut ChaCha8Rng) -> Result<SynthSource> {
    spec.validate()?;
    let bpm = spec.bpm_list[index % spec.bpm_list.len()];
    let fps = spec.fps;
    let n = (spec.duration_s * fps as f64).round() as usize;
    let period = fps as f64 * 60.0 / bpm;
    // Schedule continues past the end so the phase is defined everywhere.
    let times = beat_times(bpm, fps, n as f64 + 2.0 * period + 2.0);
    if times.len() < 2 {
        return Err(Error::invalid("source too short for two beats"));
    }
    let all_beats: Vec<usize> = times.iter().map(|t| t.round() as usize).collect();
    let lag = |k: usize| pose_lags.get(k).copied().unwrap_or(0);
    // The fastest motion of beat k falls between frames b_k - 1 and b_k.
    let crossings: Vec<f64> = times.iter().enumerate().map(|(k, &t)| t - 0.5 + lag(k) as f64).collect();
    if crossings.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("pose lags reorder the beats"));
    }

    let vocab = moves();
    let plan = section_plan(all_beats.len() + 1, vocab.len(), spec.section_beats, rng);
    let scale = rng.gen_range(0.85..1.15);
    let (w, h) = (spec.resolution.width as f64, spec.resolution.height as f64);
    let centre = [w / 2.0 + rng.gen_range(-150.0..150.0) * w / 1920.0, h / 2.0 + rng.gen_range(-60.0..60.0) * h / 1080.0];
    let polarity = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let unit = scale * h / 1080.0;

    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let phase = beat_phase(f as f64, &crossings);
        let kb = phase.floor().max(-1.0) as i64;
        let at = |k: i64| plan[k.max(0) as usize];
        let cur = at(kb);
        // Posture changes within half a beat either side of the first click of a move.
        let near = phase.round() as i64;
        let (from, to, blend) = if near >= 1 && at(near) != at(near - 1) {
            (at(near - 1), at(near), transition(phase - near as f64 + 0.5))
        } else {
            (at(near), at(near), 1.0)
        };
        let swing = polarity * spec.swing_px * (PI * phase).sin();
        let mut kps = [Keypoint::default(); NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            let mut xy = [0.0; 2];
            for a in 0..2 {
                let posture = blend * vocab[to].posture[j][a] + (1.0 - blend) * vocab[from].posture[j][a];
                xy[a] = centre[a] + unit * (REST[j][a] + posture + vocab[cur].swing[j][a] * swing);
            }
            kps[j] = Keypoint::new(xy[0], xy[1], 1.0);
        }
        frames.push(PoseFrame::new(f, kps));
    }
    let poses = PoseSequence::new(frames, fps, spec.resolution);

    let sr = INTERNAL_SAMPLE_RATE;
    let ns = (spec.duration_s * sr as f64).round() as usize;
    let mut samples = vec![0.0; ns];
    let click_len = (0.04 * sr as f64) as usize;
    for (k, &b) in all_beats.iter().enumerate() {
        let s0 = (b as f64 * sr as f64 / fps as f64).round() as usize;
        if s0 >= ns {
            break;
        }
        let pitch = vocab[plan[k]].pitch_hz;
        for (i, s) in samples[s0..(s0 + click_len).min(ns)].iter_mut().enumerate() {
            let t = i as f64 / sr as f64;
            let env = (-t / 0.012).exp();
            *s += 0.5 * env * (2.0 * PI * pitch * t).sin() + 0.15 * env * rng.gen_range(-1.0..1.0);
        }
    }
    // Quiet pad at half the click pitch of the current move.
    let audio_cross: Vec<f64> = all_beats.iter().map(|&b| b as f64).collect();
    for (i, s) in samples.iter_mut().enumerate() {
        let t = i as f64 / sr as f64;
        let phase = beat_phase(t * fps as f64, &audio_cross);
        let pitch = vocab[plan[phase.floor().max(0.0) as usize]].pitch_hz;
        *s += 0.05 * (PI * pitch * t).sin();
    }
    let audio = AudioClip::new(samples, sr)?;

    let beat_frames: Vec<usize> = all_beats.iter().copied().filter(|&b| b < n).collect();
    let pose_beats: Vec<usize> = all_beats
        .iter()
        .enumerate()
        .map(|(k, &b)| b + lag(k))
        .filter(|&b| b < n)
        .collect();
    Ok(SynthSource {
        source_id: format!("src{index:03}"),
        bpm,
        poses,
        audio,
        beat_frames,
        pose_beats,
    })
}

/// Generate `spec.n_sources` sources, deterministic under `spec.seed`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Vec<SynthSource>> {
    synth_dataset_with_lags(spec, |_| Vec::new())
}

/// As [`synth_dataset`] with per-source pose lags per beat.
pub fn synth_dataset_with_lags(spec: &SynthSpec, lags: impl Fn(usize) -> Vec<usize>) -> Result<Vec<SynthSource>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_sources).map(|i| synth_source(spec, i, &lags(i), &mut rng)).collect()
}

/// Write `<id>.json` + `<id>.wav` per source into `dir`, and the ground-truth
/// schedules into `dir/truth/<id>.json`.
pub fn write_dataset(sources: &[SynthSource], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let truth_dir = dir.join("truth");
    std::fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;
    for s in sources {
        save_keypoint_sequence(&s.poses, dir.join(format!("{}.json", s.source_id)))?;
        save_wav(&s.audio, dir.join(format!("{}.wav", s.source_id)))?;
        let truth = SynthTruth {
            source_id: s.source_id.clone(),
            bpm: s.bpm,
            fps: s.poses.fps,
            beat_frames: s.beat_frames.clone(),
            pose_beats: s.pose_beats.clone(),
        };
        let path = truth_dir.join(format!("{}.json", s.source_id));
        let text = serde_json::to_string_pretty(&truth).expect("plain data serialises");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::find_pose_beats_near;

    fn spec(seed: u64) -> SynthSpec {
        SynthSpec { n_sources: 2, bpm_list: vec![120.0], duration_s: 10.0, seed, ..SynthSpec::default() }
    }

    #[test]
    fn schedule_at_120_bpm() {
        let s = synth_dataset(&spec(1)).unwrap();
        let b = &s[0].beat_frames;
        assert_eq!(b[0], 6);
        assert!(b.windows(2).all(|w| w[1] - w[0] == 12));
        assert_eq!(b.len(), 20);
        assert_eq!(s[0].poses.len(), 240);
        assert_eq!(s[0].audio.samples.len(), 160_000);
    }

    #[test]
    fn seeds_change_motion_not_schedule() {
        let a = synth_dataset(&spec(1)).unwrap();
        let b = synth_dataset(&spec(2)).unwrap();
        assert_eq!(a[0].beat_frames, b[0].beat_frames);
        assert_ne!(a[0].poses, b[0].poses);
        assert_eq!(synth_dataset(&spec(1)).unwrap(), a);
    }

    #[test]
    fn movement_peaks_on_pose_beats() {
        for bpm in [75.0, 90.0, 105.0, 120.0] {
            let sp = SynthSpec { n_sources: 1, bpm_list: vec![bpm], duration_s: 20.0, ..SynthSpec::default() };
            let s = &synth_dataset(&sp).unwrap()[0];
            let period = (24.0 * 60.0 / bpm).round() as usize;
            let found = find_pose_beats_near(&s.poses, &s.beat_frames, period);
            let hits = found.iter().zip(&s.pose_beats).filter(|(f, b)| f == b).count();
            assert!(hits as f64 >= 0.9 * found.len() as f64, "bpm {bpm}: {hits}/{} {:?} {:?}", found.len(), found, s.pose_beats);
        }
    }

    #[test]
    fn lags_shift_pose_beats() {
        let sp = spec(3);
        let lagged = synth_dataset_with_lags(&sp, |_| vec![4; 40]).unwrap();
        let s = &lagged[0];
        assert!(s.pose_beats.iter().zip(&s.beat_frames).all(|(p, b)| *p == b + 4));
    }
}
