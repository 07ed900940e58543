use super::mfcc::{frame_power_spectra, mel_filterbank, Window};
use super::AudioClip;
use crate::error::{Error, Result};

/// Detected musical beats in video-frame units.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatTrack {
    pub beat_frames: Vec<usize>,
    pub tempo_bpm: f64,
}

impl BeatTrack {
    pub fn empty() -> Self {
        BeatTrack {
            beat_frames: Vec::new(),
            tempo_bpm: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.beat_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat_frames.is_empty()
    }

    /// Median spacing between consecutive beats, if there are at least two.
    pub fn median_spacing(&self) -> Option<usize> {
        let mut gaps: Vec<usize> = self.beat_frames.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_unstable();
        Some(gaps[gaps.len() / 2])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeatTrackerConfig {
    pub min_bpm: f64,
    pub max_bpm: f64,
    /// Centre of the log-normal tempo prior.
    pub prior_bpm: f64,
    /// Width of the prior in octaves.
    pub prior_octaves: f64,
    pub mel_bands: usize,
    /// Dynamic range kept below the loudest mel bin, in dB.
    pub top_db: f64,
}

impl Default for BeatTrackerConfig {
    fn default() -> Self {
        BeatTrackerConfig {
            min_bpm: 40.0,
            max_bpm: 240.0,
            prior_bpm: 120.0,
            prior_octaves: 1.0,
            mel_bands: 40,
            top_db: 80.0,
        }
    }
}

/// Onset strength per video frame: half-wave rectified flux of the
/// log-mel spectrum. Frame 0 is 0.
pub fn onset_envelope(clip: &AudioClip, video_fps: u32, mel_bands: usize, top_db: f64) -> Vec<f64> {
    let spec = frame_power_spectra(&clip.samples, clip.sample_rate, video_fps, Window::Hann);
    let bank = mel_filterbank(mel_bands, spec.nfft, clip.sample_rate, 0.0, clip.sample_rate as f64 / 2.0);
    let db: Vec<Vec<f64>> = spec
        .spectra
        .iter()
        .map(|p| {
            bank.iter()
                .map(|f| {
                    let e: f64 = f.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                    10.0 * e.max(1e-10).log10()
                })
                .collect()
        })
        .collect();
    let peak = db.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = peak - top_db;
    let mut env = vec![0.0; db.len()];
    for i in 1..db.len() {
        env[i] = db[i]
            .iter()
            .zip(db[i - 1].iter())
            .map(|(&a, &b)| (a.max(floor) - b.max(floor)).max(0.0))
            .sum();
    }
    env
}

pub fn detect_beats(clip: &AudioClip, video_fps: u32) -> Result<BeatTrack> {
    detect_beats_with(clip, video_fps, &BeatTrackerConfig::default())
}

/// Spectral-flux onsets, autocorrelation tempo, then greedy peak picking
/// around a periodic grid.
pub fn detect_beats_with(clip: &AudioClip, video_fps: u32, cfg: &BeatTrackerConfig) -> Result<BeatTrack> {
    if clip.duration_s() < 2.0 {
        return Err(Error::invalid(format!(
            "beat tracking needs at least 2 s of audio, got {:.2} s",
            clip.duration_s()
        )));
    }
    if clip.samples.iter().all(|s| s.abs() < 1e-6) {
        return Ok(BeatTrack::empty());
    }
    let env = onset_envelope(clip, video_fps, cfg.mel_bands, cfg.top_db);
    let n = env.len();
    let mean = env.iter().sum::<f64>() / n as f64;
    if env.iter().all(|&e| e <= 1e-9) {
        return Ok(BeatTrack::empty());
    }
    let Some(period) = estimate_period(&env, mean, video_fps as f64, cfg) else {
        return Ok(BeatTrack::empty());
    };
    let beats = pick_beats(&env, mean, period);
    Ok(BeatTrack {
        beat_frames: beats,
        tempo_bpm: 60.0 * video_fps as f64 / period,
    })
}

fn estimate_period(env: &[f64], mean: f64, fps: f64, cfg: &BeatTrackerConfig) -> Option<f64> {
    let n = env.len();
    let lag_min = ((60.0 * fps / cfg.max_bpm).floor() as usize).max(1);
    let lag_max = ((60.0 * fps / cfg.min_bpm).ceil() as usize).min(n.saturating_sub(2));
    if lag_min + 1 > lag_max {
        return None;
    }
    let centred: Vec<f64> = env.iter().map(|e| e - mean).collect();
    let ac: Vec<f64> = (0..=lag_max + 1)
        .map(|lag| {
            if lag >= n {
                0.0
            } else {
                centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (lag, &a) in ac.iter().enumerate().take(lag_max + 1).skip(lag_min) {
        if a <= 0.0 {
            continue;
        }
        let bpm = 60.0 * fps / lag as f64;
        let z = (bpm / cfg.prior_bpm).log2() / cfg.prior_octaves;
        let score = a * (-0.5 * z * z).exp();
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((lag, score));
        }
    }
    let (lag, _) = best?;
    let (l, c, r) = (ac[lag - 1], ac[lag], ac[lag + 1]);
    let denom = l - 2.0 * c + r;
    let shift = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Some(lag as f64 + shift)
}

fn argmax_near(env: &[f64], expected: f64, radius: usize) -> Option<usize> {
    let centre = expected.round();
    if centre < -(radius as f64) {
        return None;
    }
    let lo = (centre - radius as f64).max(0.0) as usize;
    let hi = ((centre + radius as f64) as usize).min(env.len() - 1);
    if lo > hi {
        return None;
    }
    (lo..=hi).fold(None, |best: Option<usize>, i| match best {
        None => Some(i),
        Some(b) => {
            let closer = (i as f64 - expected).abs() < (b as f64 - expected).abs();
            if env[i] > env[b] || (env[i] == env[b] && closer) {
                Some(i)
            } else {
                Some(b)
            }
        }
    })
}

fn pick_beats(env: &[f64], mean: f64, period: f64) -> Vec<usize> {
    let n = env.len();
    let phases = period.ceil() as usize;
    let mut best_phase = 0;
    let mut best_score = f64::NEG_INFINITY;
    for phase in 0..phases.min(n) {
        let mut score = 0.0;
        let mut t = phase as f64;
        while (t.round() as usize) < n {
            score += env[t.round() as usize];
            t += period;
        }
        if score > best_score {
            best_score = score;
            best_phase = phase;
        }
    }
    let radius = ((period / 8.0).round() as usize).max(1);
    let mut beats: Vec<usize> = Vec::new();
    let mut expected = best_phase as f64;
    while expected.round() < n as f64 {
        let Some(pick) = argmax_near(env, expected, radius) else {
            break;
        };
        let beat = if env[pick] > mean { pick } else { expected.round() as usize };
        if beats.last().map_or(true, |&b| beat > b) && beat < n {
            beats.push(beat);
        }
        expected = if env[pick] > mean { pick as f64 } else { expected } + period;
    }
    beats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_bounds, INTERNAL_SAMPLE_RATE};

    pub(crate) fn click_track(bpm: f64, seconds: f64, offset_frames: usize, gain: f64) -> (AudioClip, Vec<usize>) {
        let sr = INTERNAL_SAMPLE_RATE;
        let n = (seconds * sr as f64) as usize;
        let mut x = vec![0.0; n];
        let period = 24.0 * 60.0 / bpm;
        let mut beats = Vec::new();
        let mut t = offset_frames as f64;
        while (t.floor() as usize) < n * 24 / sr as usize {
            let f = t.floor() as usize;
            let (s, _) = frame_bounds(f, sr, 24);
            for k in 0..640.min(n - s) {
                let tt = k as f64 / sr as f64;
                x[s + k] += gain * 0.6 * (-tt / 0.01).exp() * (2.0 * std::f64::consts::PI * 1000.0 * tt).sin();
            }
            beats.push(f);
            t += period;
        }
        (AudioClip::new(x, sr).unwrap(), beats)
    }

    fn spacing_ok(track: &BeatTrack, period: usize) {
        assert!(track.len() > 3, "{track:?}");
        for w in track.beat_frames.windows(2) {
            let d = w[1] - w[0];
            assert!(d + 1 >= period && d <= period + 1, "spacing {d} in {track:?}");
        }
    }

    #[test]
    fn click_120_bpm() {
        let (clip, truth) = click_track(120.0, 10.0, 6, 1.0);
        let t = detect_beats(&clip, 24).unwrap();
        spacing_ok(&t, 12);
        assert!((t.tempo_bpm - 120.0).abs() <= 2.0, "{}", t.tempo_bpm);
        assert_eq!(t.beat_frames, truth);
    }

    #[test]
    fn click_60_bpm() {
        let (clip, _) = click_track(60.0, 12.0, 3, 1.0);
        let t = detect_beats(&clip, 24).unwrap();
        spacing_ok(&t, 24);
    }

    #[test]
    fn silence_has_no_beats() {
        let clip = AudioClip::new(vec![0.0; 48_000], 16_000).unwrap();
        let t = detect_beats(&clip, 24).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.tempo_bpm, 0.0);
    }

    #[test]
    fn short_clip_rejected() {
        let clip = AudioClip::new(vec![0.0; 16_000], 16_000).unwrap();
        assert!(detect_beats(&clip, 24).is_err());
    }

    #[test]
    fn shift_and_gain_invariance() {
        let (a, _) = click_track(100.0, 10.0, 4, 1.0);
        let (b, _) = click_track(100.0, 10.0, 9, 1.0);
        let ta = detect_beats(&a, 24).unwrap();
        let tb = detect_beats(&b, 24).unwrap();
        for (x, y) in ta.beat_frames.iter().zip(tb.beat_frames.iter()) {
            assert!((*y as i64 - *x as i64 - 5).abs() <= 1, "{ta:?} {tb:?}");
        }
        for g in [0.5, 2.0] {
            let tg = detect_beats(&a.scaled(g), 24).unwrap();
            assert_eq!(tg.beat_frames, ta.beat_frames);
        }
    }
}
