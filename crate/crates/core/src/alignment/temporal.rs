use nalgebra::{DMatrix, DVector};

use super::tsd::least_squares;
use crate::error::{Error, Result};
use crate::pose::PoseSequence;
use crate::skeleton::NUM_JOINTS;

fn argmax_earliest(movement: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for j in lo + 1..hi {
        if movement[j] > movement[best] {
            best = j;
        }
    }
    best
}

/// One pose beat per non-overlapping `omega_c`-frame window starting at
/// frame 0: the frame with the largest summed joint displacement from its
/// predecessor, earliest on ties.
pub fn find_pose_beats(seq: &PoseSequence, omega_c: usize) -> Vec<usize> {
    find_pose_beats_from(seq, omega_c, 0)
}

/// As [`find_pose_beats`] with the window grid starting at `origin`.
pub fn find_pose_beats_from(seq: &PoseSequence, omega_c: usize, origin: usize) -> Vec<usize> {
    if omega_c == 0 || origin >= seq.len() {
        return Vec::new();
    }
    let movement = seq.movement();
    let windows = (seq.len() - origin) / omega_c;
    (0..windows)
        .map(|w| {
            let lo = origin + w * omega_c;
            argmax_earliest(&movement, lo, lo + omega_c)
        })
        .collect()
}

/// Grid origin that centres `omega_c`-frame windows on the beats of a track
/// whose first beat is `first_beat`.
pub fn centred_origin(first_beat: usize, omega_c: usize) -> usize {
    if omega_c == 0 {
        return 0;
    }
    let half = omega_c / 2;
    (first_beat + omega_c - half % omega_c) % omega_c
}

/// One pose beat per musical beat: the frame of largest movement strictly
/// inside that beat's window (see [`beat_window_bounds`]).
pub fn find_pose_beats_near(seq: &PoseSequence, beats: &[usize], omega_c: usize) -> Vec<usize> {
    if seq.len() < 3 {
        return Vec::new();
    }
    let movement = seq.movement();
    beat_window_bounds(beats, omega_c, seq.len())
        .into_iter()
        .filter(|&(lo, _, hi)| hi >= lo + 2)
        .map(|(lo, _, hi)| argmax_earliest(&movement, lo + 1, hi))
        .collect()
}

/// Least-squares cubic through `(t, y)` that passes exactly through the first
/// and last sample, evaluated at each of `at`.
fn anchored_cubic(t: &[f64], y: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    let n = t.len();
    let (a, c) = (t[0], t[n - 1]);
    let (y0, y1) = (y[0], y[n - 1]);
    let span = c - a;
    let w = |x: f64| (x - a) / span;
    let base = |x: f64| y0 + (y1 - y0) * w(x);
    let free = (n - 2).min(2);
    let mut beta = vec![0.0; 2];
    if free > 0 {
        let interior = n - 2;
        let x = DMatrix::from_fn(interior, free, |i, m| {
            let u = w(t[i + 1]);
            u * (u - 1.0) * u.powi(m as i32)
        });
        let r = DVector::from_fn(interior, |i, _| y[i + 1] - base(t[i + 1]));
        let b = least_squares(x, r)?;
        beta[..free].copy_from_slice(b.as_slice());
    }
    Ok(at
        .iter()
        .map(|&x| {
            let u = w(x);
            base(x) + u * (u - 1.0) * (beta[0] + beta[1] * u)
        })
        .collect())
}

/// Window boundaries around each beat: midpoints between neighbouring beats,
/// half a window before the first and after the last, clamped to the sequence.
pub fn beat_window_bounds(beats: &[usize], omega_c: usize, len: usize) -> Vec<(usize, usize, usize)> {
    let half = omega_c / 2;
    let mut out = Vec::with_capacity(beats.len());
    for (k, &b) in beats.iter().enumerate() {
        if b >= len {
            break;
        }
        let lo = if k == 0 { b.saturating_sub(half) } else { (beats[k - 1] + b) / 2 };
        let hi = match beats.get(k + 1) {
            Some(&next) => (b + next) / 2,
            None => b + half,
        }
        .min(len - 1);
        out.push((lo, b, hi));
    }
    out
}

/// Move each window's pose beat onto its musical beat.
///
/// The window around beat `b` runs between fixed boundary frames `lo` and
/// `hi`. With the pose beat `μ` found inside, the samples on `[lo, μ]` are
/// stretched onto `[lo, b]` and those on `[μ, hi]` onto `[b, hi]`; each half
/// is resampled at integer frames through a least-squares cubic that keeps
/// its end samples, so the boundary frames are unchanged and frame `b` takes
/// the old pose beat's value. Windows whose pose beat already sits on the
/// beat are left as they are.
pub fn temporal_align(seq: &PoseSequence, beats: &[usize], omega_c: usize) -> Result<PoseSequence> {
    if omega_c < 2 {
        return Err(Error::invalid("omega_c must be at least 2"));
    }
    if beats.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("beat frames must be strictly increasing"));
    }
    let mut out = seq.clone();
    if seq.len() < 3 {
        return Ok(out);
    }
    let movement = seq.movement();
    for (lo, b, hi) in beat_window_bounds(beats, omega_c, seq.len()) {
        if !(lo < b && b < hi) || hi - lo < 2 {
            continue;
        }
        let mu = argmax_earliest(&movement, lo + 1, hi);
        if mu == b {
            continue;
        }
        let first: Vec<f64> = (lo + 1..=b)
            .map(|x| lo as f64 + (x - lo) as f64 * (mu - lo) as f64 / (b - lo) as f64)
            .collect();
        let second: Vec<f64> = (b + 1..hi)
            .map(|x| mu as f64 + (x - b) as f64 * (hi - mu) as f64 / (hi - b) as f64)
            .collect();
        let t1: Vec<f64> = (lo..=mu).map(|v| v as f64).collect();
        let t2: Vec<f64> = (mu..=hi).map(|v| v as f64).collect();
        for joint in 0..NUM_JOINTS {
            for axis in 0..2 {
                let p = seq.coordinate_series(joint, axis);
                let a = anchored_cubic(&t1, &p[lo..=mu], &first)?;
                let c = anchored_cubic(&t2, &p[mu..=hi], &second)?;
                for (x, v) in (lo + 1..=b).zip(a) {
                    out.set_coordinate(x, joint, axis, v);
                }
                for (x, v) in (b + 1..hi).zip(c) {
                    out.set_coordinate(x, joint, axis, v);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Keypoint, PoseFrame, Resolution};

    fn seq_from(xs: &[f64]) -> PoseSequence {
        PoseSequence::new(
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let mut kps = [Keypoint::new(500.0, 500.0, 1.0); NUM_JOINTS];
                    kps[7] = Keypoint::new(x, 500.0, 1.0);
                    PoseFrame::new(i, kps)
                })
                .collect(),
            24,
            Resolution::default(),
        )
    }

    #[test]
    fn constant_sequence_takes_window_start() {
        assert_eq!(find_pose_beats(&seq_from(&[3.0; 50]), 12), vec![0, 12, 24, 36]);
    }

    #[test]
    fn single_spike_found() {
        let mut xs = vec![0.0; 24];
        xs[7..].iter_mut().for_each(|x| *x = 30.0);
        assert_eq!(find_pose_beats(&seq_from(&xs), 12), vec![7, 12]);
    }

    #[test]
    fn centred_grid() {
        assert_eq!(centred_origin(6, 12), 0);
        assert_eq!(centred_origin(10, 12), 4);
        assert_eq!(centred_origin(2, 12), 8);
    }

    #[test]
    fn anchored_cubic_keeps_ends_and_fits_cubics() {
        let t: Vec<f64> = (0..7).map(|v| v as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 1.0 + x - 0.5 * x * x + 0.1 * x * x * x).collect();
        let at = [0.0, 2.5, 6.0];
        let v = anchored_cubic(&t, &y, &at).unwrap();
        for (x, got) in at.iter().zip(v) {
            assert!((got - (1.0 + x - 0.5 * x * x + 0.1 * x * x * x)).abs() < 1e-9);
        }
    }

    #[test]
    fn aligned_input_unchanged() {
        let xs: Vec<f64> = (0..48).map(|i| 10.0 * ((i as f64 - 5.5) / 12.0 * std::f64::consts::PI).sin().signum()).collect();
        let s = seq_from(&xs);
        let beats: Vec<usize> = find_pose_beats_from(&s, 12, 0);
        let out = temporal_align(&s, &beats, 12).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn pose_beat_moves_to_audio_beat() {
        // One smooth step per beat, centred 3 frames after the beat.
        let step = |i: usize| {
            let k = i as f64;
            (0..4).map(|b| 40.0 / (1.0 + (-(k - (12.0 * b as f64 + 9.0))).exp())).sum::<f64>()
        };
        let xs: Vec<f64> = (0..48).map(step).collect();
        let s = seq_from(&xs);
        let beats = [6, 18, 30, 42];
        let out = temporal_align(&s, &beats, 12).unwrap();
        let found = find_pose_beats_from(&out, 12, centred_origin(6, 12));
        for (b, f) in beats.iter().zip(&found) {
            assert!((*b as i64 - *f as i64).abs() <= 1, "beat {b} pose beat {f}");
        }
        for (lo, _, hi) in beat_window_bounds(&beats, 12, 48) {
            assert_eq!(out.frames[lo], s.frames[lo]);
            assert_eq!(out.frames[hi], s.frames[hi]);
        }
    }
}
