use super::{Keypoint, PoseSequence};
use crate::error::{Error, Result};
use crate::skeleton::{is_extremity, NUM_JOINTS};

/// Linearly interpolate undetected keypoints (confidence 0) from the nearest
/// detected neighbours of the same joint. Wrists and ankles are left alone so
/// the frame filter can still see them missing. Gaps at either end hold the
/// nearest detected value.
pub fn fill_missing_keypoints(seq: &PoseSequence) -> PoseSequence {
    let mut out = seq.clone();
    let n = seq.len();
    for j in 0..NUM_JOINTS {
        if is_extremity(j) {
            continue;
        }
        let valid: Vec<usize> = (0..n)
            .filter(|&i| seq.frames[i].keypoints[j].is_detected())
            .collect();
        let (Some(&first), Some(&last)) = (valid.first(), valid.last()) else {
            continue;
        };
        for i in 0..first {
            out.frames[i].keypoints[j] = seq.frames[first].keypoints[j];
        }
        for i in last + 1..n {
            out.frames[i].keypoints[j] = seq.frames[last].keypoints[j];
        }
        for w in valid.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b == a + 1 {
                continue;
            }
            let ka = seq.frames[a].keypoints[j];
            let kb = seq.frames[b].keypoints[j];
            for i in a + 1..b {
                let t = (i - a) as f64 / (b - a) as f64;
                out.frames[i].keypoints[j] = Keypoint::new(
                    ka.x + t * (kb.x - ka.x),
                    ka.y + t * (kb.y - ka.y),
                    ka.confidence + t * (kb.confidence - ka.confidence),
                );
            }
        }
    }
    out
}

/// A keypoint is an isolated spike when it is farther than `threshold` from
/// both neighbours while the neighbours themselves agree within `threshold`.
pub fn is_spike(prev: &Keypoint, cur: &Keypoint, next: &Keypoint, threshold: f64) -> bool {
    prev.is_detected()
        && cur.is_detected()
        && next.is_detected()
        && cur.distance(prev) > threshold
        && cur.distance(next) > threshold
        && prev.distance(next) <= threshold
}

/// Replace isolated spikes with the midpoint of their neighbours.
///
/// Frames are visited left to right and each test uses the already smoothed
/// left neighbour, which makes the operation idempotent.
pub fn smooth_sequence(seq: &PoseSequence, jitter_threshold: f64) -> PoseSequence {
    let mut out = seq.clone();
    let n = out.len();
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        for j in 0..NUM_JOINTS {
            let prev = out.frames[i - 1].keypoints[j];
            let cur = out.frames[i].keypoints[j];
            let next = out.frames[i + 1].keypoints[j];
            if is_spike(&prev, &cur, &next, jitter_threshold) {
                let k = &mut out.frames[i].keypoints[j];
                k.x = 0.5 * (prev.x + next.x);
                k.y = 0.5 * (prev.y + next.y);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub sequence: PoseSequence,
    pub removed: Vec<usize>,
}

/// Drop frames with an undetected wrist or ankle, and frames whose mean
/// keypoint displacement from the last retained frame exceeds
/// `distance_threshold`. Retained frames keep their original indices.
pub fn filter_invalid_frames(seq: &PoseSequence, distance_threshold: f64) -> Result<FilterOutcome> {
    let mut kept = Vec::with_capacity(seq.len());
    let mut removed = Vec::new();
    for frame in &seq.frames {
        let missing_extremity = crate::skeleton::HAND_JOINTS
            .iter()
            .chain(crate::skeleton::FOOT_JOINTS.iter())
            .any(|&j| !frame.keypoints[j].is_detected());
        let too_far = kept
            .last()
            .map(|last: &super::PoseFrame| frame.mean_displacement(last) > distance_threshold)
            .unwrap_or(false);
        if missing_extremity || too_far {
            removed.push(frame.frame_index);
        } else {
            kept.push(frame.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(FilterOutcome {
        sequence: PoseSequence::new(kept, seq.fps, seq.resolution),
        removed,
    })
}

/// Split a filtered sequence into runs of consecutive frame indices.
pub fn contiguous_runs(seq: &PoseSequence) -> Vec<PoseSequence> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=seq.len() {
        let boundary = i == seq.len() || seq.frames[i].frame_index != seq.frames[i - 1].frame_index + 1;
        if boundary && i > start {
            runs.push(seq.slice(start, i));
            start = i;
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{PoseFrame, Resolution};
    use proptest::prelude::*;

    fn constant_frame(i: usize, x: f64, y: f64) -> PoseFrame {
        PoseFrame::new(i, [Keypoint::new(x, y, 1.0); NUM_JOINTS])
    }

    fn seq_from(frames: Vec<PoseFrame>) -> PoseSequence {
        PoseSequence::new(frames, 24, Resolution::default())
    }

    #[test]
    fn constant_sequence_unchanged() {
        let s = seq_from((0..10).map(|i| constant_frame(i, 5.0, 7.0)).collect());
        assert_eq!(smooth_sequence(&s, 10.0), s);
    }

    #[test]
    fn spike_replaced_by_midpoint() {
        let mut s = seq_from(vec![
            constant_frame(0, 0.0, 0.0),
            constant_frame(1, 100.0, 100.0),
            constant_frame(2, 2.0, 2.0),
        ]);
        s.frames[1].keypoints[0].confidence = 0.5;
        let out = smooth_sequence(&s, 10.0);
        let k = out.frames[1].keypoints[0];
        assert_eq!((k.x, k.y, k.confidence), (1.0, 1.0, 0.5));
    }

    #[test]
    fn single_frame_unchanged() {
        let s = seq_from(vec![constant_frame(0, 3.0, 4.0)]);
        assert_eq!(smooth_sequence(&s, 10.0), s);
    }

    #[test]
    fn missing_wrist_frame_removed() {
        let mut s = seq_from((0..6).map(|i| constant_frame(i, i as f64, 0.0)).collect());
        s.frames[3].keypoints[crate::skeleton::L_WRIST].confidence = 0.0;
        let out = filter_invalid_frames(&s, 100.0).unwrap();
        assert_eq!(out.removed, vec![3]);
        assert_eq!(out.sequence.len(), 5);
    }

    #[test]
    fn smooth_motion_keeps_everything() {
        let s = seq_from((0..30).map(|i| constant_frame(i, 2.0 * i as f64, 0.0)).collect());
        let out = filter_invalid_frames(&s, 100.0).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.sequence, s);
    }

    #[test]
    fn all_removed_is_error() {
        let mut s = seq_from((0..3).map(|i| constant_frame(i, 0.0, 0.0)).collect());
        for f in &mut s.frames {
            f.keypoints[crate::skeleton::R_ANKLE].confidence = 0.0;
        }
        assert!(matches!(filter_invalid_frames(&s, 100.0), Err(Error::EmptySequence)));
    }

    #[test]
    fn interior_gap_interpolated_extremity_untouched() {
        let mut s = seq_from((0..5).map(|i| constant_frame(i, 10.0 * i as f64, 0.0)).collect());
        s.frames[2].keypoints[crate::skeleton::NOSE].confidence = 0.0;
        s.frames[2].keypoints[crate::skeleton::NOSE].x = 999.0;
        s.frames[0].keypoints[crate::skeleton::NECK].confidence = 0.0;
        s.frames[2].keypoints[crate::skeleton::R_WRIST].confidence = 0.0;
        let out = fill_missing_keypoints(&s);
        let nose = out.frames[2].keypoints[crate::skeleton::NOSE];
        assert!((nose.x - 20.0).abs() < 1e-12 && nose.confidence == 1.0);
        assert_eq!(out.frames[0].keypoints[crate::skeleton::NECK], s.frames[1].keypoints[crate::skeleton::NECK]);
        assert_eq!(out.frames[2].keypoints[crate::skeleton::R_WRIST].confidence, 0.0);
    }

    #[test]
    fn runs_split_on_index_gaps() {
        let s = seq_from([0, 1, 2, 5, 6, 9].iter().map(|&i| constant_frame(i, 0.0, 0.0)).collect());
        let runs = contiguous_runs(&s);
        let lens: Vec<usize> = runs.iter().map(|r| r.len()).collect();
        assert_eq!(lens, vec![3, 2, 1]);
        assert_eq!(runs[1].frames[0].frame_index, 5);
    }

    fn arb_sequence() -> impl Strategy<Value = PoseSequence> {
        prop::collection::vec(prop::collection::vec((0.0..200.0f64, 0.0..200.0f64), NUM_JOINTS), 1..25)
            .prop_map(|frames| {
                seq_from(
                    frames
                        .into_iter()
                        .enumerate()
                        .map(|(i, kps)| {
                            let mut arr = [Keypoint::default(); NUM_JOINTS];
                            for (j, (x, y)) in kps.into_iter().enumerate() {
                                arr[j] = Keypoint::new(x, y, 1.0);
                            }
                            PoseFrame::new(i, arr)
                        })
                        .collect(),
                )
            })
    }

    proptest! {
        #[test]
        fn smoothing_is_idempotent(s in arb_sequence(), thr in 1.0..80.0f64) {
            let once = smooth_sequence(&s, thr);
            let twice = smooth_sequence(&once, thr);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn filter_output_passes_filter(s in arb_sequence(), thr in 10.0..150.0f64) {
            let out = filter_invalid_frames(&s, thr).unwrap();
            let again = filter_invalid_frames(&out.sequence, thr).unwrap();
            prop_assert!(again.removed.is_empty());
            prop_assert_eq!(out.sequence.len() + out.removed.len(), s.len());
        }
    }
}
