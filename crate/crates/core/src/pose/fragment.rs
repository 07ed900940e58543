use super::PoseSequence;
use crate::crossmodal::Embedding;
use crate::error::{Error, Result};
use crate::skeleton::{FOOT_JOINTS, NOSE};

/// A fixed-length slice of one source sequence; the retrieval unit.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseFragment {
    pub source_id: String,
    pub start_frame: usize,
    pub duration_s: u32,
    pub sequence: PoseSequence,
    pub embedding: Option<Embedding>,
}

impl PoseFragment {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Stable identifier used by the database index.
    pub fn id(&self) -> String {
        format!("{}@{}", self.source_id, self.start_frame)
    }
}

pub fn check_duration(duration_s: u32) -> Result<()> {
    if (1..=4).contains(&duration_s) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "fragment duration must be 1..=4 s, got {duration_s}"
        )))
    }
}

pub fn fragment_frame_count(duration_s: u32, fps: u32) -> usize {
    duration_s as usize * fps as usize
}

/// Number of whole windows in a stream of `len` frames.
pub fn fragment_count(len: usize, duration_s: u32, fps: u32) -> usize {
    len / fragment_frame_count(duration_s, fps)
}

/// Frame ranges of the non-overlapping windows over a stream of `len` frames.
pub fn segment_windows(
    len: usize,
    duration_s: u32,
    fps: u32,
) -> Result<impl Iterator<Item = (usize, usize)>> {
    check_duration(duration_s)?;
    let w = fragment_frame_count(duration_s, fps);
    Ok((0..fragment_count(len, duration_s, fps)).map(move |k| (k * w, (k + 1) * w)))
}

/// Cut a sequence into consecutive non-overlapping windows of `duration_s`
/// seconds. The trailing remainder is dropped.
pub fn segment_fragments(seq: &PoseSequence, source_id: &str, duration_s: u32) -> Result<Vec<PoseFragment>> {
    Ok(segment_windows(seq.len(), duration_s, seq.fps)?
        .map(|(s, e)| {
            let sequence = seq.slice(s, e);
            PoseFragment {
                source_id: source_id.to_string(),
                start_frame: sequence.frames[0].frame_index,
                duration_s,
                sequence,
                embedding: None,
            }
        })
        .collect())
}

/// Largest vertical nose-to-ankle distance over frames where both are detected.
pub fn max_nose_to_foot(seq: &PoseSequence) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in &seq.frames {
        let nose = f.keypoints[NOSE];
        if !nose.is_detected() {
            continue;
        }
        for &a in FOOT_JOINTS.iter() {
            let ankle = f.keypoints[a];
            if ankle.is_detected() {
                let d = (ankle.y - nose.y).abs();
                best = Some(best.map_or(d, |b: f64| b.max(d)));
            }
        }
    }
    best
}

/// Mean position of all detected keypoints.
pub(crate) fn centroid(seq: &PoseSequence) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for f in &seq.frames {
        for k in f.keypoints.iter().filter(|k| k.is_detected()) {
            sx += k.x;
            sy += k.y;
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sx / n as f64, sy / n as f64)
    }
}

/// Scale a fragment about its centroid so its tallest nose-to-ankle span
/// equals `target_height`.
pub fn normalize_fragment(frag: &PoseFragment, target_height: f64) -> Result<PoseFragment> {
    let h = max_nose_to_foot(&frag.sequence)
        .filter(|&h| h > 0.0)
        .ok_or_else(|| {
            Error::DegenerateFragment(format!("{}: no usable nose-to-foot distance", frag.id()))
        })?;
    let r = target_height / h;
    let (cx, cy) = centroid(&frag.sequence);
    let mut out = frag.clone();
    for f in &mut out.sequence.frames {
        for k in f.keypoints.iter_mut() {
            k.x = cx + r * (k.x - cx);
            k.y = cy + r * (k.y - cy);
        }
    }
    Ok(out)
}

/// Translate a fragment so its centroid sits at `center`.
pub fn recenter_fragment(frag: &PoseFragment, center: (f64, f64)) -> PoseFragment {
    let (cx, cy) = centroid(&frag.sequence);
    let (dx, dy) = (center.0 - cx, center.1 - cy);
    let mut out = frag.clone();
    for f in &mut out.sequence.frames {
        for k in f.keypoints.iter_mut() {
            k.x += dx;
            k.y += dy;
        }
    }
    out
}
