use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{MfccFragment, MfccSequence};
use crate::error::{Error, Result};
use crate::pose::{fragment_frame_count, segment_windows, PoseFragment, PoseSequence};

/// Shortest and longest delay of a negative pose window, seconds.
pub const MIN_DELAY_S: f64 = 2.0;
pub const MAX_DELAY_S: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairLabel {
    Corresponding,
    NonCorresponding,
}

impl PairLabel {
    pub fn is_corresponding(self) -> bool {
        self == PairLabel::Corresponding
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub audio_fragment: MfccFragment,
    pub pose_fragment: PoseFragment,
    pub label: PairLabel,
    /// Offset of the pose window behind the audio window; 0 for positives.
    pub delay_s: f64,
}

/// Pose and MFCC streams of one source video, frame-aligned.
#[derive(Clone, Debug)]
pub struct PairedSource {
    pub source_id: String,
    pub poses: PoseSequence,
    pub mfcc: MfccSequence,
}

#[derive(Clone, Debug, Default)]
pub struct PairSet {
    pub pairs: Vec<TrainingPair>,
    /// Windows whose delayed negative would run past the end of the source.
    pub skipped: usize,
}

impl PairSet {
    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.label.is_corresponding()).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }
}

fn pose_window(src: &PairedSource, start: usize, len: usize, duration_s: u32) -> PoseFragment {
    PoseFragment {
        source_id: src.source_id.clone(),
        start_frame: start,
        duration_s,
        sequence: src.poses.slice(start, start + len),
        embedding: None,
    }
}

/// One positive per aligned window and, where the source is long enough, one
/// negative whose pose window starts 2 to 5 seconds later in the same source.
/// Pairs come out as positive, negative, positive, ...
pub fn make_training_pairs(sources: &[PairedSource], duration_s: u32, rng_seed: u64) -> Result<PairSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut set = PairSet::default();
    for src in sources {
        if src.poses.len() != src.mfcc.len() {
            return Err(Error::invalid(format!(
                "source {}: {} pose frames but {} audio frames",
                src.source_id,
                src.poses.len(),
                src.mfcc.len()
            )));
        }
        let fps = src.poses.fps;
        let len = fragment_frame_count(duration_s, fps);
        for (start, end) in segment_windows(src.poses.len(), duration_s, fps)? {
            let audio = MfccFragment {
                source_id: src.source_id.clone(),
                start_frame: start,
                frames: src.mfcc.frames[start..end].to_vec(),
            };
            set.pairs.push(TrainingPair {
                audio_fragment: audio.clone(),
                pose_fragment: pose_window(src, start, len, duration_s),
                label: PairLabel::Corresponding,
                delay_s: 0.0,
            });
            let delay = rng.gen_range(MIN_DELAY_S..=MAX_DELAY_S);
            let offset = (delay * fps as f64).round() as usize;
            let neg = start + offset;
            if neg + len > src.poses.len() {
                set.skipped += 1;
                continue;
            }
            set.pairs.push(TrainingPair {
                audio_fragment: audio,
                pose_fragment: pose_window(src, neg, len, duration_s),
                label: PairLabel::NonCorresponding,
                delay_s: offset as f64 / fps as f64,
            });
        }
    }
    if set.skipped > 0 {
        log::warn!("{} windows had no room for a delayed negative", set.skipped);
    }
    Ok(set)
}
