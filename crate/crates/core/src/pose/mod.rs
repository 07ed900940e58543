//! Keypoint sequences: loading, cleaning, fragmenting and the fragment database.

mod clean;
mod database;
mod fragment;
mod io;

pub use clean::{
    contiguous_runs, fill_missing_keypoints, filter_invalid_frames, is_spike, smooth_sequence,
    FilterOutcome,
};
pub use database::{
    build_database, decode_database, encode_database, load_database, save_database,
    FragmentDatabase, DB_MAGIC, DB_VERSION,
};
pub use fragment::{
    check_duration, fragment_count, fragment_frame_count, max_nose_to_foot, normalize_fragment, recenter_fragment,
    segment_fragments, segment_windows, PoseFragment,
};
pub use io::{load_keypoint_sequence, parse_keypoint_json, save_keypoint_sequence, to_keypoint_json};

use crate::skeleton::NUM_JOINTS;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Keypoint { x, y, confidence }
    }

    pub fn is_detected(&self) -> bool {
        self.confidence > 0.0
    }

    pub fn distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseFrame {
    pub frame_index: usize,
    pub keypoints: [Keypoint; NUM_JOINTS],
}

impl PoseFrame {
    pub fn new(frame_index: usize, keypoints: [Keypoint; NUM_JOINTS]) -> Self {
        PoseFrame {
            frame_index,
            keypoints,
        }
    }

    /// Mean Euclidean displacement over all keypoints.
    pub fn mean_displacement(&self, other: &PoseFrame) -> f64 {
        let total: f64 = self
            .keypoints
            .iter()
            .zip(other.keypoints.iter())
            .map(|(a, b)| a.distance(b))
            .sum();
        total / NUM_JOINTS as f64
    }

    /// Sum of per-joint Euclidean displacements.
    pub fn total_displacement(&self, other: &PoseFrame) -> f64 {
        self.keypoints
            .iter()
            .zip(other.keypoints.iter())
            .map(|(a, b)| a.distance(b))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            width: 1920,
            height: 1080,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<PoseFrame>,
    pub fps: u32,
    pub resolution: Resolution,
}

impl PoseSequence {
    pub fn new(frames: Vec<PoseFrame>, fps: u32, resolution: Resolution) -> Self {
        PoseSequence {
            frames,
            fps,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }

    /// Copy of frames `start..end`, keeping their original indices.
    pub fn slice(&self, start: usize, end: usize) -> PoseSequence {
        PoseSequence {
            frames: self.frames[start..end].to_vec(),
            fps: self.fps,
            resolution: self.resolution,
        }
    }

    /// Renumber frames 0..len.
    pub fn reindexed(mut self) -> PoseSequence {
        for (i, f) in self.frames.iter_mut().enumerate() {
            f.frame_index = i;
        }
        self
    }

    /// Coordinate series of one joint; `axis` 0 is x, 1 is y.
    pub fn coordinate_series(&self, joint: usize, axis: usize) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| {
                let k = &f.keypoints[joint];
                if axis == 0 {
                    k.x
                } else {
                    k.y
                }
            })
            .collect()
    }

    pub fn set_coordinate(&mut self, frame: usize, joint: usize, axis: usize, value: f64) {
        let k = &mut self.frames[frame].keypoints[joint];
        if axis == 0 {
            k.x = value;
        } else {
            k.y = value;
        }
    }

    /// Per-frame sum of joint displacements from the previous frame; frame 0 is 0.
    pub fn movement(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.frames.len()];
        for j in 1..self.frames.len() {
            out[j] = self.frames[j].total_displacement(&self.frames[j - 1]);
        }
        out
    }

    /// Concatenate sequences, renumbering frames from 0.
    pub fn concat(parts: &[PoseSequence], fps: u32, resolution: Resolution) -> PoseSequence {
        let frames = parts.iter().flat_map(|p| p.frames.iter().cloned()).collect();
        PoseSequence::new(frames, fps, resolution).reindexed()
    }
}
