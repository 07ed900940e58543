//! Audio decoding, MFCC features and beat tracking.

mod beats;
mod mfcc;
mod wav;

pub use beats::{detect_beats, detect_beats_with, onset_envelope, BeatTrack, BeatTrackerConfig};
pub use mfcc::{
    compute_mfcc, frame_bounds, frame_count, mel_filterbank, segment_audio, MfccFragment,
    MfccSequence, MEL_FILTERS, MFCC_DIM, PRE_EMPHASIS,
};
pub use wav::{decode_wav, load_audio, resample, save_wav};

use crate::error::{Error, Result};

/// Rate every clip is converted to on load.
pub const INTERNAL_SAMPLE_RATE: u32 = 16_000;

/// Mono waveform in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("audio clip is empty"));
        }
        Ok(AudioClip { samples, sample_rate })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|s| (s * gain).clamp(-1.0, 1.0)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}
