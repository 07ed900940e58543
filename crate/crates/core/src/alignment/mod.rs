//! Repair of stitched pose sequences: spatial smoothing of discontinuities
//! and temporal snapping of pose beats to musical beats.

mod spatial;
mod temporal;
mod tsd;

pub use spatial::{
    detect_discontinuities, endpoint_residual, linear_fit_endpoints, repair_windows, spatial_align, EndpointLine,
};
pub use temporal::{beat_window_bounds, centred_origin, find_pose_beats, find_pose_beats_from, find_pose_beats_near, temporal_align};
pub use tsd::{detect_period, lag_volatility, tsd_decompose, TsdModel, MIN_TSD_LEN};

use crate::error::{Error, Result};

/// Default discontinuity threshold, pixels.
pub const DEFAULT_DISC_THRESHOLD: f64 = 10.0;
/// Default volatility threshold for period detection, pixels.
pub const DEFAULT_TSD_THRESHOLD: f64 = 5.0;

/// Window sizes in frames: `omega_a` repaired, `omega_b` reference,
/// `omega_c` beat search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignmentWindows {
    pub omega_a: usize,
    pub omega_b: usize,
    pub omega_c: usize,
}

impl Default for AlignmentWindows {
    fn default() -> Self {
        AlignmentWindows {
            omega_a: 8,
            omega_b: 24,
            omega_c: 12,
        }
    }
}

impl AlignmentWindows {
    pub fn validate(&self) -> Result<()> {
        if self.omega_a < 2 {
            return Err(Error::invalid("omega_a must be at least 2"));
        }
        if self.omega_b <= self.omega_a {
            return Err(Error::invalid("omega_b must exceed omega_a"));
        }
        if self.omega_b < MIN_TSD_LEN {
            return Err(Error::invalid(format!("omega_b must be at least {MIN_TSD_LEN}")));
        }
        if self.omega_c < 2 {
            return Err(Error::invalid("omega_c must be at least 2"));
        }
        Ok(())
    }
}
