#![allow(dead_code)]

use std::path::PathBuf;

use choreokit::pose::{Keypoint, PoseFrame, PoseSequence, Resolution};
use choreokit::skeleton::NUM_JOINTS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Standing figure around (960, 540), all joints detected.
pub fn base_pose() -> [Keypoint; NUM_JOINTS] {
    let xy: [(f64, f64); NUM_JOINTS] = [
        (960.0, 240.0),
        (960.0, 300.0),
        (910.0, 305.0),
        (880.0, 380.0),
        (870.0, 450.0),
        (1010.0, 305.0),
        (1040.0, 380.0),
        (1050.0, 450.0),
        (930.0, 500.0),
        (925.0, 620.0),
        (920.0, 740.0),
        (990.0, 500.0),
        (995.0, 620.0),
        (1000.0, 740.0),
        (950.0, 230.0),
        (970.0, 230.0),
        (940.0, 240.0),
        (980.0, 240.0),
    ];
    xy.map(|(x, y)| Keypoint::new(x, y, 1.0))
}

/// Every joint follows its own smooth sinusoid, half as wide vertically.
pub fn sine_sequence(n: usize, amplitude: f64, period: f64) -> PoseSequence {
    orbit_sequence(n, amplitude, 0.5 * amplitude, period)
}

/// Every joint circles on its own ellipse with phase offsets per joint.
pub fn orbit_sequence(n: usize, ax: f64, ay: f64, period: f64) -> PoseSequence {
    let base = base_pose();
    let frames = (0..n)
        .map(|i| {
            let mut k = base;
            for (j, kp) in k.iter_mut().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * i as f64 / period + 0.3 * j as f64;
                kp.x += ax * ph.sin();
                kp.y += ay * ph.cos();
            }
            PoseFrame::new(i, k)
        })
        .collect();
    PoseSequence::new(frames, 24, Resolution::default())
}

/// Gaussian-ish random walk of every joint with step scale `step` px.
pub fn random_walk(n: usize, step: f64, seed: u64) -> PoseSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = base_pose();
    let frames = (0..n)
        .map(|i| {
            if i > 0 {
                for kp in k.iter_mut() {
                    kp.x += step * (rng.gen::<f64>() - 0.5) * 2.0;
                    kp.y += step * (rng.gen::<f64>() - 0.5) * 2.0;
                }
            }
            PoseFrame::new(i, k)
        })
        .collect();
    PoseSequence::new(frames, 24, Resolution::default())
}
