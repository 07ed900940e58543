//! Evaluation metrics: beat alignment score, movement and spacing histograms
//! and the symmetric-KL distances between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::PoseSequence;
use crate::skeleton::BodyPart;

/// Bin edges in pixels. Values at or beyond the last edge fall in the last bin.
pub const HIST_EDGES: [f64; 6] = [0.0, 20.0, 40.0, 60.0, 80.0, 400.0];
pub const NUM_BINS: usize = 5;
/// Mass added to every bin before taking log ratios.
pub const KL_SMOOTHING: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovementHistogram {
    pub mass: [f64; NUM_BINS],
}

impl MovementHistogram {
    /// Normalised histogram of non-negative distances.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("histogram needs at least one sample"));
        }
        let mut counts = [0usize; NUM_BINS];
        for &v in samples {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite distance {v}")));
            }
            counts[bin_index(v)] += 1;
        }
        let n = samples.len() as f64;
        Ok(MovementHistogram { mass: counts.map(|c| c as f64 / n) })
    }
}

pub fn bin_index(v: f64) -> usize {
    HIST_EDGES[1..NUM_BINS].iter().position(|&e| v < e).unwrap_or(NUM_BINS - 1)
}

/// Per-joint displacements of the part's two joints between adjacent frames.
pub fn movement_samples(seq: &PoseSequence, part: BodyPart) -> Vec<f64> {
    seq.frames
        .windows(2)
        .flat_map(|w| part.joints().map(|j| w[1].keypoints[j].distance(&w[0].keypoints[j])))
        .collect()
}

/// Per-frame distance between the part's left and right joint.
pub fn spacing_samples(seq: &PoseSequence, part: BodyPart) -> Vec<f64> {
    let [a, b] = part.joints();
    seq.frames.iter().map(|f| f.keypoints[a].distance(&f.keypoints[b])).collect()
}

pub fn movement_histogram(seq: &PoseSequence, part: BodyPart) -> Result<MovementHistogram> {
    if seq.len() < 2 {
        return Err(Error::invalid("movement histogram needs at least 2 frames"));
    }
    MovementHistogram::from_samples(&movement_samples(seq, part))
}

pub fn spacing_histogram(seq: &PoseSequence, part: BodyPart) -> Result<MovementHistogram> {
    if seq.is_empty() {
        return Err(Error::invalid("spacing histogram needs at least 1 frame"));
    }
    MovementHistogram::from_samples(&spacing_samples(seq, part))
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has negative or non-finite mass")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// `(KL(p‖q) + KL(q‖p)) / 2` after adding `smoothing` to every bin and renormalising.
pub fn symmetric_kl_with(p: &[f64], q: &[f64], smoothing: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let smooth = |d: &[f64]| {
        let z: f64 = d.iter().map(|v| v + smoothing).sum();
        d.iter().map(|v| (v + smoothing) / z).collect::<Vec<_>>()
    };
    let (ps, qs) = (smooth(p), smooth(q));
    let mut kl_pq = 0.0;
    let mut kl_qp = 0.0;
    for (&a, &b) in ps.iter().zip(&qs) {
        if a > 0.0 {
            kl_pq += a * (a / b).ln();
        }
        if b > 0.0 {
            kl_qp += b * (b / a).ln();
        }
    }
    Ok(0.5 * (kl_pq + kl_qp))
}

pub fn symmetric_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    symmetric_kl_with(p, q, KL_SMOOTHING)
}

/// Moving distribution distance between two sequences for one body part.
pub fn mdd(generated: &PoseSequence, reference: &PoseSequence, part: BodyPart) -> Result<f64> {
    let a = movement_histogram(generated, part)?;
    let b = movement_histogram(reference, part)?;
    symmetric_kl(&a.mass, &b.mass)
}

/// Spacing distribution distance between two sequences for one body part.
pub fn sdd(generated: &PoseSequence, reference: &PoseSequence, part: BodyPart) -> Result<f64> {
    let a = spacing_histogram(generated, part)?;
    let b = spacing_histogram(reference, part)?;
    symmetric_kl(&a.mass, &b.mass)
}

/// Fraction of audio beats matched one-to-one by a pose beat at most
/// `tolerance` frames away.
///
/// Audio beats are visited in time order and each takes the earliest unused
/// pose beat inside its tolerance window. With equal-width windows this
/// greedy choice yields a maximum matching, so the score never decreases as
/// the tolerance grows.
pub fn beat_alignment_score(audio_beats: &[usize], pose_beats: &[usize], tolerance: usize) -> Result<f64> {
    if audio_beats.is_empty() {
        return Err(Error::invalid("no audio beats to score against"));
    }
    let mut audio = audio_beats.to_vec();
    audio.sort_unstable();
    let mut pose = pose_beats.to_vec();
    pose.sort_unstable();
    let mut next = 0;
    let mut matched = 0usize;
    for &a in &audio {
        let lo = a.saturating_sub(tolerance);
        while next < pose.len() && pose[next] < lo {
            next += 1;
        }
        if next < pose.len() && pose[next] <= a + tolerance {
            matched += 1;
            next += 1;
        }
    }
    Ok(matched as f64 / audio.len() as f64)
}

/// Summary written by the `eval` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub s_ba: f64,
    pub mdd_h: f64,
    pub mdd_f: f64,
    pub sdd_h: f64,
    pub sdd_f: f64,
    pub hand_hist: [f64; NUM_BINS],
    pub foot_hist: [f64; NUM_BINS],
}

impl EvalReport {
    pub fn compute(
        generated: &PoseSequence,
        reference: &PoseSequence,
        audio_beats: &[usize],
        pose_beats: &[usize],
        tolerance: usize,
    ) -> Result<Self> {
        Self::compute_pooled(generated, std::slice::from_ref(reference), audio_beats, pose_beats, tolerance)
    }

    /// As [`EvalReport::compute`] with the reference histograms pooled over
    /// several sequences, so no movement is measured across their junctions.
    pub fn compute_pooled(
        generated: &PoseSequence,
        references: &[PoseSequence],
        audio_beats: &[usize],
        pose_beats: &[usize],
        tolerance: usize,
    ) -> Result<Self> {
        let gen = std::slice::from_ref(generated);
        let dist = |samples: fn(&PoseSequence, BodyPart) -> Vec<f64>, part: BodyPart| -> Result<f64> {
            let a = pooled_histogram(gen, part, samples)?;
            let b = pooled_histogram(references, part, samples)?;
            symmetric_kl(&a.mass, &b.mass)
        };
        if generated.len() < 2 {
            return Err(Error::invalid("movement histogram needs at least 2 frames"));
        }
        Ok(EvalReport {
            s_ba: beat_alignment_score(audio_beats, pose_beats, tolerance)?,
            mdd_h: dist(movement_samples, BodyPart::Hand)?,
            mdd_f: dist(movement_samples, BodyPart::Foot)?,
            sdd_h: dist(spacing_samples, BodyPart::Hand)?,
            sdd_f: dist(spacing_samples, BodyPart::Foot)?,
            hand_hist: movement_histogram(generated, BodyPart::Hand)?.mass,
            foot_hist: movement_histogram(generated, BodyPart::Foot)?.mass,
        })
    }
}

fn pooled_histogram(
    seqs: &[PoseSequence],
    part: BodyPart,
    samples: fn(&PoseSequence, BodyPart) -> Vec<f64>,
) -> Result<MovementHistogram> {
    let all: Vec<f64> = seqs.iter().flat_map(|s| samples(s, part)).collect();
    MovementHistogram::from_samples(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bins_follow_edges() {
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(19.999), 0);
        assert_eq!(bin_index(20.0), 1);
        assert_eq!(bin_index(80.0), 4);
        assert_eq!(bin_index(400.0), 4);
        assert_eq!(bin_index(1e6), 4);
    }

    #[test]
    fn beat_score_examples() {
        assert_eq!(beat_alignment_score(&[10, 20, 30], &[10, 20, 30], 0).unwrap(), 1.0);
        assert!((beat_alignment_score(&[10, 20, 30], &[10, 22, 30], 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(beat_alignment_score(&[10, 20, 30], &[10, 22, 30], 2).unwrap(), 1.0);
        assert!(beat_alignment_score(&[], &[1], 0).is_err());
    }

    #[test]
    fn pose_beats_are_used_once() {
        assert_eq!(beat_alignment_score(&[10, 11], &[10], 2).unwrap(), 0.5);
    }

    #[test]
    fn two_bin_kl_value() {
        // Direct summation of both divergences, without smoothing.
        let (p, q) = ([0.7, 0.3], [0.5, 0.5]);
        let kl_pq = 0.7 * (0.7f64 / 0.5).ln() + 0.3 * (0.3f64 / 0.5).ln();
        let kl_qp = 0.5 * (0.5f64 / 0.7).ln() + 0.5 * (0.5f64 / 0.3).ln();
        let direct = 0.5 * (kl_pq + kl_qp);
        assert!((direct - 0.084730).abs() < 1e-6);
        assert!((symmetric_kl_with(&p, &q, 0.0).unwrap() - direct).abs() < 1e-15);
        assert!((symmetric_kl(&p, &q).unwrap() - direct).abs() < 1e-5);
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(symmetric_kl(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(symmetric_kl(&[1.0], &[0.5, 0.5]).is_err());
    }

    fn dist() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 5).prop_filter_map("positive total", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn kl_symmetric_and_non_negative(p in dist(), q in dist()) {
            let a = symmetric_kl(&p, &q).unwrap();
            let b = symmetric_kl(&q, &p).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert_eq!(symmetric_kl(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn beat_score_monotone_in_tolerance(
            audio in prop::collection::vec(0usize..200, 1..20),
            pose in prop::collection::vec(0usize..200, 0..20),
            tol in 0usize..6,
        ) {
            let a = beat_alignment_score(&audio, &pose, tol).unwrap();
            let b = beat_alignment_score(&audio, &pose, tol + 1).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b);
        }
    }
}
