use super::tsd::{tsd_decompose, TsdModel, MIN_TSD_LEN};
use super::AlignmentWindows;
use crate::error::{Error, Result};
use crate::pose::PoseSequence;
use crate::skeleton::NUM_JOINTS;

/// Frames where any keypoint moved more than `threshold` pixels since the previous frame.
pub fn detect_discontinuities(seq: &PoseSequence, threshold: f64) -> Vec<usize> {
    (1..seq.len())
        .filter(|&k| {
            let (a, b) = (&seq.frames[k - 1], &seq.frames[k]);
            (0..NUM_JOINTS).any(|j| b.keypoints[j].distance(&a.keypoints[j]) > threshold)
        })
        .collect()
}

/// Straight line through the first and last value of a series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndpointLine {
    pub start: f64,
    pub end: f64,
    pub len: usize,
}

impl EndpointLine {
    pub fn at(&self, i: f64) -> f64 {
        if self.len < 2 {
            return self.start;
        }
        self.start + (self.end - self.start) * i / (self.len - 1) as f64
    }
}

pub fn linear_fit_endpoints(values: &[f64]) -> EndpointLine {
    let start = values.first().copied().unwrap_or(0.0);
    EndpointLine {
        start,
        end: values.last().copied().unwrap_or(start),
        len: values.len(),
    }
}

/// `values - F(values)`.
pub fn endpoint_residual(values: &[f64]) -> Vec<f64> {
    let f = linear_fit_endpoints(values);
    values.iter().enumerate().map(|(i, v)| v - f.at(i as f64)).collect()
}

/// Predicted displacement of an `len`-frame window that directly follows the
/// reference windows, anchored to 0 at both ends.
///
/// Each reference window ends at the first frame of the repaired window. The
/// trend prediction is the expected trend level over all reference windows,
/// a constant; the periodic term comes from the reference window with the
/// largest period support, continued in phase. Anchoring removes the
/// constant, so only the periodic term shapes the result.
fn predict_window(refs: &[TsdModel], len: usize) -> Vec<f64> {
    let level = refs
        .iter()
        .map(|r| (0..r.len).map(|i| r.trend(i as f64)).sum::<f64>() / r.len as f64)
        .sum::<f64>()
        / refs.len() as f64;
    let best = refs
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.period_support().cmp(&b.period_support()).then(ib.cmp(ia)))
        .map(|(_, m)| m)
        .filter(|m| m.is_periodic());
    let raw: Vec<f64> = (0..len)
        .map(|j| level + best.map_or(0.0, |b| b.seasonal(b.len - 1 + j)))
        .collect();
    endpoint_residual(&raw)
}

/// Cubic Hermite curve between `p0` and `p1` over `len` frames with end slopes `m0`, `m1` per frame.
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, len: usize) -> Vec<f64> {
    let h = (len - 1) as f64;
    (0..len)
        .map(|j| {
            let t = j as f64 / h;
            let (t2, t3) = (t * t, t * t * t);
            (2.0 * t3 - 3.0 * t2 + 1.0) * p0
                + (t3 - 2.0 * t2 + t) * h * m0
                + (-2.0 * t3 + 3.0 * t2) * p1
                + (t3 - t2) * h * m1
        })
        .collect()
}

/// Rebuild frames `s..=e` of one coordinate series; `s` and `e` keep their values.
fn repair_series(p: &[f64], s: usize, e: usize, win: &AlignmentWindows, th: f64) -> Result<Vec<f64>> {
    let len = e - s + 1;
    if s < win.omega_b {
        let m0 = if s > 0 { p[s] - p[s - 1] } else { 0.0 };
        let m1 = if e + 1 < p.len() { p[e + 1] - p[e] } else { 0.0 };
        return Ok(hermite(p[s], p[e], m0, m1, len));
    }
    let mut refs = Vec::new();
    let mut i = 0;
    while i < win.omega_b {
        let window = &p[s - win.omega_b + i..=s];
        if window.len() >= MIN_TSD_LEN {
            refs.push(tsd_decompose(&endpoint_residual(window), th)?);
        }
        i += win.omega_a;
    }
    let d = predict_window(&refs, len);
    let f = linear_fit_endpoints(&p[s..=e]);
    Ok(d.iter().enumerate().map(|(j, v)| v + f.at(j as f64)).collect())
}

/// Frame ranges `[s, e]` that spatial alignment rebuilds for the given flags.
/// Windows that would overlap or touch are merged, so no fixed endpoint
/// falls inside a neighbouring burst.
pub fn repair_windows(flags: &[usize], len: usize, omega_a: usize) -> Vec<(usize, usize)> {
    let half = omega_a / 2;
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &k in flags {
        let s = k.saturating_sub(half);
        let e = (k + (omega_a - half)).min(len - 1);
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ if e > s + 1 => out.push((s, e)),
            _ => {}
        }
    }
    out
}

/// Repair discontinuities with time-series decomposition.
///
/// For every flagged frame `k` the window of `omega_a` frames around it
/// (merged with any window it overlaps) is
/// rebuilt per keypoint coordinate: its endpoints stay fixed and the inside
/// follows the displacement predicted from the `omega_b` frames before it.
/// Windows starting within the first `omega_b` frames fall back to cubic
/// Hermite interpolation between the endpoints. Frames outside repaired
/// windows are copied unchanged.
pub fn spatial_align(seq: &PoseSequence, win: &AlignmentWindows, disc_threshold: f64, th: f64) -> Result<PoseSequence> {
    win.validate()?;
    if seq.len() < win.omega_b + win.omega_a {
        return Err(Error::invalid(format!(
            "sequence of {} frames is shorter than omega_b + omega_a = {}",
            seq.len(),
            win.omega_b + win.omega_a
        )));
    }
    let flags = detect_discontinuities(seq, disc_threshold);
    let windows = repair_windows(&flags, seq.len(), win.omega_a);
    let mut out = seq.clone();
    for joint in 0..NUM_JOINTS {
        for axis in 0..2 {
            let p = seq.coordinate_series(joint, axis);
            for &(s, e) in &windows {
                let rebuilt = repair_series(&p, s, e, win, th)?;
                for f in s + 1..e {
                    out.set_coordinate(f, joint, axis, rebuilt[f - s]);
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
                    kps[4] = Keypoint::new(x, 500.0, 1.0);
                    PoseFrame::new(i, kps)
                })
                .collect(),
            24,
            Resolution::default(),
        )
    }

    #[test]
    fn discontinuity_examples() {
        assert!(detect_discontinuities(&seq_from(&[100.0; 10]), 10.0).is_empty());
        let mut xs = [100.0; 10];
        xs[5..].iter_mut().for_each(|x| *x += 11.0);
        assert_eq!(detect_discontinuities(&seq_from(&xs), 10.0), vec![5]);
    }

    #[test]
    fn endpoint_line_examples() {
        let mut v: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        assert!(endpoint_residual(&v).iter().all(|d| d.abs() < 1e-12));
        v[4] = 50.0;
        let f = linear_fit_endpoints(&v);
        assert_eq!(f.at(3.0), 6.0);
        assert_eq!(f.at(0.0), v[0]);
        assert_eq!(f.at(9.0), v[9]);
        assert_eq!(linear_fit_endpoints(&[4.0]).at(3.0), 4.0);
    }

    #[test]
    fn hermite_hits_endpoints() {
        let h = hermite(1.0, 5.0, 0.3, -0.2, 9);
        assert_eq!(h[0], 1.0);
        assert!((h[8] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn no_flags_is_identity() {
        let xs: Vec<f64> = (0..60).map(|i| 300.0 + 5.0 * (i as f64 * 0.3).sin()).collect();
        let s = seq_from(&xs);
        let out = spatial_align(&s, &AlignmentWindows::default(), 10.0, 5.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn overlapping_windows_merge() {
        let w = repair_windows(&[30, 31, 33, 40, 41], 100, 8);
        assert_eq!(w, vec![(26, 45)]);
        assert_eq!(repair_windows(&[30, 50], 100, 8), vec![(26, 34), (46, 54)]);
        assert_eq!(repair_windows(&[98], 100, 8), vec![(94, 99)]);
    }
}
