mod common;

use choreokit::metrics::{
    beat_alignment_score, mdd, movement_histogram, sdd, spacing_histogram, symmetric_kl, symmetric_kl_with, EvalReport,
    HIST_EDGES, NUM_BINS,
};
use choreokit::pose::PoseSequence;
use choreokit::skeleton::BodyPart;
use common::random_walk;
use proptest::prelude::*;

/// Direct summation of both divergences in plain loops.
fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            total += p[i] * (p[i] / q[i]).ln();
        }
        if q[i] > 0.0 {
            total += q[i] * (q[i] / p[i]).ln();
        }
    }
    total / 2.0
}

#[test]
fn two_bin_example_matches_direct_summation() {
    let (p, q) = ([0.7, 0.3], [0.5, 0.5]);
    let want = kl_oracle(&p, &q);
    assert!((want - 0.0847303).abs() < 1e-6);
    assert!((symmetric_kl_with(&p, &q, 0.0).unwrap() - want).abs() < 1e-15);
    assert!((symmetric_kl(&p, &q).unwrap() - want).abs() < 1e-5);
}

#[test]
fn disjoint_support_stays_finite() {
    let d = symmetric_kl(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!(d.is_finite() && d > 10.0);
}

fn translate(seq: &PoseSequence, dx: f64, dy: f64) -> PoseSequence {
    let mut out = seq.clone();
    for f in &mut out.frames {
        for k in f.keypoints.iter_mut() {
            k.x += dx;
            k.y += dy;
        }
    }
    out
}

#[test]
fn report_on_itself_has_zero_distances() {
    let seq = random_walk(60, 25.0, 4);
    let r = EvalReport::compute(&seq, &seq, &[10, 20, 30], &[10, 21, 30], 1).unwrap();
    assert_eq!((r.mdd_h, r.mdd_f, r.sdd_h, r.sdd_f), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(r.s_ba, 1.0);
    assert_eq!(r.hand_hist, movement_histogram(&seq, BodyPart::Hand).unwrap().mass);
    let json = serde_json::to_value(&r).unwrap();
    for key in ["s_ba", "mdd_h", "mdd_f", "sdd_h", "sdd_f", "hand_hist", "foot_hist"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

fn distribution() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, NUM_BINS).prop_filter_map("positive total", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-3).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beat_score_is_bounded_and_monotone(
        audio in prop::collection::vec(0usize..300, 1..30),
        pose in prop::collection::vec(0usize..300, 0..30),
        tol in 0usize..8,
    ) {
        let mut last = 0.0;
        for t in 0..=tol {
            let s = beat_alignment_score(&audio, &pose, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s >= last);
            last = s;
        }
    }

    #[test]
    fn identical_beats_score_one(mut beats in prop::collection::vec(0usize..300, 1..30), tol in 0usize..4) {
        beats.sort_unstable();
        beats.dedup();
        prop_assert_eq!(beat_alignment_score(&beats, &beats, tol).unwrap(), 1.0);
    }

    #[test]
    fn kl_is_non_negative_and_symmetric(p in distribution(), q in distribution()) {
        let a = symmetric_kl(&p, &q).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - symmetric_kl(&q, &p).unwrap()).abs() <= 1e-12 * a.max(1.0));
        let raw = symmetric_kl_with(&p, &q, 0.0).unwrap();
        prop_assert!((raw - kl_oracle(&p, &q)).abs() <= 1e-12 * raw.max(1.0));
    }

    #[test]
    fn distances_are_symmetric(sa in any::<u64>(), sb in any::<u64>(), step in 5.0f64..60.0) {
        let a = random_walk(40, step, sa);
        let b = random_walk(50, 30.0, sb);
        for part in [BodyPart::Hand, BodyPart::Foot] {
            prop_assert_eq!(mdd(&a, &b, part).unwrap(), mdd(&b, &a, part).unwrap());
            prop_assert_eq!(sdd(&a, &b, part).unwrap(), sdd(&b, &a, part).unwrap());
            prop_assert_eq!(mdd(&a, &a, part).unwrap(), 0.0);
            prop_assert_eq!(sdd(&a, &a, part).unwrap(), 0.0);
        }
    }

    #[test]
    fn histograms_sum_to_one_and_ignore_translation(seed in any::<u64>(), step in 1.0f64..80.0, dx in -500.0f64..500.0, dy in -300.0f64..300.0) {
        let seq = random_walk(30, step, seed);
        let moved = translate(&seq, dx, dy);
        for part in [BodyPart::Hand, BodyPart::Foot] {
            let h = movement_histogram(&seq, part).unwrap();
            prop_assert!((h.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(h.mass.iter().all(|&m| m >= 0.0));
            let hm = movement_histogram(&moved, part).unwrap();
            for k in 0..NUM_BINS {
                prop_assert!((h.mass[k] - hm.mass[k]).abs() <= 1e-12);
            }
            let s = spacing_histogram(&seq, part).unwrap();
            prop_assert!((s.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn edges_cover_the_bins() {
    assert_eq!(HIST_EDGES.len(), NUM_BINS + 1);
    assert!(HIST_EDGES.windows(2).all(|w| w[0] < w[1]));
}
