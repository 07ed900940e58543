mod common;

use std::path::Path;

use choreokit::audio::BeatTrack;
use choreokit::pose::{PoseFrame, PoseSequence, Resolution};
use choreokit::render::{
    beat_alignment_plot, frame_file_name, plot_beat_alignment, plot_x, plotted_pose_beats, render_frame, render_video,
    RenderManifest, RenderStyle, PLOT_SIZE,
};
use common::{base_pose, fixture, orbit_sequence};
use image::Rgb;

/// Compare against a stored PNG; `CHOREOKIT_BLESS=1` rewrites the fixture.
fn check_golden(name: &str, bytes: &[u8]) {
    let path = fixture(name);
    if std::env::var_os("CHOREOKIT_BLESS").is_some() {
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}; rerun with CHOREOKIT_BLESS=1", path.display()));
    assert!(want == bytes, "{name} differs from the golden image");
}

fn png_bytes(img: &image::RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
    buf.into_inner()
}

/// All joints drift right; the step is largest on the given beat frames.
fn pulsed_sequence(n: usize, beats: &[usize]) -> PoseSequence {
    let mut k = base_pose();
    let frames = (0..n)
        .map(|i| {
            if i > 0 {
                let d = beats.iter().map(|&b| b.abs_diff(i)).min().unwrap_or(usize::MAX) as f64;
                let step = 1.0 + 8.0 * (-d * d / 4.0).exp();
                for kp in k.iter_mut() {
                    kp.x += step;
                }
            }
            PoseFrame::new(i, k)
        })
        .collect();
    PoseSequence::new(frames, 24, Resolution::default())
}

#[test]
fn standing_pose_matches_golden_frame() {
    let frame = PoseFrame::new(0, base_pose());
    let img = render_frame(&frame, (320, 180), &RenderStyle::default()).unwrap();
    check_golden("golden_frame.png", &png_bytes(&img));
}

#[test]
fn beat_plot_matches_golden() {
    let beats = BeatTrack { beat_frames: (6..96).step_by(12).collect(), tempo_bpm: 120.0 };
    let seq = pulsed_sequence(96, &beats.beat_frames);
    let img = beat_alignment_plot(&beats, &seq).unwrap();
    assert_eq!(img.dimensions(), PLOT_SIZE);
    check_golden("golden_beats.png", &png_bytes(&img));
}

#[test]
fn twenty_four_frames_give_twenty_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let seq = orbit_sequence(24, 30.0, 20.0, 12.0);
    let m = render_video(&seq, dir.path(), 24, (160, 90), &RenderStyle::default()).unwrap();
    assert_eq!(m.frame_count, 24);
    let mut pngs: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".png"))
        .collect();
    pngs.sort();
    assert_eq!(pngs, (0..24).map(frame_file_name).collect::<Vec<_>>());
    let manifest: RenderManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, m);
    assert_eq!((manifest.fps, manifest.resolution.width, manifest.resolution.height), (24, 160, 90));
    assert_eq!(manifest.pattern, "frame_%06d.png");
}

#[test]
fn empty_sequence_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frames");
    let empty = PoseSequence::new(Vec::new(), 24, Resolution::default());
    assert!(render_video(&empty, &out, 24, (160, 90), &RenderStyle::default()).is_err());
    assert!(!out.exists());
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn rendering_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let seq = orbit_sequence(70, 40.0, 25.0, 16.0);
    render_video(&seq, dir.path().join("a"), 24, (200, 120), &RenderStyle::default()).unwrap();
    render_video(&seq, dir.path().join("b"), 24, (200, 120), &RenderStyle::default()).unwrap();
    let (a, b) = (read_dir_bytes(&dir.path().join("a")), read_dir_bytes(&dir.path().join("b")));
    assert_eq!(a.len(), 71);
    assert!(a == b);
}

#[test]
fn aligned_markers_sit_on_beat_lines() {
    let beats = BeatTrack { beat_frames: (6..96).step_by(12).collect(), tempo_bpm: 120.0 };
    let seq = pulsed_sequence(96, &beats.beat_frames);
    assert_eq!(plotted_pose_beats(&beats, &seq), beats.beat_frames);
    let dir = tempfile::tempdir().unwrap();
    let img = plot_beat_alignment(&beats, &seq, dir.path().join("beats.png")).unwrap();
    assert!(dir.path().join("beats.png").exists());
    let marker = Rgb([40, 90, 220]);
    for &b in &beats.beat_frames {
        let x = plot_x(b, seq.len());
        let hits = (0..PLOT_SIZE.1).filter(|&y| *img.get_pixel(x, y) == marker).count();
        assert!(hits > 0, "no marker on the beat line at frame {b}");
    }
}
