//! Stick-figure rendering and beat-alignment plots.
//!
//! Drawing is done with signed-distance coverage on an RGB canvas: a stroke
//! covers a pixel by `clamp(r + 0.5 - d, 0, 1)` where `d` is the distance from
//! the pixel centre to the segment. All arithmetic is plain `f64`, so the
//! output is a pure function of the inputs.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::gif::{GifEncoder, Repeat};
use image::{Delay, Frame, ImageFormat, Rgb, RgbImage, RgbaImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::find_pose_beats_near;
use crate::audio::BeatTrack;
use crate::error::{Error, Result};
use crate::pose::{PoseFrame, PoseSequence, Resolution};
use crate::skeleton::{EDGES, NUM_JOINTS};

/// Colour per bone, indexed like [`EDGES`].
const BONE_COLOURS: [[u8; 3]; 17] = [
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [255, 0, 0],
    [170, 0, 255],
    [255, 0, 255],
    [85, 0, 255],
    [255, 0, 170],
];

/// How pose coordinates map onto the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fit {
    /// Keypoints are already canvas pixels.
    Identity,
    /// Scale uniformly from the sequence's source resolution.
    Resolution,
    /// Fit the bounding box of the detected keypoints inside the canvas margin.
    BoundingBox,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStyle {
    pub background: [u8; 3],
    pub joint_colour: [u8; 3],
    pub line_width: f64,
    pub joint_radius: f64,
    /// Margin in pixels kept free by [`Fit::BoundingBox`].
    pub margin: f64,
    pub fit: Fit,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            background: [16, 16, 24],
            joint_colour: [255, 255, 255],
            line_width: 4.0,
            joint_radius: 4.0,
            margin: 16.0,
            fit: Fit::BoundingBox,
        }
    }
}

/// Uniform scale followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub scale: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { scale: 1.0, dx: 0.0, dy: 0.0 };

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.scale * x + self.dx, self.scale * y + self.dy)
    }

    /// Scale from a source resolution, centring the leftover axis.
    pub fn from_resolution(src: Resolution, canvas: (u32, u32)) -> Transform {
        let s = (canvas.0 as f64 / src.width as f64).min(canvas.1 as f64 / src.height as f64);
        Transform {
            scale: s,
            dx: 0.5 * (canvas.0 as f64 - s * src.width as f64),
            dy: 0.5 * (canvas.1 as f64 - s * src.height as f64),
        }
    }

    /// Fit the box `(x0, y0, x1, y1)` inside the canvas, keeping `margin` free
    /// and centring. A point-like box is centred without scaling.
    pub fn fit_box(bbox: (f64, f64, f64, f64), canvas: (u32, u32), margin: f64) -> Transform {
        let (x0, y0, x1, y1) = bbox;
        let (w, h) = (canvas.0 as f64, canvas.1 as f64);
        let (aw, ah) = ((w - 2.0 * margin).max(1.0), (h - 2.0 * margin).max(1.0));
        let (bw, bh) = (x1 - x0, y1 - y0);
        let s = match (bw > 0.0, bh > 0.0) {
            (true, true) => (aw / bw).min(ah / bh),
            (true, false) => aw / bw,
            (false, true) => ah / bh,
            (false, false) => 1.0,
        };
        Transform {
            scale: s,
            dx: 0.5 * w - s * 0.5 * (x0 + x1),
            dy: 0.5 * h - s * 0.5 * (y0 + y1),
        }
    }

    /// Transform for a whole sequence, so the figure does not jump between frames.
    pub fn for_sequence(seq: &PoseSequence, canvas: (u32, u32), style: &RenderStyle) -> Transform {
        match style.fit {
            Fit::Identity => Transform::IDENTITY,
            Fit::Resolution => Transform::from_resolution(seq.resolution, canvas),
            Fit::BoundingBox => match bounding_box(seq.frames.iter()) {
                Some(b) => Transform::fit_box(b, canvas, style.margin),
                None => Transform::IDENTITY,
            },
        }
    }
}

fn bounding_box<'a>(frames: impl Iterator<Item = &'a PoseFrame>) -> Option<(f64, f64, f64, f64)> {
    let mut b: Option<(f64, f64, f64, f64)> = None;
    for f in frames {
        for k in f.keypoints.iter().filter(|k| k.is_detected()) {
            b = Some(match b {
                None => (k.x, k.y, k.x, k.y),
                Some((x0, y0, x1, y1)) => (x0.min(k.x), y0.min(k.y), x1.max(k.x), y1.max(k.y)),
            });
        }
    }
    b
}

fn check_canvas(canvas: (u32, u32)) -> Result<()> {
    if canvas.0 < 2 || canvas.1 < 2 {
        return Err(Error::invalid(format!("degenerate canvas {}x{}", canvas.0, canvas.1)));
    }
    Ok(())
}

fn blend(img: &mut RgbImage, x: u32, y: u32, colour: [u8; 3], alpha: f64) {
    if alpha <= 0.0 {
        return;
    }
    let a = alpha.min(1.0);
    let p = img.get_pixel_mut(x, y);
    for c in 0..3 {
        let v = p.0[c] as f64 * (1.0 - a) + colour[c] as f64 * a;
        p.0[c] = v.round().clamp(0.0, 255.0) as u8;
    }
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((px - a.0) * vx + (py - a.1) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a.0 + t * vx, a.1 + t * vy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Anti-aliased capsule of radius `r` from `a` to `b`; a disc when `a == b`.
pub fn draw_capsule(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), r: f64, colour: [u8; 3]) {
    if ![a.0, a.1, b.0, b.1, r].iter().all(|v| v.is_finite()) {
        return;
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let pad = r + 1.0;
    let x0 = (a.0.min(b.0) - pad).floor().max(0.0);
    let y0 = (a.1.min(b.1) - pad).floor().max(0.0);
    let x1 = (a.0.max(b.0) + pad).ceil().min(w - 1.0);
    let y1 = (a.1.max(b.1) + pad).ceil().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let d = segment_distance(x as f64 + 0.5, y as f64 + 0.5, a, b);
            blend(img, x, y, colour, (r + 0.5 - d).clamp(0.0, 1.0));
        }
    }
}

/// Draw one frame with an explicit coordinate transform.
pub fn render_frame_with(frame: &PoseFrame, canvas: (u32, u32), style: &RenderStyle, tf: &Transform) -> Result<RgbImage> {
    check_canvas(canvas)?;
    let mut img = RgbImage::from_pixel(canvas.0, canvas.1, Rgb(style.background));
    let pts: Vec<Option<(f64, f64)>> = frame
        .keypoints
        .iter()
        .map(|k| k.is_detected().then(|| tf.apply(k.x, k.y)))
        .collect();
    for (e, &(i, j)) in EDGES.iter().enumerate() {
        if let (Some(a), Some(b)) = (pts[i], pts[j]) {
            draw_capsule(&mut img, a, b, 0.5 * style.line_width, BONE_COLOURS[e]);
        }
    }
    for p in pts.iter().take(NUM_JOINTS).flatten() {
        draw_capsule(&mut img, *p, *p, style.joint_radius, style.joint_colour);
    }
    Ok(img)
}

/// Draw the 17-bone skeleton of one frame. With [`Fit::BoundingBox`] the
/// frame's own keypoints define the box; [`Fit::Resolution`] assumes 1920x1080.
pub fn render_frame(frame: &PoseFrame, canvas: (u32, u32), style: &RenderStyle) -> Result<RgbImage> {
    check_canvas(canvas)?;
    let tf = match style.fit {
        Fit::Identity => Transform::IDENTITY,
        Fit::Resolution => Transform::from_resolution(Resolution::default(), canvas),
        Fit::BoundingBox => bounding_box(std::iter::once(frame))
            .map(|b| Transform::fit_box(b, canvas, style.margin))
            .unwrap_or(Transform::IDENTITY),
    };
    render_frame_with(frame, canvas, style, &tf)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestResolution {
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub fps: u32,
    pub frame_count: usize,
    pub resolution: ManifestResolution,
    pub pattern: String,
}

pub fn frame_file_name(i: usize) -> String {
    format!("frame_{i:06}.png")
}

fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Frames rendered per parallel batch before being written in order.
const RENDER_CHUNK: usize = 64;

/// Render every frame to `out_dir/frame_%06d.png` and write `manifest.json`.
/// All frames share one transform. Nothing is written for an empty sequence.
pub fn render_video(seq: &PoseSequence, out_dir: impl AsRef<Path>, fps: u32, canvas: (u32, u32), style: &RenderStyle) -> Result<RenderManifest> {
    let out_dir = out_dir.as_ref();
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if fps == 0 {
        return Err(Error::invalid("fps must be positive"));
    }
    check_canvas(canvas)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let tf = Transform::for_sequence(seq, canvas, style);
    for (c, chunk) in seq.frames.chunks(RENDER_CHUNK).enumerate() {
        let encoded: Vec<Result<Vec<u8>>> = chunk
            .par_iter()
            .map(|f| render_frame_with(f, canvas, style, &tf).and_then(|img| encode_png(&img)))
            .collect();
        for (k, png) in encoded.into_iter().enumerate() {
            write_file(&out_dir.join(frame_file_name(c * RENDER_CHUNK + k)), &png?)?;
        }
    }
    let manifest = RenderManifest {
        fps,
        frame_count: seq.len(),
        resolution: ManifestResolution { width: canvas.0, height: canvas.1 },
        pattern: "frame_%06d.png".into(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_file(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// Animated GIF of the sequence, looping forever.
pub fn export_gif(seq: &PoseSequence, path: impl AsRef<Path>, fps: u32, canvas: (u32, u32), style: &RenderStyle) -> Result<()> {
    let path = path.as_ref();
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if fps == 0 {
        return Err(Error::invalid("fps must be positive"));
    }
    check_canvas(canvas)?;
    let tf = Transform::for_sequence(seq, canvas, style);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = GifEncoder::new_with_speed(BufWriter::new(file), 10);
    enc.set_repeat(Repeat::Infinite)?;
    let delay = Delay::from_numer_denom_ms(1000, fps);
    for f in &seq.frames {
        let rgb = render_frame_with(f, canvas, style, &tf)?;
        let rgba: RgbaImage = image::DynamicImage::ImageRgb8(rgb).into_rgba8();
        enc.encode_frame(Frame::from_parts(rgba, 0, 0, delay))?;
    }
    Ok(())
}

pub const PLOT_SIZE: (u32, u32) = (1200, 300);
const PLOT_MARGIN: f64 = 20.0;

/// Pixel column of frame `i` in a plot of `n` frames.
pub fn plot_x(i: usize, n: usize) -> u32 {
    let span = PLOT_SIZE.0 as f64 - 2.0 * PLOT_MARGIN;
    let x = PLOT_MARGIN + if n > 1 { span * i as f64 / (n - 1) as f64 } else { 0.5 * span };
    x.round() as u32
}

/// Pose beats shown by [`plot_beat_alignment`]: the movement maximum in each
/// audio beat's window.
pub fn plotted_pose_beats(beats: &BeatTrack, seq: &PoseSequence) -> Vec<usize> {
    let spacing = beats.median_spacing().unwrap_or(seq.fps as usize / 2).max(2);
    find_pose_beats_near(seq, &beats.beat_frames, spacing)
}

/// Movement curve with a vertical line per audio beat and a marker per pose beat.
pub fn beat_alignment_plot(beats: &BeatTrack, seq: &PoseSequence) -> Result<RgbImage> {
    if beats.is_empty() || seq.is_empty() {
        return Err(Error::invalid("beat alignment plot needs beats and frames"));
    }
    let (w, h) = PLOT_SIZE;
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let n = seq.len();
    let m = seq.movement();
    let peak = m.iter().cloned().fold(0.0, f64::max);
    let (top, bottom) = (PLOT_MARGIN, h as f64 - PLOT_MARGIN);
    let y_of = |v: f64| if peak > 0.0 { bottom - (bottom - top) * v / peak } else { bottom };
    for &b in beats.beat_frames.iter().filter(|&&b| b < n) {
        let x = plot_x(b, n) as f64 + 0.5;
        draw_capsule(&mut img, (x, top), (x, bottom), 0.5, [220, 40, 40]);
    }
    for i in 1..n {
        let a = (plot_x(i - 1, n) as f64 + 0.5, y_of(m[i - 1]));
        let b = (plot_x(i, n) as f64 + 0.5, y_of(m[i]));
        draw_capsule(&mut img, a, b, 1.0, [30, 30, 30]);
    }
    for p in plotted_pose_beats(beats, seq) {
        let c = (plot_x(p, n) as f64 + 0.5, y_of(m[p]));
        draw_capsule(&mut img, c, c, 4.0, [40, 90, 220]);
    }
    Ok(img)
}

/// Write [`beat_alignment_plot`] as a PNG and return the image.
pub fn plot_beat_alignment(beats: &BeatTrack, seq: &PoseSequence, out: impl AsRef<Path>) -> Result<RgbImage> {
    let img = beat_alignment_plot(beats, seq)?;
    let out: PathBuf = out.as_ref().to_path_buf();
    write_file(&out, &encode_png(&img)?)?;
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Keypoint;

    fn frame(at: impl Fn(usize) -> (f64, f64)) -> PoseFrame {
        let mut k = [Keypoint::default(); NUM_JOINTS];
        for (j, kp) in k.iter_mut().enumerate() {
            let (x, y) = at(j);
            *kp = Keypoint::new(x, y, 1.0);
        }
        PoseFrame::new(0, k)
    }

    #[test]
    fn degenerate_canvas_rejected() {
        let f = frame(|j| (j as f64, j as f64));
        assert!(render_frame(&f, (0, 10), &RenderStyle::default()).is_err());
        assert!(render_frame(&f, (10, 1), &RenderStyle::default()).is_err());
    }

    #[test]
    fn collapsed_pose_is_one_disc() {
        let f = frame(|_| (50.0, 40.0));
        let style = RenderStyle { fit: Fit::Identity, ..RenderStyle::default() };
        let img = render_frame(&f, (100, 80), &style).unwrap();
        let bg = Rgb(style.background);
        let touched: Vec<(u32, u32)> = img.enumerate_pixels().filter(|(_, _, p)| **p != bg).map(|(x, y, _)| (x, y)).collect();
        let diameter = 2.0 * style.joint_radius.max(0.5 * style.line_width) + 2.0;
        for &(x, y) in &touched {
            let d = ((x as f64 + 0.5 - 50.0).powi(2) + (y as f64 + 0.5 - 40.0).powi(2)).sqrt();
            assert!(d <= 0.5 * diameter, "pixel {x},{y} at {d}");
        }
        assert!(!touched.is_empty());
    }

    #[test]
    fn fit_box_centres_and_keeps_margin() {
        let t = Transform::fit_box((0.0, 0.0, 10.0, 20.0), (200, 100), 10.0);
        assert_eq!(t.scale, 4.0);
        assert_eq!(t.apply(5.0, 10.0), (100.0, 50.0));
        assert_eq!(t.apply(5.0, 0.0).1, 10.0);
        let p = Transform::fit_box((3.0, 3.0, 3.0, 3.0), (20, 20), 2.0);
        assert_eq!(p.apply(3.0, 3.0), (10.0, 10.0));
    }

    #[test]
    fn plot_columns_are_monotone() {
        let xs: Vec<u32> = (0..50).map(|i| plot_x(i, 50)).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(xs[0], PLOT_MARGIN as u32);
        assert_eq!(*xs.last().unwrap(), PLOT_SIZE.0 - PLOT_MARGIN as u32);
    }
}
