use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Keypoint, PoseFrame, PoseSequence, Resolution};
use crate::error::{Error, Result};
use crate::skeleton::NUM_JOINTS;

#[derive(Serialize, Deserialize)]
struct KeypointFile {
    fps: u32,
    width: u32,
    height: u32,
    frames: Vec<Vec<Vec<f64>>>,
}

pub fn load_keypoint_sequence(path: impl AsRef<Path>) -> Result<PoseSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keypoint_json(&text, &path.display().to_string())
}

pub fn parse_keypoint_json(text: &str, origin: &str) -> Result<PoseSequence> {
    let file: KeypointFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_string(),
        message: format!("line {} column {}: {}", e.line(), e.column(), e),
    })?;
    if file.fps == 0 || file.width == 0 || file.height == 0 {
        return Err(Error::Parse {
            origin: origin.to_string(),
            message: "fps, width and height must be positive".into(),
        });
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    for (fi, raw) in file.frames.iter().enumerate() {
        if raw.len() != NUM_JOINTS {
            return Err(Error::Schema {
                origin: origin.to_string(),
                frame: fi,
                message: format!("expected {} keypoints, found {}", NUM_JOINTS, raw.len()),
            });
        }
        let mut kps = [Keypoint::default(); NUM_JOINTS];
        for (j, v) in raw.iter().enumerate() {
            if v.len() != 3 {
                return Err(Error::Schema {
                    origin: origin.to_string(),
                    frame: fi,
                    message: format!("keypoint {} has {} values, expected [x, y, c]", j, v.len()),
                });
            }
            if !(0.0..=1.0).contains(&v[2]) {
                return Err(Error::Schema {
                    origin: origin.to_string(),
                    frame: fi,
                    message: format!("keypoint {} confidence {} outside [0, 1]", j, v[2]),
                });
            }
            kps[j] = Keypoint::new(v[0], v[1], v[2]);
        }
        frames.push(PoseFrame::new(fi, kps));
    }
    Ok(PoseSequence::new(
        frames,
        file.fps,
        Resolution {
            width: file.width,
            height: file.height,
        },
    ))
}

pub fn to_keypoint_json(seq: &PoseSequence) -> String {
    let file = KeypointFile {
        fps: seq.fps,
        width: seq.resolution.width,
        height: seq.resolution.height,
        frames: seq
            .frames
            .iter()
            .map(|f| {
                f.keypoints
                    .iter()
                    .map(|k| vec![k.x, k.y, k.confidence])
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("keypoint file serialization cannot fail")
}

pub fn save_keypoint_sequence(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_keypoint_json(seq)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_json(n: usize) -> String {
        let kp: Vec<String> = (0..n).map(|j| format!("[{}.5, {}.25, 0.9]", j, j)).collect();
        format!("[{}]", kp.join(","))
    }

    #[test]
    fn one_second_file() {
        let frames: Vec<String> = (0..24).map(|_| frame_json(18)).collect();
        let text = format!(
            "{{\"fps\":24,\"width\":1920,\"height\":1080,\"frames\":[{}]}}",
            frames.join(",")
        );
        let seq = parse_keypoint_json(&text, "mem").unwrap();
        assert_eq!(seq.len(), 24);
        assert_eq!(seq.duration_s(), 1.0);
    }

    #[test]
    fn seventeen_keypoints_is_schema_error() {
        let text = format!(
            "{{\"fps\":24,\"width\":100,\"height\":100,\"frames\":[{},{}]}}",
            frame_json(18),
            frame_json(17)
        );
        match parse_keypoint_json(&text, "mem") {
            Err(Error::Schema { frame, .. }) => assert_eq!(frame, 1),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_reports_line() {
        let err = parse_keypoint_json("{\n\"fps\": 24,\n oops", "mem").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let text = format!(
            "{{\"fps\":24,\"width\":100,\"height\":100,\"frames\":[{}]}}",
            frame_json(18)
        );
        let mut seq = parse_keypoint_json(&text, "mem").unwrap();
        seq.frames[0].keypoints[3].x = 0.1 + 0.2;
        seq.frames[0].keypoints[4].y = 1.0 / 3.0;
        let back = parse_keypoint_json(&to_keypoint_json(&seq), "mem").unwrap();
        assert_eq!(seq, back);
    }
}
