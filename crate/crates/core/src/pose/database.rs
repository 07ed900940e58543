use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::fragment::check_duration;
use super::{Keypoint, PoseFragment, PoseFrame, PoseSequence, Resolution};
use crate::crossmodal::Embedding;
use crate::error::{Error, Result};
use crate::skeleton::NUM_JOINTS;

pub const DB_MAGIC: &[u8; 4] = b"CKDB";
pub const DB_VERSION: u32 = 1;

const KIND: &str = "database";

/// Fragments sharing frame rate, resolution and duration.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentDatabase {
    pub fps: u32,
    pub resolution: Resolution,
    pub duration_s: u32,
    pub fragments: Vec<PoseFragment>,
}

impl FragmentDatabase {
    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn frames_per_fragment(&self) -> usize {
        self.duration_s as usize * self.fps as usize
    }

    /// Embedding dimension, 0 when no fragment carries one.
    pub fn embedding_dim(&self) -> usize {
        self.fragments
            .iter()
            .find_map(|f| f.embedding.as_ref().map(|e| e.dim()))
            .unwrap_or(0)
    }

    pub fn has_embeddings(&self) -> bool {
        !self.fragments.is_empty() && self.fragments.iter().all(|f| f.embedding.is_some())
    }

    /// Fragment id and absolute byte offset of its record in the saved file.
    pub fn index(&self) -> Vec<(String, u64)> {
        let offsets = record_offsets(self);
        self.fragments.iter().map(|f| f.id()).zip(offsets).collect()
    }

    fn validate(&self) -> Result<()> {
        if !self.fragments.is_empty() {
            check_duration(self.duration_s)?;
        }
        let dim = self.embedding_dim();
        for f in &self.fragments {
            if f.duration_s != self.duration_s || f.sequence.fps != self.fps {
                return Err(Error::Invariant(format!(
                    "fragment {} has {} s at {} fps, database holds {} s at {} fps",
                    f.id(),
                    f.duration_s,
                    f.sequence.fps,
                    self.duration_s,
                    self.fps
                )));
            }
            if f.sequence.resolution != self.resolution {
                return Err(Error::Invariant(format!("fragment {} has a different resolution", f.id())));
            }
            if f.len() != self.frames_per_fragment() {
                return Err(Error::Invariant(format!(
                    "fragment {} has {} frames, expected {}",
                    f.id(),
                    f.len(),
                    self.frames_per_fragment()
                )));
            }
            if let Some(e) = &f.embedding {
                if e.dim() != dim {
                    return Err(Error::Invariant(format!(
                        "fragment {} embedding has dimension {}, expected {}",
                        f.id(),
                        e.dim(),
                        dim
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Collect fragments into a database, checking that they agree on frame rate,
/// resolution and duration. An empty list gives an empty database with
/// default metadata.
pub fn build_database(fragments: Vec<PoseFragment>) -> Result<FragmentDatabase> {
    let db = match fragments.first() {
        Some(f) => FragmentDatabase {
            fps: f.sequence.fps,
            resolution: f.sequence.resolution,
            duration_s: f.duration_s,
            fragments,
        },
        None => FragmentDatabase {
            fps: crate::DEFAULT_FPS,
            resolution: Resolution::default(),
            duration_s: 0,
            fragments,
        },
    };
    db.validate()?;
    Ok(db)
}

const HEADER_LEN: u64 = 4 + 4 + 4 * 4 + 8 + 4;

fn record_len(f: &PoseFragment) -> u64 {
    let frame = 8 + (NUM_JOINTS * 3 * 8) as u64;
    4 + f.source_id.len() as u64
        + 8
        + 4
        + frame * f.len() as u64
        + 1
        + f.embedding.as_ref().map_or(0, |e| 8 * e.dim() as u64)
}

fn record_offsets(db: &FragmentDatabase) -> Vec<u64> {
    let mut pos = HEADER_LEN + 8 * db.fragments.len() as u64;
    db.fragments
        .iter()
        .map(|f| {
            let at = pos;
            pos += 8 + record_len(f);
            at
        })
        .collect()
}

pub fn encode_database(db: &FragmentDatabase) -> Result<Vec<u8>> {
    db.validate()?;
    let mut buf = Vec::new();
    let w = &mut buf;
    let io = |e: std::io::Error| Error::Corrupt { kind: KIND, message: e.to_string() };
    w.extend_from_slice(DB_MAGIC);
    w.write_u32::<LE>(DB_VERSION).map_err(io)?;
    w.write_u32::<LE>(db.fps).map_err(io)?;
    w.write_u32::<LE>(db.resolution.width).map_err(io)?;
    w.write_u32::<LE>(db.resolution.height).map_err(io)?;
    w.write_u32::<LE>(db.duration_s).map_err(io)?;
    w.write_u64::<LE>(db.fragments.len() as u64).map_err(io)?;
    w.write_u32::<LE>(db.embedding_dim() as u32).map_err(io)?;
    for off in record_offsets(db) {
        w.write_u64::<LE>(off).map_err(io)?;
    }
    for f in &db.fragments {
        w.write_u64::<LE>(record_len(f)).map_err(io)?;
        w.write_u32::<LE>(f.source_id.len() as u32).map_err(io)?;
        w.extend_from_slice(f.source_id.as_bytes());
        w.write_u64::<LE>(f.start_frame as u64).map_err(io)?;
        w.write_u32::<LE>(f.len() as u32).map_err(io)?;
        for frame in &f.sequence.frames {
            w.write_u64::<LE>(frame.frame_index as u64).map_err(io)?;
            for k in frame.keypoints.iter() {
                w.write_f64::<LE>(k.x).map_err(io)?;
                w.write_f64::<LE>(k.y).map_err(io)?;
                w.write_f64::<LE>(k.confidence).map_err(io)?;
            }
        }
        match &f.embedding {
            Some(e) => {
                w.write_u8(1).map_err(io)?;
                for &v in e.values() {
                    w.write_f64::<LE>(v).map_err(io)?;
                }
            }
            None => w.write_u8(0).map_err(io)?,
        }
    }
    Ok(buf)
}

pub fn decode_database(bytes: &[u8]) -> Result<FragmentDatabase> {
    let corrupt = |m: String| Error::Corrupt { kind: KIND, message: m };
    let eof = |e: std::io::Error| Error::Corrupt { kind: KIND, message: format!("truncated: {e}") };
    if bytes.len() < 4 || &bytes[..4] != DB_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let mut r = Cursor::new(bytes);
    r.set_position(4);
    let version = r.read_u32::<LE>().map_err(eof)?;
    if version != DB_VERSION {
        return Err(Error::IncompatibleVersion { kind: KIND, found: version, expected: DB_VERSION });
    }
    let fps = r.read_u32::<LE>().map_err(eof)?;
    let width = r.read_u32::<LE>().map_err(eof)?;
    let height = r.read_u32::<LE>().map_err(eof)?;
    let duration_s = r.read_u32::<LE>().map_err(eof)?;
    let count = r.read_u64::<LE>().map_err(eof)?;
    let dim = r.read_u32::<LE>().map_err(eof)? as usize;
    if fps == 0 {
        return Err(corrupt("zero frame rate".into()));
    }
    if count > (bytes.len() as u64) / 8 {
        return Err(corrupt(format!("fragment count {count} exceeds file size")));
    }
    let mut offsets = Vec::with_capacity(count as usize);
    for _ in 0..count {
        offsets.push(r.read_u64::<LE>().map_err(eof)?);
    }
    let resolution = Resolution { width, height };
    let mut fragments = Vec::with_capacity(count as usize);
    for (k, &off) in offsets.iter().enumerate() {
        if r.position() != off {
            return Err(corrupt(format!("record {k} at {} but index says {off}", r.position())));
        }
        let len = r.read_u64::<LE>().map_err(eof)?;
        let body_start = r.position();
        let id_len = r.read_u32::<LE>().map_err(eof)? as usize;
        if id_len > bytes.len() {
            return Err(corrupt(format!("record {k}: source id length {id_len}")));
        }
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(eof)?;
        let source_id = String::from_utf8(id).map_err(|e| corrupt(format!("record {k}: {e}")))?;
        let start_frame = r.read_u64::<LE>().map_err(eof)? as usize;
        let n = r.read_u32::<LE>().map_err(eof)? as usize;
        if n > bytes.len() / (NUM_JOINTS * 24) {
            return Err(corrupt(format!("record {k}: frame count {n}")));
        }
        let mut frames = Vec::with_capacity(n);
        for _ in 0..n {
            let frame_index = r.read_u64::<LE>().map_err(eof)? as usize;
            let mut kps = [Keypoint::default(); NUM_JOINTS];
            for kp in kps.iter_mut() {
                kp.x = r.read_f64::<LE>().map_err(eof)?;
                kp.y = r.read_f64::<LE>().map_err(eof)?;
                kp.confidence = r.read_f64::<LE>().map_err(eof)?;
            }
            frames.push(PoseFrame::new(frame_index, kps));
        }
        let embedding = match r.read_u8().map_err(eof)? {
            0 => None,
            1 => {
                let mut v = Vec::with_capacity(dim);
                for _ in 0..dim {
                    v.push(r.read_f64::<LE>().map_err(eof)?);
                }
                Some(Embedding::new(v))
            }
            flag => return Err(corrupt(format!("record {k}: embedding flag {flag}"))),
        };
        if r.position() - body_start != len {
            return Err(corrupt(format!("record {k}: length field {len} does not match contents")));
        }
        fragments.push(PoseFragment {
            source_id,
            start_frame,
            duration_s,
            sequence: PoseSequence::new(frames, fps, resolution),
            embedding,
        });
    }
    if r.position() != bytes.len() as u64 {
        return Err(corrupt("trailing bytes after last record".into()));
    }
    let db = FragmentDatabase { fps, resolution, duration_s, fragments };
    db.validate().map_err(|e| corrupt(e.to_string()))?;
    Ok(db)
}

pub fn save_database(db: &FragmentDatabase, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_database(db)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_database(path: impl AsRef<Path>) -> Result<FragmentDatabase> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_database(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::segment_fragments;

    fn fragments(n: usize, with_embedding: bool) -> Vec<PoseFragment> {
        let frames = (0..24 * n)
            .map(|i| {
                let mut k = [Keypoint::default(); NUM_JOINTS];
                for (j, kp) in k.iter_mut().enumerate() {
                    *kp = Keypoint::new(i as f64 * 0.1 + j as f64 / 3.0, j as f64 * 1e-7, 0.5 + j as f64 / 40.0);
                }
                PoseFrame::new(i, k)
            })
            .collect();
        let seq = PoseSequence::new(frames, 24, Resolution::default());
        let mut f = segment_fragments(&seq, "src-α", 1).unwrap();
        if with_embedding {
            for (i, fr) in f.iter_mut().enumerate() {
                fr.embedding = Some(Embedding::new((0..16).map(|d| (i * 16 + d) as f64 / 7.0).collect()));
            }
        }
        f
    }

    #[test]
    fn empty_round_trip() {
        let db = build_database(vec![]).unwrap();
        assert_eq!(decode_database(&encode_database(&db).unwrap()).unwrap(), db);
    }

    #[test]
    fn round_trip_with_embeddings_is_bit_exact() {
        let db = build_database(fragments(10, true)).unwrap();
        assert_eq!(db.len(), 10);
        let back = decode_database(&encode_database(&db).unwrap()).unwrap();
        assert_eq!(back, db);
        for (a, b) in db.fragments.iter().zip(back.fragments.iter()) {
            let ea = a.embedding.as_ref().unwrap().values();
            let eb = b.embedding.as_ref().unwrap().values();
            assert!(ea.iter().zip(eb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn index_points_at_records() {
        let db = build_database(fragments(3, false)).unwrap();
        let bytes = encode_database(&db).unwrap();
        for (id, off) in db.index() {
            let at = off as usize + 8;
            let n = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
            let sid = std::str::from_utf8(&bytes[at + 4..at + 4 + n]).unwrap();
            assert!(id.starts_with(sid));
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let db = build_database(fragments(2, false)).unwrap();
        let mut bytes = encode_database(&db).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_database(&bytes), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn version_mismatch_rejected() {
        let db = build_database(fragments(1, false)).unwrap();
        let mut bytes = encode_database(&db).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode_database(&bytes), Err(Error::IncompatibleVersion { found: 9, .. })));
    }

    #[test]
    fn truncation_rejected() {
        let db = build_database(fragments(2, true)).unwrap();
        let bytes = encode_database(&db).unwrap();
        for cut in [10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_database(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn mixed_durations_rejected() {
        let mut f = fragments(2, false);
        f[1].duration_s = 2;
        assert!(matches!(build_database(f), Err(Error::Invariant(_))));
    }
}
