//! C interface to choreokit.
//!
//! Every fallible call returns a [`CkStatus`]; on failure the message is kept
//! per thread and read with [`ck_last_error_message`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `_free` function. Panics are caught and reported as `CK_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use choreokit::audio::{detect_beats, load_audio, AudioClip};
use choreokit::config::{ConfigLayer, Settings};
use choreokit::crossmodal::{load_model, ModelParams};
use choreokit::metrics::NUM_BINS;
use choreokit::pipeline;
use choreokit::pose::{load_database, load_keypoint_sequence, save_keypoint_sequence, FragmentDatabase, PoseSequence};
use choreokit::render::{render_video, RenderStyle};
use choreokit::skeleton::NUM_JOINTS;
use choreokit::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CkStatus {
    CkOk = 0,
    /// A required pointer argument was null.
    CkNullArgument = 1,
    /// An argument was out of range or inconsistent.
    CkInvalidArgument = 2,
    CkIo = 3,
    /// A file could not be parsed or has the wrong version.
    CkFormat = 4,
    /// Nothing usable was left after cleaning.
    CkNoData = 5,
    CkNumerical = 6,
    CkPanic = 7,
}

/// Opaque pose sequence.
pub struct CkSequence(PoseSequence);
/// Opaque mono audio clip.
pub struct CkAudio(AudioClip);
/// Opaque fragment database.
pub struct CkDatabase(FragmentDatabase);
/// Opaque trained model.
pub struct CkModel(ModelParams);
/// Opaque resolved settings.
pub struct CkSettings(Settings);

/// Scores produced by [`ck_evaluate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CkReport {
    pub s_ba: f64,
    pub mdd_h: f64,
    pub mdd_f: f64,
    pub sdd_h: f64,
    pub sdd_f: f64,
    pub hand_hist: [f64; 5],
    pub foot_hist: [f64; 5],
}

const _: () = assert!(NUM_BINS == 5);

/// Keypoints per frame.
pub const CK_NUM_JOINTS: usize = 18;

const _: () = assert!(NUM_JOINTS == CK_NUM_JOINTS);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => CkStatus::CkIo,
            Error::Parse { .. }
            | Error::Schema { .. }
            | Error::UnsupportedEncoding(_)
            | Error::IncompatibleVersion { .. }
            | Error::Corrupt { .. } => CkStatus::CkFormat,
            Error::EmptySequence | Error::NoData(_) | Error::DegenerateFragment(_) => CkStatus::CkNoData,
            Error::Numerical(_) => CkStatus::CkNumerical,
            _ => CkStatus::CkInvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CkStatus::CkNullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::CkOk,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CkStatus::CkPanic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CkStatus::CkInvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn settings_or_default(s: Option<&CkSettings>) -> Result<Settings, Failure> {
    match s {
        Some(s) => Ok(s.0.clone()),
        None => Ok(Settings::resolve(None, &ConfigLayer::default())?),
    }
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ck_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load settings from a TOML file; a null path gives the defaults.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_settings_load(path: *const c_char, out: *mut *mut CkSettings) -> CkStatus {
    guard(|| {
        let file = if path.is_null() { None } else { Some(ConfigLayer::load(path_arg(path, "path")?)?) };
        put(out, CkSettings(Settings::resolve(file.as_ref(), &ConfigLayer::default())?))
    })
}

/// # Safety
/// `s` must be null or a handle from [`ck_settings_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ck_settings_free(s: *mut CkSettings) {
    free(s)
}

/// Read a keypoint JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_load(path: *const c_char, out: *mut *mut CkSequence) -> CkStatus {
    guard(|| put(out, CkSequence(load_keypoint_sequence(path_arg(path, "path")?)?)))
}

/// Write a keypoint JSON file.
///
/// # Safety
/// `seq` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_save(seq: *const CkSequence, path: *const c_char) -> CkStatus {
    guard(|| Ok(save_keypoint_sequence(&handle(seq, "sequence")?.0, path_arg(path, "path")?)?))
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_len(seq: *const CkSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Frame rate, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_fps(seq: *const CkSequence) -> u32 {
    seq.as_ref().map_or(0, |s| s.0.fps)
}

/// Copy frame `frame` as `CK_NUM_JOINTS` triples `x, y, confidence` into `out`.
///
/// # Safety
/// `seq` must be a live handle; `out` must hold `3 * CK_NUM_JOINTS` doubles.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_frame(seq: *const CkSequence, frame: usize, out: *mut f64) -> CkStatus {
    guard(|| {
        let s = &handle(seq, "sequence")?.0;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let f = s
            .frames
            .get(frame)
            .ok_or_else(|| Failure(CkStatus::CkInvalidArgument, format!("frame {frame} out of range ({} frames)", s.len())))?;
        let buf = std::slice::from_raw_parts_mut(out, 3 * CK_NUM_JOINTS);
        for (j, k) in f.keypoints.iter().enumerate() {
            buf[3 * j..3 * j + 3].copy_from_slice(&[k.x, k.y, k.confidence]);
        }
        Ok(())
    })
}

/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_sequence_free(seq: *mut CkSequence) {
    free(seq)
}

/// Read a WAV file, mixed to mono and resampled to the internal rate.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_audio_load(path: *const c_char, out: *mut *mut CkAudio) -> CkStatus {
    guard(|| put(out, CkAudio(load_audio(path_arg(path, "path")?)?)))
}

/// Duration in seconds, or 0 for a null handle.
///
/// # Safety
/// `audio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_audio_duration(audio: *const CkAudio) -> f64 {
    audio.as_ref().map_or(0.0, |a| a.0.duration_s())
}

/// Beat frames at `fps`. Up to `cap` frames are written to `out`; the full
/// count goes to `count`, so a call with `cap = 0` queries the size.
///
/// # Safety
/// `audio` must be a live handle; `out` must hold `cap` values or be null
/// when `cap` is 0; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_audio_beats(audio: *const CkAudio, fps: u32, out: *mut usize, cap: usize, count: *mut usize) -> CkStatus {
    guard(|| {
        let a = &handle(audio, "audio")?.0;
        if count.is_null() || (cap > 0 && out.is_null()) {
            return Err(null("output buffer"));
        }
        let beats = detect_beats(a, fps)?.beat_frames;
        *count = beats.len();
        if cap > 0 {
            let n = cap.min(beats.len());
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&beats[..n]);
        }
        Ok(())
    })
}

/// # Safety
/// `audio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_audio_free(audio: *mut CkAudio) {
    free(audio)
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_database_load(path: *const c_char, out: *mut *mut CkDatabase) -> CkStatus {
    guard(|| put(out, CkDatabase(load_database(path_arg(path, "path")?)?)))
}

/// Number of fragments, or 0 for a null handle.
///
/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_database_len(db: *const CkDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_database_free(db: *mut CkDatabase) {
    free(db)
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_model_load(path: *const c_char, out: *mut *mut CkModel) -> CkStatus {
    guard(|| put(out, CkModel(load_model(path_arg(path, "path")?)?)))
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_model_free(model: *mut CkModel) {
    free(model)
}

/// Retrieve one fragment per audio segment and align the result.
/// `settings` may be null for the defaults; `skip_align` non-zero returns the
/// plain concatenation.
///
/// # Safety
/// Handles must be live (`settings` may be null); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_generate(
    model: *const CkModel,
    db: *const CkDatabase,
    audio: *const CkAudio,
    settings: *const CkSettings,
    skip_align: i32,
    out: *mut *mut CkSequence,
) -> CkStatus {
    guard(|| {
        let s = settings_or_default(settings.as_ref())?;
        let g = pipeline::generate(&handle(model, "model")?.0, &handle(db, "database")?.0, &handle(audio, "audio")?.0, &s, skip_align != 0)?;
        put(out, CkSequence(g.poses))
    })
}

/// Score `seq` against its audio, using every fragment of `reference` as
/// reference motion.
///
/// # Safety
/// Handles must be live (`settings` may be null); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_evaluate(
    seq: *const CkSequence,
    audio: *const CkAudio,
    reference: *const CkDatabase,
    settings: *const CkSettings,
    out: *mut CkReport,
) -> CkStatus {
    guard(|| {
        let s = settings_or_default(settings.as_ref())?;
        if out.is_null() {
            return Err(null("output report"));
        }
        let refs = pipeline::database_sequences(&handle(reference, "reference")?.0);
        let r = pipeline::evaluate(&handle(seq, "sequence")?.0, &handle(audio, "audio")?.0, &refs, &s)?;
        *out = CkReport {
            s_ba: r.s_ba,
            mdd_h: r.mdd_h,
            mdd_f: r.mdd_f,
            sdd_h: r.sdd_h,
            sdd_f: r.sdd_f,
            hand_hist: r.hand_hist,
            foot_hist: r.foot_hist,
        };
        Ok(())
    })
}

/// Render numbered PNG frames and `manifest.json` into `dir`.
///
/// # Safety
/// `seq` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ck_render(seq: *const CkSequence, dir: *const c_char, width: u32, height: u32) -> CkStatus {
    guard(|| {
        let s = &handle(seq, "sequence")?.0;
        render_video(s, path_arg(dir, "dir")?, s.fps, (width, height), &RenderStyle::default())?;
        Ok(())
    })
}
