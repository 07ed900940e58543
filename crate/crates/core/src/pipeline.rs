//! End-to-end commands: ingest, train, generate, evaluate and the demo.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::alignment::{find_pose_beats_near, spatial_align, temporal_align};
use crate::audio::{compute_mfcc, detect_beats, load_audio, segment_audio, AudioClip, BeatTrack, MfccSequence};
use crate::config::Settings;
use crate::crossmodal::{
    attach_embeddings, correlation_accuracy, make_training_pairs, nearest_index, train, audio_encode, ModelParams,
    PairedSource,
};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::pose::{
    build_database, contiguous_runs, fill_missing_keypoints, filter_invalid_frames, load_keypoint_sequence,
    normalize_fragment, recenter_fragment, segment_fragments, smooth_sequence, FragmentDatabase, PoseSequence,
};

/// Pixel thresholds are stated for a 1080-pixel-high frame.
const REFERENCE_HEIGHT: f64 = 1080.0;

/// A keypoint file and the audio recorded with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFiles {
    pub id: String,
    pub keypoints: PathBuf,
    pub audio: PathBuf,
}

/// Top-level `<id>.json` files that have a matching `<id>.wav`, sorted by id.
/// Files of either kind without a partner are returned separately.
pub fn discover_sources(dir: impl AsRef<Path>) -> Result<(Vec<SourceFiles>, Vec<PathBuf>)> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = BTreeMap::new();
    let mut wav = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        let stem = stem.to_string_lossy().into_owned();
        match ext.to_string_lossy().to_ascii_lowercase().as_str() {
            "json" => {
                json.insert(stem, path);
            }
            "wav" => {
                wav.insert(stem, path);
            }
            _ => {}
        }
    }
    let mut sources = Vec::new();
    let mut unpaired = Vec::new();
    for (id, keypoints) in json {
        match wav.remove(&id) {
            Some(audio) => sources.push(SourceFiles { id, keypoints, audio }),
            None => unpaired.push(keypoints),
        }
    }
    unpaired.extend(wav.into_values());
    unpaired.sort();
    Ok((sources, unpaired))
}

/// What cleaning did to one source.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FileStats {
    pub source_id: String,
    pub frames: usize,
    pub removed_frames: usize,
    pub runs: usize,
    pub fragments: usize,
    pub degenerate_fragments: usize,
}

/// Fill gaps, remove spikes, drop invalid frames and split what is left into
/// runs of consecutive frames.
pub fn clean_sequence(seq: &PoseSequence, settings: &Settings) -> Result<(Vec<PoseSequence>, usize)> {
    let px = seq.resolution.height as f64 / REFERENCE_HEIGHT;
    let filled = fill_missing_keypoints(seq);
    let smoothed = smooth_sequence(&filled, settings.jitter_threshold * px);
    let outcome = filter_invalid_frames(&smoothed, settings.distance_threshold * px)?;
    Ok((contiguous_runs(&outcome.sequence), outcome.removed.len()))
}

/// Database plus per-file statistics and the inputs that could not be used.
#[derive(Clone, Debug)]
pub struct IngestReport {
    pub database: FragmentDatabase,
    pub files: Vec<FileStats>,
    pub failures: Vec<(PathBuf, String)>,
}

fn check_fps(seq: &PoseSequence, settings: &Settings, origin: &Path) -> Result<()> {
    if seq.fps != settings.fps {
        return Err(Error::Schema {
            origin: origin.display().to_string(),
            frame: 0,
            message: format!("declared fps {} but the run is configured for {}", seq.fps, settings.fps),
        });
    }
    Ok(())
}

/// Smooth, filter, segment and normalise every source in `dir` and collect
/// the fragments into a database. Fails if no fragment survives.
pub fn ingest_dir(dir: impl AsRef<Path>, settings: &Settings) -> Result<IngestReport> {
    let (sources, unpaired) = discover_sources(&dir)?;
    let mut failures: Vec<(PathBuf, String)> = unpaired.into_iter().map(|p| (p, "no matching partner file".to_string())).collect();
    let mut fragments = Vec::new();
    let mut files = Vec::new();
    for src in &sources {
        let seq = match load_keypoint_sequence(&src.keypoints).and_then(|s| check_fps(&s, settings, &src.keypoints).map(|_| s)) {
            Ok(s) => s,
            Err(e) => {
                failures.push((src.keypoints.clone(), e.to_string()));
                continue;
            }
        };
        let mut stats = FileStats { source_id: src.id.clone(), frames: seq.len(), ..FileStats::default() };
        let runs = match clean_sequence(&seq, settings) {
            Ok((runs, removed)) => {
                stats.removed_frames = removed;
                runs
            }
            Err(Error::EmptySequence) => {
                stats.removed_frames = seq.len();
                files.push(stats);
                continue;
            }
            Err(e) => {
                failures.push((src.keypoints.clone(), e.to_string()));
                continue;
            }
        };
        stats.runs = runs.len();
        for run in &runs {
            for frag in segment_fragments(run, &src.id, settings.duration_s)? {
                match normalize_fragment(&frag, settings.target_height * seq.resolution.height as f64 / REFERENCE_HEIGHT) {
                    Ok(f) => {
                        fragments.push(f);
                        stats.fragments += 1;
                    }
                    Err(Error::DegenerateFragment(_)) => stats.degenerate_fragments += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        files.push(stats);
    }
    if fragments.is_empty() {
        return Err(Error::NoData(format!(
            "{} produced no fragments ({} sources, {} unusable inputs)",
            dir.as_ref().display(),
            sources.len(),
            failures.len()
        )));
    }
    Ok(IngestReport { database: build_database(fragments)?, files, failures })
}

/// Cleaned runs paired with the MFCC frames recorded at the same time.
/// Each run becomes its own source, named `<id>@<first frame>`.
pub fn paired_runs(id: &str, seq: &PoseSequence, audio: &AudioClip, settings: &Settings) -> Result<Vec<PairedSource>> {
    let mfcc = compute_mfcc(audio, seq.fps)?;
    let (runs, _) = clean_sequence(seq, settings)?;
    let mut out = Vec::new();
    for run in runs {
        let start = run.frames[0].frame_index;
        if start >= mfcc.len() {
            continue;
        }
        let len = run.len().min(mfcc.len() - start);
        out.push(PairedSource {
            source_id: format!("{id}@{start}"),
            poses: run.slice(0, len),
            mfcc: MfccSequence { frames: mfcc.frames[start..start + len].to_vec(), frame_rate: mfcc.frame_rate },
        });
    }
    Ok(out)
}

/// Paired runs for every source in `dir`, grouped per source file.
pub fn load_paired_sources(dir: impl AsRef<Path>, settings: &Settings) -> Result<(Vec<(String, Vec<PairedSource>)>, Vec<(PathBuf, String)>)> {
    let (sources, unpaired) = discover_sources(dir)?;
    let mut failures: Vec<(PathBuf, String)> = unpaired.into_iter().map(|p| (p, "no matching partner file".to_string())).collect();
    let mut out = Vec::new();
    for src in &sources {
        let loaded = load_keypoint_sequence(&src.keypoints)
            .and_then(|s| check_fps(&s, settings, &src.keypoints).map(|_| s))
            .and_then(|s| load_audio(&src.audio).map(|a| (s, a)))
            .and_then(|(s, a)| paired_runs(&src.id, &s, &a, settings));
        match loaded {
            Ok(runs) => out.push((src.id.clone(), runs)),
            Err(e) => failures.push((src.keypoints.clone(), e.to_string())),
        }
    }
    Ok((out, failures))
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model: ModelParams,
    pub loss_history: Vec<f64>,
    pub train_pairs: usize,
    pub train_accuracy: f64,
    pub holdout_pairs: usize,
    pub holdout_accuracy: Option<f64>,
    pub failures: Vec<(PathBuf, String)>,
}

/// Train on every source in `dir` except the last `holdout` (by id), which
/// are only used to report correlation accuracy.
pub fn train_from_dir(dir: impl AsRef<Path>, settings: &Settings, holdout: usize) -> Result<TrainReport> {
    let (sources, failures) = load_paired_sources(dir, settings)?;
    if holdout >= sources.len() {
        return Err(Error::NoData(format!("{} usable sources, cannot hold out {holdout}", sources.len())));
    }
    let split = sources.len() - holdout;
    let flat = |s: &[(String, Vec<PairedSource>)]| s.iter().flat_map(|(_, r)| r.iter().cloned()).collect::<Vec<_>>();
    let seed = settings.train.seed;
    let train_set = make_training_pairs(&flat(&sources[..split]), settings.duration_s, seed)?;
    if train_set.pairs.is_empty() {
        return Err(Error::NoData("no source is long enough for one training pair".into()));
    }
    let outcome = train(&train_set.pairs, &settings.train)?;
    let train_accuracy = correlation_accuracy(&outcome.model, &train_set.pairs, settings.accuracy_threshold)?;
    let (holdout_pairs, holdout_accuracy) = if holdout > 0 {
        let held = make_training_pairs(&flat(&sources[split..]), settings.duration_s, seed.wrapping_add(1))?;
        let acc = if held.pairs.is_empty() {
            None
        } else {
            Some(correlation_accuracy(&outcome.model, &held.pairs, settings.accuracy_threshold)?)
        };
        (held.pairs.len(), acc)
    } else {
        (0, None)
    };
    Ok(TrainReport {
        model: outcome.model,
        loss_history: outcome.loss_history,
        train_pairs: train_set.pairs.len(),
        train_accuracy,
        holdout_pairs,
        holdout_accuracy,
        failures,
    })
}

/// Result of the generation phase.
#[derive(Clone, Debug)]
pub struct Generated {
    /// Final output (equal to `raw` with alignment skipped).
    pub poses: PoseSequence,
    /// Plain concatenation of the retrieved fragments.
    pub raw: PoseSequence,
    pub beats: BeatTrack,
    /// Database ids of the retrieved fragments, in order.
    pub retrieved: Vec<String>,
}

/// Music in, dance out: one retrieved fragment per audio window, recentred,
/// concatenated, then repaired in space and snapped to the beat in time.
pub fn generate(model: &ModelParams, db: &FragmentDatabase, audio: &AudioClip, settings: &Settings, skip_align: bool) -> Result<Generated> {
    if db.is_empty() {
        return Err(Error::NoData("fragment database is empty".into()));
    }
    if db.frames_per_fragment() != model.frames() {
        return Err(Error::invalid(format!(
            "duration mismatch: model expects {}-frame fragments, database holds {} s x {} fps = {} frames",
            model.frames(),
            db.duration_s,
            db.fps,
            db.frames_per_fragment()
        )));
    }
    if model.fps != db.fps {
        return Err(Error::invalid(format!("model trained at {} fps, database at {} fps", model.fps, db.fps)));
    }
    let mfcc = compute_mfcc(audio, db.fps)?;
    let clips = segment_audio(&mfcc, "query", db.duration_s)?;
    if clips.is_empty() {
        return Err(Error::NoData(format!("audio of {:.2} s is shorter than one {} s fragment", audio.duration_s(), db.duration_s)));
    }
    let db = attach_embeddings(model, db)?;
    let centre = (0.5 * db.resolution.width as f64, 0.5 * db.resolution.height as f64);
    let mut parts = Vec::with_capacity(clips.len());
    let mut retrieved = Vec::with_capacity(clips.len());
    for clip in &clips {
        let query = audio_encode(&model.audio, clip, false, 0)?;
        let frag = &db.fragments[nearest_index(&query, &db)?];
        retrieved.push(frag.id());
        parts.push(recenter_fragment(frag, centre).sequence);
    }
    let raw = PoseSequence::concat(&parts, db.fps, db.resolution);
    let beats = detect_beats(audio, db.fps)?;
    let in_range: Vec<usize> = beats.beat_frames.iter().copied().filter(|&b| b < raw.len()).collect();
    let poses = if skip_align {
        raw.clone()
    } else {
        let win = settings.windows(beats.median_spacing().unwrap_or(settings.fps as usize / 2));
        win.validate()?;
        let spatial = spatial_align(&raw, &win, settings.disc_threshold, settings.tsd_threshold)?;
        if in_range.is_empty() {
            spatial
        } else {
            temporal_align(&spatial, &in_range, win.omega_c)?
        }
    };
    Ok(Generated { poses, raw, beats, retrieved })
}

/// Beat window used for scoring: configured, or the median beat spacing.
pub fn scoring_window(beats: &BeatTrack, settings: &Settings) -> usize {
    settings.omega_c.unwrap_or_else(|| beats.median_spacing().unwrap_or(settings.fps as usize / 2)).max(2)
}

/// Score a generated sequence against its music and a reference corpus.
pub fn evaluate(generated: &PoseSequence, audio: &AudioClip, references: &[PoseSequence], settings: &Settings) -> Result<EvalReport> {
    if references.is_empty() {
        return Err(Error::NoData("no reference motion to compare against".into()));
    }
    let beats = detect_beats(audio, generated.fps)?;
    let audio_beats: Vec<usize> = beats.beat_frames.iter().copied().filter(|&b| b < generated.len()).collect();
    if audio_beats.is_empty() {
        return Err(Error::NoData("no musical beats inside the generated sequence".into()));
    }
    let pose_beats = find_pose_beats_near(generated, &audio_beats, scoring_window(&beats, settings));
    EvalReport::compute_pooled(generated, references, &audio_beats, &pose_beats, settings.beat_tolerance)
}

/// Fragments of a database as separate reference sequences.
pub fn database_sequences(db: &FragmentDatabase) -> Vec<PoseSequence> {
    db.fragments.iter().map(|f| f.sequence.clone()).collect()
}

/// Files written by [`run_demo`], relative to its output directory.
pub mod demo_files {
    pub const DATA: &str = "data";
    pub const DATABASE: &str = "database.bin";
    pub const MODEL: &str = "model.bin";
    pub const QUERY_AUDIO: &str = "query.wav";
    pub const POSES: &str = "poses.json";
    pub const REPORT: &str = "report.json";
    pub const FRAMES: &str = "frames";
    pub const BEAT_PLOT: &str = "beats.png";
}

/// Size of the demo corpus and query.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoSpec {
    pub n_sources: usize,
    pub source_duration_s: f64,
    pub query_duration_s: f64,
    pub query_bpm: f64,
    pub render: bool,
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec { n_sources: 8, source_duration_s: 24.0, query_duration_s: 16.0, query_bpm: 90.0, render: true }
    }
}

#[derive(Clone, Debug)]
pub struct DemoReport {
    pub ingest: Vec<FileStats>,
    pub fragments: usize,
    pub train_pairs: usize,
    pub train_accuracy: f64,
    pub generated_frames: usize,
    pub raw: PoseSequence,
    pub poses: PoseSequence,
    pub report: EvalReport,
}

/// Synthesise a corpus, ingest it, train, generate from an unseen click
/// track, score and render. Every output is a function of `settings`.
pub fn run_demo(out_dir: impl AsRef<Path>, settings: &Settings, spec: &DemoSpec) -> Result<DemoReport> {
    use crate::audio::save_wav;
    use crate::crossmodal::save_model;
    use crate::pose::{save_database, save_keypoint_sequence};
    use crate::render::{plot_beat_alignment, render_video, RenderStyle};
    use crate::synth::{synth_dataset, write_dataset, SynthSpec};

    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let seed = settings.train.seed;
    let corpus = SynthSpec {
        n_sources: spec.n_sources,
        duration_s: spec.source_duration_s,
        seed,
        fps: settings.fps,
        ..SynthSpec::default()
    };
    let data = out.join(demo_files::DATA);
    write_dataset(&synth_dataset(&corpus)?, &data)?;

    let ingest = ingest_dir(&data, settings)?;
    save_database(&ingest.database, out.join(demo_files::DATABASE))?;
    let trained = train_from_dir(&data, settings, 0)?;
    save_model(&trained.model, out.join(demo_files::MODEL))?;

    let query_spec = SynthSpec {
        n_sources: 1,
        bpm_list: vec![spec.query_bpm],
        duration_s: spec.query_duration_s,
        seed: seed.wrapping_add(1),
        fps: settings.fps,
        ..SynthSpec::default()
    };
    let query = synth_dataset(&query_spec)?.remove(0).audio;
    let query_path = out.join(demo_files::QUERY_AUDIO);
    save_wav(&query, &query_path)?;
    // Score what a reader of the files would see.
    let query = load_audio(&query_path)?;

    let generated = generate(&trained.model, &ingest.database, &query, settings, false)?;
    save_keypoint_sequence(&generated.poses, out.join(demo_files::POSES))?;
    let report = evaluate(&generated.poses, &query, &database_sequences(&ingest.database), settings)?;
    let report_path = out.join(demo_files::REPORT);
    let text = serde_json::to_string_pretty(&report).expect("plain data serialises");
    std::fs::write(&report_path, text + "\n").map_err(|e| Error::io(&report_path, e))?;

    if spec.render {
        let canvas = (settings.render_width, settings.render_height);
        render_video(&generated.poses, out.join(demo_files::FRAMES), generated.poses.fps, canvas, &RenderStyle::default())?;
        plot_beat_alignment(&generated.beats, &generated.poses, out.join(demo_files::BEAT_PLOT))?;
    }
    Ok(DemoReport {
        ingest: ingest.files,
        fragments: ingest.database.len(),
        train_pairs: trained.train_pairs,
        train_accuracy: trained.train_accuracy,
        generated_frames: generated.poses.len(),
        raw: generated.raw,
        poses: generated.poses,
        report,
    })
}
