use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use choreokit::audio::{load_audio, save_wav};
use choreokit::config::{ConfigLayer, Settings};
use choreokit::crossmodal::load_model;
use choreokit::pipeline;
use choreokit::pose::{load_database, load_keypoint_sequence};
use choreokit::synth::{synth_dataset, write_dataset, SynthSpec};

fn choreokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choreokit")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = choreokit(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Shared corpus, database, model and query, built once.
struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn workspace() -> &'static Workspace {
    static WS: OnceLock<Workspace> = OnceLock::new();
    WS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let spec = SynthSpec { n_sources: 3, duration_s: 16.0, seed: 3, ..SynthSpec::default() };
        write_dataset(&synth_dataset(&spec).unwrap(), root.join("data")).unwrap();
        let query = SynthSpec { n_sources: 1, duration_s: 12.0, seed: 4, bpm_list: vec![105.0], ..SynthSpec::default() };
        save_wav(&synth_dataset(&query).unwrap()[0].audio, root.join("query.wav")).unwrap();
        ok(&["ingest", "--input", s(&root.join("data")), "--db", s(&root.join("db.bin"))]);
        ok(&["train", "--pairs", s(&root.join("data")), "--out", s(&root.join("model.bin")), "--epochs", "2"]);
        Workspace { _dir: dir, root }
    })
}

fn generate(ws: &Workspace, out: &Path, extra: &[&str]) -> Output {
    let (model, db, audio) = (ws.path("model.bin"), ws.path("db.bin"), ws.path("query.wav"));
    let mut args = vec!["generate", "--model", s(&model), "--db", s(&db), "--audio", s(&audio), "--out", s(out)];
    args.extend_from_slice(extra);
    choreokit(&args)
}

#[test]
fn ingest_writes_a_database_and_per_file_stats() {
    let ws = workspace();
    let db = load_database(ws.path("db.bin")).unwrap();
    assert_eq!(db.len(), 3 * 16 / 4);
    let out = ok(&["ingest", "--input", s(&ws.path("data")), "--db", s(&ws.path("db_again.bin"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("frames,") && l.contains("fragments")).count(), 3);
    assert!(std::fs::read(ws.path("db.bin")).unwrap() == std::fs::read(ws.path("db_again.bin")).unwrap());
}

#[test]
fn ingest_of_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = choreokit(&["ingest", "--input", s(&dir.path().join("empty")), "--db", s(&dir.path().join("db.bin"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("db.bin").exists());
}

#[test]
fn generate_output_feeds_eval() {
    let ws = workspace();
    let dir = tempfile::tempdir().unwrap();
    let poses = dir.path().join("poses.json");
    let out = generate(ws, &poses, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let seq = load_keypoint_sequence(&poses).unwrap();
    assert_eq!(seq.len(), 12 * 24);
    assert_eq!(seq.fps, 24);

    let report = dir.path().join("report.json");
    let reference = ws.path("data").join(first_source(ws));
    let out = ok(&["eval", "--poses", s(&poses), "--audio", s(&ws.path("query.wav")), "--ref", s(&reference), "--report", s(&report)]);
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(printed, written);
    for key in ["s_ba", "mdd_h", "mdd_f", "sdd_h", "sdd_f", "hand_hist", "foot_hist"] {
        assert!(written.get(key).is_some(), "missing {key}");
    }
    let s_ba = written["s_ba"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&s_ba));
}

fn first_source(ws: &Workspace) -> String {
    let mut names: Vec<String> = std::fs::read_dir(ws.path("data"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names.remove(0)
}

#[test]
fn skip_align_emits_the_plain_concatenation() {
    let ws = workspace();
    let dir = tempfile::tempdir().unwrap();
    let raw_path = dir.path().join("raw.json");
    let out = generate(ws, &raw_path, &["--skip-align"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let raw = load_keypoint_sequence(&raw_path).unwrap();

    let settings = Settings::resolve(None, &ConfigLayer::default()).unwrap();
    let db = load_database(ws.path("db.bin")).unwrap();
    let g = pipeline::generate(&load_model(ws.path("model.bin")).unwrap(), &db, &load_audio(ws.path("query.wav")).unwrap(), &settings, false)
        .unwrap();
    assert_eq!(raw, g.raw);
    assert!(raw != g.poses, "alignment changed nothing");

    // Each block is its retrieved fragment, moved as a whole.
    let n = db.frames_per_fragment();
    assert_eq!(raw.len(), n * g.retrieved.len());
    for (b, id) in g.retrieved.iter().enumerate() {
        let frag = db.fragments.iter().find(|f| &f.id() == id).unwrap();
        let block: &[_] = &raw.frames[b * n..(b + 1) * n];
        let (dx, dy) = (
            block[0].keypoints[1].x - frag.sequence.frames[0].keypoints[1].x,
            block[0].keypoints[1].y - frag.sequence.frames[0].keypoints[1].y,
        );
        for (got, want) in block.iter().zip(&frag.sequence.frames) {
            for (a, k) in got.keypoints.iter().zip(&want.keypoints) {
                assert!((a.x - k.x - dx).abs() < 1e-9 && (a.y - k.y - dy).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn generate_is_deterministic() {
    let ws = workspace();
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        assert!(generate(ws, &dir.path().join(name), &[]).status.success());
    }
    assert!(std::fs::read(dir.path().join("a.json")).unwrap() == std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn fragment_length_mismatch_is_reported() {
    let ws = workspace();
    let dir = tempfile::tempdir().unwrap();
    let db2 = dir.path().join("db2.bin");
    ok(&["ingest", "--input", s(&ws.path("data")), "--db", s(&db2), "--duration", "2"]);
    let out = choreokit(&[
        "generate",
        "--model",
        s(&ws.path("model.bin")),
        "--db",
        s(&db2),
        "--audio",
        s(&ws.path("query.wav")),
        "--out",
        s(&dir.path().join("p.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration mismatch"));
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(choreokit(&["ingest", "--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = choreokit(&["ingest", "--input", s(dir.path()), "--db", s(&dir.path().join("d")), "--omega-b", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(choreokit(&["--help"]).status.code(), Some(0));
}
