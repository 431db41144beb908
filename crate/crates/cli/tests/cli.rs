use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn farsight(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_farsight"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = farsight(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str], out: &Path) -> i32 {
    farsight(args, out).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_corpus(tmp: &TempDir) -> std::path::PathBuf {
    let root = tmp.path().join("corpus");
    ok(&["synth", "--subjects", "3", "--frames", "4", "--seed", "1"], &root);
    root
}

#[test]
fn enroll_score_fuse_eval() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(&tmp);
    let g = tmp.path().join("g");
    let p = tmp.path().join("p");
    let sc = tmp.path().join("s");
    let f = tmp.path().join("f");
    let e = tmp.path().join("e");
    ok(&["enroll", "--in", s(&corpus.join("gallery")), "--mode", "gallery"], &g);
    ok(&["enroll", "--in", s(&corpus.join("probe"))], &p);
    ok(
        &["score", "--probe", s(&p.join("templates.fstb")), "--gallery", s(&g.join("templates.fstb"))],
        &sc,
    );
    for m in ["face", "gait", "body"] {
        assert!(sc.join(format!("scores_{m}.csv")).is_file());
    }
    ok(
        &[
            "fuse",
            "--face",
            s(&sc.join("scores_face.csv")),
            "--gait",
            s(&sc.join("scores_gait.csv")),
            "--body",
            s(&sc.join("scores_body.csv")),
        ],
        &f,
    );
    let table = ok(
        &["eval", "--scores", s(&f.join("fused.csv")), "--mates", s(&corpus.join("mates.json")), "--ranks", "1,3"],
        &e,
    );
    assert!(table.contains("Rank-1"), "{table}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(e.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["counts"]["probes"], 3);
    assert_eq!(report["rank_n_accuracy"]["3"], 1.0);
}

#[test]
fn enrollment_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(&tmp);
    let probe = corpus.join("probe");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        ok(&["enroll", "--in", s(&probe), "--simulate", "--seed", "5"], out);
    }
    assert_eq!(
        std::fs::read(a.join("templates.fstb")).unwrap(),
        std::fs::read(b.join("templates.fstb")).unwrap()
    );
}

#[test]
fn simulate_writes_frames_and_sidecar() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(&tmp);
    let video = corpus.join("probe").join("subject00_p0");
    let out = tmp.path().join("sim");
    let args = ["simulate", "--in", s(&video), "--d-over-r0", "1.5", "--psf-size", "9", "--seed", "7"];
    ok(&args, &out);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("turbulence.json")).unwrap()).unwrap();
    assert_eq!(side["turbulence"]["d_over_r0"], 1.5);
    assert_eq!(side["turbulence"]["rng_seed"], 7);
    assert_eq!(side["psf_size"], 9);
    assert_eq!(side["frames"].as_array().unwrap().len(), 4);
    let first = std::fs::read(out.join("frame_0000.png")).unwrap();
    assert_ne!(first, std::fs::read(video.join("frame_0000.png")).unwrap());

    let again = tmp.path().join("sim2");
    ok(&args, &again);
    assert_eq!(first, std::fs::read(again.join("frame_0000.png")).unwrap());

    // cn2 path derives the strength
    let c = tmp.path().join("cn2");
    ok(&["simulate", "--in", s(&video), "--cn2", "1e-16", "--psf-size", "9"], &c);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(c.join("turbulence.json")).unwrap()).unwrap();
    assert!(side["turbulence"]["d_over_r0"].is_null());
    assert!(side["effective_d_over_r0"].as_f64().unwrap() > 0.0);
}

#[test]
fn assoc_links_synthetic_faces() {
    let tmp = TempDir::new().unwrap();
    let corpus = small_corpus(&tmp);
    let out = tmp.path().join("a");
    let msg = ok(&["assoc", "--in", s(&corpus.join("probe").join("subject01_p0"))], &out);
    // "<linked> of <faces> faces ..."
    let words: Vec<&str> = msg.split_whitespace().collect();
    let (linked, faces): (usize, usize) = (words[0].parse().unwrap(), words[2].parse().unwrap());
    assert_eq!(faces, 4, "{msg}");
    assert!(linked >= 3, "{msg}");
    let frames: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("associations.json")).unwrap()).unwrap();
    assert_eq!(frames.as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("missing.fstb");
    // I/O
    assert_eq!(code(&["score", "--probe", s(&missing), "--gallery", s(&missing)], &out), 3);
    assert_eq!(code(&["eval", "--scores", "nope.csv", "--mates", "nope.json"], &out), 3);
    // usage
    assert_eq!(code(&["simulate", "--in", "x"], &out), 2);
    assert_eq!(code(&["frobnicate"], &out), 2);

    let bad_cfg = tmp.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"pipelin": {}}"#).unwrap();
    assert_eq!(code(&["bench", "--config", s(&bad_cfg)], &out), 2);

    let corrupt = tmp.path().join("corrupt.fstb");
    std::fs::write(&corrupt, b"FSTB\x01\x00\x05\x00\x00\x00\x00\x00\x00\x00").unwrap();
    assert_eq!(code(&["score", "--probe", s(&corrupt), "--gallery", s(&corrupt)], &out), 2);

    let csv = tmp.path().join("s.csv");
    std::fs::write(&csv, "probe_id,g0\np0,0.5\n").unwrap();
    let args = ["fuse", "--face", s(&csv), "--gait", s(&csv), "--body", s(&csv), "--weights", "0.5", "0.5", "0.5"];
    assert_eq!(code(&args, &out), 2);

    let no_det = tmp.path().join("empty");
    std::fs::create_dir_all(no_det.join("v")).unwrap();
    assert_eq!(code(&["enroll", "--in", s(&no_det)], &out), 2);
}

#[test]
fn fuse_imputes_missing_scores() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("face.csv"), "probe_id,g0\np0,0.9\n").unwrap();
    std::fs::write(dir.join("gait.csv"), "probe_id,g0\np0,\n").unwrap();
    std::fs::write(dir.join("body.csv"), "probe_id,g0\np0,0.3\n").unwrap();
    let out = dir.join("f");
    ok(
        &[
            "fuse",
            "--face",
            s(&dir.join("face.csv")),
            "--gait",
            s(&dir.join("gait.csv")),
            "--body",
            s(&dir.join("body.csv")),
        ],
        &out,
    );
    let text = std::fs::read_to_string(out.join("fused.csv")).unwrap();
    assert_eq!(text, "probe_id,g0\np0,0.4\n");
}
