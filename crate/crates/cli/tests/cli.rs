use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn markersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markersim"))
        .args(args)
        .env_remove("MARKERSIM_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = markersim(&["gen-fixtures", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn tree_hashes(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let digest = Sha256::digest(std::fs::read(e.path()).unwrap());
            let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
            (e.file_name().into_string().unwrap(), hex)
        })
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_frames_and_manifest() {
    let dir = fixtures();
    let out = dir.path().join("out");
    let res = markersim(&["run", "--scenario", s(&dir.path().join("press_hexagon.cfg")), "--out", s(&out), "--frames", "2"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("frames/s"));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["frames_written"], 2);
    assert_eq!(manifest["scatter"], "thread-local");
    assert_eq!(tree_hashes(&out.join("frames")).len(), 8);
}

#[test]
fn deterministic_runs_ignore_thread_count() {
    let dir = fixtures();
    let scenario = dir.path().join("press_dotin.cfg");
    let mut trees = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = markersim(&[
            "run", "--scenario", s(&scenario), "--out", s(&out), "--frames", "3", "--deterministic", "--threads", threads,
        ]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        trees.push(tree_hashes(&out.join("frames")));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = fixtures();
    assert_eq!(code(&markersim(&["run", "--scenario", s(&dir.path().join("missing.cfg"))])), 2);

    let bad = dir.path().join("bad.cfg");
    let text = std::fs::read_to_string(dir.path().join("press_dotin.cfg")).unwrap();
    std::fs::write(&bad, text.replace("press_depth = 0.001", "press_depth = -0.001")).unwrap();
    let res = markersim(&["run", "--scenario", s(&bad)]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("press_depth"));

    let res = markersim(&["run", "--scenario", s(&dir.path().join("press_dotin.cfg")), "--threads", "0"]);
    assert_eq!(code(&res), 2);
}

#[test]
fn engine_failure_exits_with_four() {
    let dir = fixtures();
    let path = dir.path().join("unstable.cfg");
    let text = std::fs::read_to_string(dir.path().join("press_dotin.cfg")).unwrap();
    std::fs::write(&path, text.replace("dt = 0.00002", "dt = 0.0001")).unwrap();
    let out = dir.path().join("out");
    let res = markersim(&["run", "--scenario", s(&path), "--out", s(&out), "--frames", "6"]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
}

#[test]
fn metrics_compare_run_directories() {
    let dir = fixtures();
    let run = dir.path().join("run");
    let res = markersim(&["run", "--scenario", s(&dir.path().join("static_dotin.cfg")), "--out", s(&run), "--frames", "2"]);
    assert_eq!(code(&res), 0);

    let csv = dir.path().join("metrics.csv");
    let res = markersim(&["metrics", "--pred", s(&run), "--truth", s(&run), "--out", s(&csv)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("motion,metric,value\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0") || l.ends_with(",0.000000")), "{text}");

    // drop one marker from the truth side
    let truth = dir.path().join("truth");
    std::fs::create_dir_all(truth.join("frames")).unwrap();
    std::fs::copy(run.join("manifest.json"), truth.join("manifest.json")).unwrap();
    for entry in std::fs::read_dir(run.join("frames")).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        if name.ends_with("_markers.csv") {
            let table = std::fs::read_to_string(entry.path()).unwrap();
            let kept: Vec<&str> = table.lines().filter(|l| !l.starts_with("0,0,")).collect();
            std::fs::write(truth.join("frames").join(&name), kept.join("\n") + "\n").unwrap();
        }
    }
    let res = markersim(&["metrics", "--pred", s(&run), "--truth", s(&truth)]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));

    let table = truth.join("frames").join("frame_0000_markers.csv");
    std::fs::write(&table, "row,col,u,v,a,b,angle\n0,1,oops,2,3,4,0\n").unwrap();
    let res = markersim(&["metrics", "--pred", s(&run), "--truth", s(&truth)]);
    assert_eq!(code(&res), 2, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn project_prints_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("cam.toml");
    std::fs::write(
        &calib,
        "rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]\ntranslation = [0, 0, 0]\nfx = 200\nfy = 200\ncx = 114\ncy = 114\nwidth = 228\nheight = 228\n",
    )
    .unwrap();
    let points = dir.path().join("points.csv");
    std::fs::write(&points, "x,y,z\n0.01,0,0.05\n0,0,-1\n").unwrap();
    let res = markersim(&["project", "--calib", s(&calib), "--points", s(&points)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "u,v,visible");
    assert_eq!(rows[1], "154,114,true");
    assert_eq!(rows[2], "NaN,NaN,false");

    std::fs::write(&points, "0.01,0\n").unwrap();
    assert_eq!(code(&markersim(&["project", "--calib", s(&calib), "--points", s(&points)])), 2);
}
