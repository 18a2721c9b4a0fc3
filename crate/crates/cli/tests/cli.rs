use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amco_core::grid::TerrainClass;
use amco_core::sim::TrialLog;

fn amco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amco")).args(args).env_remove("AMCO_ASSET_DIR").output().expect("binary runs")
}

fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    let text = r#"{
        "name": "small",
        "world": {
            "grid": [10, 6],
            "cell_size": 0.5,
            "base": { "terrain": "stable", "deformability": 0.0, "lighting": 1.0, "roughness": 0.1 },
            "generators": [
                { "shape": "rect", "min": [2.0, 0.0], "max": [3.0, 3.0],
                  "set": { "terrain": "granular", "deformability": 0.3 } }
            ],
            "start": { "x": 0.75, "y": 1.5, "theta": 0.0 },
            "goal": [4.25, 1.5]
        },
        "trials": 2,
        "seed": 11,
        "limits": { "time": 30.0, "goal_radius": 0.5 }
    }"#;
    fs::write(&path, text).unwrap();
    path
}

fn str_path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_logs_report_and_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let out = tmp.path().join("out");
    let o = amco(&[
        "run", "--scenario", str_path(&scenario), "--policies", "amco,vision_only", "--trials", "2", "--seed", "7",
        "--out", str_path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("small,amco,2,"));
    for seed in [7, 8] {
        let log = fs::read_to_string(out.join(format!("small/amco/seed_{seed}.jsonl"))).unwrap();
        let log = TrialLog::from_jsonl(&log).unwrap();
        assert_eq!(log.summary.seed, seed);
    }
    let svg = fs::read_to_string(out.join("small/overlay_amco.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn identical_invocations_give_identical_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let mut logs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "2")] {
        let out = tmp.path().join(name);
        let o = amco(&[
            "run", "--scenario", str_path(&scenario), "--policies", "amco,proprio_only", "--jobs", jobs, "--out",
            str_path(&out),
        ]);
        assert!(o.status.success());
        logs.push(fs::read(out.join("small/proprio_only/seed_12.jsonl")).unwrap());
        logs.push(fs::read(out.join("small/amco/seed_11.jsonl")).unwrap());
    }
    assert_eq!(logs[0], logs[2]);
    assert_eq!(logs[1], logs[3]);
}

#[test]
fn export_maps_writes_four_rasters_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let out = tmp.path().join("out");
    let o = amco(&["run", "--scenario", str_path(&scenario), "--trials", "1", "--export-maps", "--out", str_path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = TrialLog::from_jsonl(&fs::read_to_string(out.join("small/amco/seed_11.jsonl")).unwrap()).unwrap();
    let maps: Vec<_> = fs::read_dir(out.join("small/amco/maps_11")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(maps.len(), 4 * log.steps.len());
    for kind in ["general", "history", "proprio", "coupled"] {
        let first = fs::read(out.join(format!("small/amco/maps_11/step_00000_{kind}.pgm"))).unwrap();
        assert!(first.starts_with(b"P5"));
    }
}

#[test]
fn report_reaggregates_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let out = tmp.path().join("out");
    assert!(amco(&["run", "--scenario", str_path(&scenario), "--policies", "amco,straight", "--out", str_path(&out)])
        .status
        .success());
    let csv = tmp.path().join("again.csv");
    let o = amco(&["report", str_path(&out), "--csv", str_path(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let original = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut a: Vec<&str> = original.lines().collect();
    let again = fs::read_to_string(&csv).unwrap();
    let mut b: Vec<&str> = again.lines().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn bad_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, fs::read_to_string(&scenario).unwrap().replace("\"seed\"", "\"sede\"")).unwrap();
    let o = amco(&["run", "--scenario", str_path(&bad), "--out", str_path(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sede") && err.contains("line"), "{err}");

    let o = amco(&["run", "--scenario", str_path(&scenario), "--policies", "teleport"]);
    assert_eq!(o.status.code(), Some(2));
    let o = amco(&["run", "--scenario", str_path(&scenario), "--set", "fusion.nope=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = amco(&["score-image", str_path(&tmp.path().join("missing.png"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = amco(&["report", str_path(&tmp.path().join("nothing"))]);
    assert_eq!(o.status.code(), Some(2));
}

fn score(path: &Path) -> serde_json::Value {
    let o = amco(&["score-image", str_path(path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn score_image_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let black = tmp.path().join("black.png");
    image::RgbImage::new(64, 64).save(&black).unwrap();
    // no edges at all: only the two blur terms contribute, 0.0025 * 100 + 0.003 * 100
    let s = score(&black);
    assert!((s["xi"].as_f64().unwrap() - 0.55).abs() < 1e-9, "{s}");
    assert_eq!(s, score(&black));

    let white = tmp.path().join("white.ppm");
    image::RgbImage::from_pixel(64, 64, image::Rgb([255, 255, 255])).save(&white).unwrap();
    let s = score(&white);
    assert_eq!(s["xi"].as_f64().unwrap(), 1.0);
    assert_eq!(s["r_mean"].as_f64().unwrap(), 255.0);
}

#[test]
fn calibrate_writes_twelve_ellipses() {
    let tmp = tempfile::tempdir().unwrap();
    let mut best = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let o = amco(&["calibrate", "--out", str_path(&dir), "--samples", "200"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let table = amco_core::fusion::EllipseTable::from_json(&fs::read_to_string(dir.join("ellipses.json")).unwrap())
            .unwrap();
        assert_eq!(table.iter().count(), 12);
        assert!(table.iter().all(|e| amco_core::proprio::ellipse_area(e).unwrap() > 0.0));
        best.push(TerrainClass::TERRAINS.map(|t| table.best_gait(t).unwrap()));
        assert!(dir.join("pca.json").is_file());
        let text = String::from_utf8_lossy(&o.stdout);
        assert_eq!(text.matches("<- best").count(), 4, "{text}");
    }
    assert_eq!(best[0], best[1]);
}

#[test]
fn asset_override_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = small_scenario(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_amco"))
        .args(["run", "--scenario", str_path(&scenario), "--out", str_path(&tmp.path().join("o"))])
        .env("AMCO_ASSET_DIR", tmp.path().join("no-assets-here"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
