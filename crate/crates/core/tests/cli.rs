use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use couplap::anomaly::GroundTruth;
use couplap::cloud::{save_cloud, CloudFormat, PointCloud};
use couplap::synth::{add_noise, chiral_tube, random_shape, scene_background_fraction, sphere_scene, SceneOptions};
use nalgebra::Point3;
use serde_json::Value;

fn couplap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_couplap")).args(args).output().expect("spawn")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("read")).expect("json")
}

fn error_of(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with('{')).expect("error json on stderr");
    serde_json::from_str::<Value>(line).expect("json")["error"].clone()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn cloud(&self, name: &str, cloud: &PointCloud, format: CloudFormat) -> String {
        let p = self.path(name);
        save_cloud(cloud, &p, format).expect("save");
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn line(n: usize, spacing: f64) -> PointCloud {
    PointCloud::new((0..n).map(|i| Point3::new(i as f64 * spacing, 0.0, 0.0)).collect())
}

#[test]
fn eigenmaps_of_a_three_point_path() {
    let ws = Workspace::new();
    let cloud = ws.cloud("path.xyz", &line(3, 1.0), CloudFormat::XyzCsv);
    let out = ws.path("out");
    let run = couplap(&["eigenmaps", &cloud, "--k", "1", "--m", "2", "--out", &out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let report = json(ws.out("out").join("eigenmaps.json"));
    assert_eq!(report["command"], "eigenmaps");
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["m"], 2);
    let vals: Vec<f64> = report["result"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (got, want) in vals.iter().zip([0.0, 1.0, 2.0]) {
        assert!((got - want).abs() < 1e-10, "{vals:?}");
    }

    let modal = std::fs::read_to_string(ws.out("out").join("modal_lengths.csv")).unwrap();
    assert_eq!(modal.lines().next(), Some("mode,eigenvalue,modal_length"));
    assert_eq!(modal.lines().count(), 4);
    let csv = std::fs::read_to_string(ws.out("out").join("eigenmaps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn disconnected_cloud_is_a_precondition_failure() {
    let ws = Workspace::new();
    let mut pts = line(10, 1.0).points;
    pts.extend(line(10, 1.0).points.iter().map(|p| Point3::new(p.x + 100.0, 0.0, 0.0)));
    let cloud = ws.cloud("two.xyz", &PointCloud::new(pts), CloudFormat::XyzCsv);
    let run = couplap(&["eigenmaps", &cloud, "--k", "2", "--m", "3", "--out", &ws.path("o")]);
    assert_eq!(run.status.code(), Some(4));
    assert_eq!(error_of(&run)["kind"], "disconnected");

    let fixed = couplap(&["eigenmaps", &cloud, "--k", "2", "--m", "3", "--auto-connect", "--out", &ws.path("o")]);
    assert!(fixed.status.success());
}

#[test]
fn unreadable_input_is_bad_input() {
    let ws = Workspace::new();
    let run = couplap(&["eigenmaps", &ws.path("missing.xyz"), "--out", &ws.path("o")]);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(error_of(&run)["kind"], "io");
}

#[test]
fn match_prefers_the_exact_copy() {
    let ws = Workspace::new();
    let shape = random_shape(400, 3);
    let target = ws.cloud("t.xyz", &shape, CloudFormat::XyzCsv);
    let copy = ws.cloud("copy.ply", &shape, CloudFormat::PlyAscii);
    let noisy = ws.cloud("noisy.xyz", &add_noise(&shape, 0.2 * shape.diameter(), 1), CloudFormat::XyzCsv);
    let out = ws.path("m");
    let run = couplap(&["match", "--target", &target, "--source", &noisy, "--source", &copy, "--seed", "1", "--out", &out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(ws.out("m").join("match.json"));
    assert_eq!(report["result"]["best"], 1);
    let candidates = report["result"]["per_candidate"].as_array().unwrap();
    assert_eq!(candidates[1]["name"], "copy.ply");
    assert_eq!(report["result"]["meta"]["seed"], 1);
    assert_eq!(report["result"]["meta"]["k"], 10);
    assert!(ws.out("m").join("plan.csv").exists());
}

#[test]
fn match_needs_enough_coupled_vertices() {
    let ws = Workspace::new();
    let shape = random_shape(200, 4);
    let target = ws.cloud("t.xyz", &shape, CloudFormat::XyzCsv);
    let run = couplap(&["match", "--target", &target, "--source", &target, "--seed", "1", "--l", "0.05", "--m", "20", "--out", &ws.path("o")]);
    assert_eq!(run.status.code(), Some(4));
    assert_eq!(error_of(&run)["kind"], "precondition");
}

#[test]
fn match_requires_a_seed() {
    let ws = Workspace::new();
    let target = ws.cloud("t.xyz", &random_shape(50, 4), CloudFormat::XyzCsv);
    let run = couplap(&["match", "--target", &target, "--source", &target, "--out", &ws.path("o")]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn plan_file_replaces_sampling() {
    let ws = Workspace::new();
    let shape = random_shape(300, 5);
    let target = ws.cloud("t.xyz", &shape, CloudFormat::XyzCsv);
    let source = ws.cloud("s.xyz", &add_noise(&shape, 0.01, 2), CloudFormat::XyzCsv);
    // Only the first 60 target vertices are cross-connected, to themselves.
    let mut plan = String::from("l=0.2,alpha=1,seed=0\n");
    for i in 0..60 {
        plan.push_str(&format!("{i},0,{i}\n"));
    }
    std::fs::write(ws.path("plan.csv"), &plan).unwrap();
    let run = couplap(&[
        "match", "--target", &target, "--source", &source, "--seed", "9", "--plan-file", &ws.path("plan.csv"), "--pointwise", "0",
        "--out", &ws.path("o"),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let written = std::fs::read_to_string(ws.out("o").join("plan.csv")).unwrap();
    assert_eq!(written.lines().skip(1).collect::<Vec<_>>(), plan.lines().skip(1).collect::<Vec<_>>());
    let scores = std::fs::read_to_string(ws.out("o").join("pointwise.csv")).unwrap();
    let indices: Vec<usize> = scores.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(indices, (0..60).collect::<Vec<_>>());

    std::fs::write(ws.path("bad.csv"), "l=0.2,alpha=1,seed=0\n0,0,999\n").unwrap();
    let bad = couplap(&["match", "--target", &target, "--source", &source, "--seed", "9", "--plan-file", &ws.path("bad.csv"), "--out", &ws.path("o2")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bse_reports_a_side() {
    let ws = Workspace::new();
    let left = ws.cloud("left.ply", &chiral_tube(2500, 1), CloudFormat::PlyAscii);
    let right_shape = chiral_tube(2500, 2).map_points(|p| Point3::new(-p.x, p.y, p.z));
    let right = ws.cloud("right.ply", &right_shape, CloudFormat::PlyAscii);
    let run = couplap(&["bse", "--source", &left, "--side", "left", "--target", &right, "--seed", "3", "--out", &ws.path("o")]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(ws.out("o").join("bse.json"));
    assert_eq!(report["result"]["side"], "right");
    assert!(report["result"]["d_mirror"].as_f64().unwrap() < report["result"]["d_same"].as_f64().unwrap());
    assert_eq!(report["config"]["side"], "left");
}

#[test]
fn bse_bench_writes_per_source_accuracy() {
    let ws = Workspace::new();
    let mut manifest = String::from("path,side\n");
    for (i, mirrored) in [false, true, false].into_iter().enumerate() {
        let tube = chiral_tube(1500, 10 + i as u64);
        let tube = if mirrored { tube.map_points(|p| Point3::new(-p.x, p.y, p.z)) } else { tube };
        let name = format!("bone{i}.xyz");
        ws.cloud(&name, &tube, CloudFormat::XyzCsv);
        manifest.push_str(&format!("{name},{}\n", if mirrored { "right" } else { "left" }));
    }
    std::fs::write(ws.path("manifest.csv"), manifest).unwrap();
    let run = couplap(&["bse-bench", "--manifest", &ws.path("manifest.csv"), "--seed", "1", "--out", &ws.path("o")]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(ws.out("o").join("bse_bench.csv")).unwrap();
    assert!(csv.lines().count() >= 4, "{csv}");
    assert!(ws.out("o").join("bse_bench.json").exists());
}

#[test]
fn anomaly_and_pro_evaluation() {
    let ws = Workspace::new();
    let scene = SceneOptions {
        grid: 64,
        stretch: 0.0,
        offset: 0.0,
        ..Default::default()
    };
    let (target, gt) = sphere_scene(&scene);
    let (source, _) = sphere_scene(&SceneOptions {
        bump: false,
        seed: 100,
        ..scene
    });
    let scan = ws.cloud("scan.csv", &target, CloudFormat::OrganizedGrid);
    let good = ws.cloud("good.csv", &source, CloudFormat::OrganizedGrid);
    gt.save(ws.path("gt.csv")).unwrap();
    let zq = format!("{}", scene_background_fraction(&scene) + 0.05);
    let run = couplap(&[
        "anomaly", "--source", &good, "--target", &scan, "--seed", "0", "--m", "60", "--z-quantile", &zq, "--gt", &ws.path("gt.csv"),
        "--out", &ws.path("a"),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = json(ws.out("a").join("anomaly.json"));
    let auc = report["result"]["pro_auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert_eq!(report["result"]["height"], 64);
    for f in ["score_map.csv", "score_map.pgm", "baseline_map.csv", "point_scores.csv"] {
        assert!(ws.out("a").join(f).exists(), "{f}");
    }

    // The CLI evaluation of the written map agrees with the run's own.
    let map = ws.out("a").join("score_map.csv").to_string_lossy().into_owned();
    let clean = GroundTruth::from_mask(64, 64, &[false; 64 * 64]).unwrap();
    clean.save(ws.path("clean.csv")).unwrap();
    let eval = couplap(&["eval-pro", "--map", &map, "--gt", &ws.path("gt.csv"), "--map", &map, "--gt", &ws.path("clean.csv"), "--out", &ws.path("e")]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let pro = json(ws.out("e").join("pro.json"));
    let images = pro["result"]["images"].as_array().unwrap();
    assert!((images[0]["pro_auc"].as_f64().unwrap() - auc).abs() < 1e-8);
    assert_eq!(images[1]["defect_free"], true);
    assert!(images[1]["pro_auc"].is_null());
    let pooled = pro["result"]["pooled_pro_auc"].as_f64().unwrap();
    assert!(pooled <= auc + 1e-12);

    // Without any anomalous region the pooled curve is undefined.
    let alone = couplap(&["eval-pro", "--map", &map, "--gt", &ws.path("clean.csv"), "--out", &ws.path("e2")]);
    assert_eq!(alone.status.code(), Some(4));
    assert_eq!(error_of(&alone)["kind"], "precondition");
    let mismatched = couplap(&["eval-pro", "--map", &map, "--gt", &ws.path("gt.csv"), "--gt", &ws.path("clean.csv"), "--out", &ws.path("e3")]);
    assert_eq!(mismatched.status.code(), Some(2));
}
