use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use paws_core::saliency::{load_map, store_map, SaliencyMap};

const SMALL: &[&str] = &["--set", "width=64", "--set", "height=48", "--set", "point_sizes=2,4", "--set", "opacities=0.4,1"];

fn paws(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paws"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let out = paws(ws, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small(extra: &[&str]) -> Vec<String> {
    SMALL.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn ok_small(ws: &Path, extra: &[&str]) -> String {
    let args = small(extra);
    ok(ws, &args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn fail_small(ws: &Path, extra: &[&str]) -> String {
    let args = small(extra);
    let out = paws(ws, &args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!out.status.success(), "{extra:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn data_lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().skip(1).filter(|l| !l.trim().is_empty()).count()
}

#[test]
fn default_grid_saliency_and_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["gen", "-n", "400", "--seed", "1"]);
    ok(ws, &["saliency"]);
    let map = load_map(&ws.join("saliency.salf")).unwrap();
    assert_eq!((map.width_px, map.height_px), (1085, 924));

    ok(ws, &["sample", "--algo", "random", "-k", "400"]);
    ok(ws, &["metrics", "--sample", "samples/random_k400_s0.csv"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.join("reports/random_k400_s0.json")).unwrap()).unwrap();
    assert_eq!(report["config"].as_array().unwrap().len(), 16);
    assert!((report["means"]["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(report["means"]["jsd"].as_f64().unwrap().abs() < 1e-9);
    assert!(ws.join("reports/random_k400_s0.meta.json").exists());
}

#[test]
fn external_saliency_is_pointwise_max() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let a = SaliencyMap::new(64, 48, (0..64 * 48).map(|i| (i % 7) as f32 / 7.0).collect()).unwrap();
    let b = SaliencyMap::new(64, 48, (0..64 * 48).map(|i| (i % 5) as f32 / 5.0).collect()).unwrap();
    store_map(&a, &ws.join("a.salf")).unwrap();
    store_map(&b, &ws.join("b.salf")).unwrap();
    ok_small(ws, &["saliency", "--model", "external", "--map", "a.salf", "--map", "b.salf"]);
    let agg = load_map(&ws.join("saliency.salf")).unwrap();
    for i in 0..agg.values.len() {
        assert_eq!(agg.values[i], a.values[i].max(b.values[i]));
    }
    let err = fail_small(ws, &["saliency", "--model", "external"]);
    assert!(err.contains("--map"));
}

#[test]
fn missing_dataset_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let err = fail_small(dir.path(), &["saliency"]);
    assert!(err.contains("no dataset"), "{err}");
}

#[test]
fn ingest_with_header_and_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    fs::write(ws.join("raw.csv"), "a,b\n10,20\nNA,5\n30,40\n20,30\n").unwrap();
    let out = paws(ws, &["ingest", "raw.csv", "-x", "a", "-y", "b"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1"));
    assert_eq!(fs::read_to_string(ws.join("dataset.csv")).unwrap(), "0,0\n1,1\n0.5,0.5\n");
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.join("dataset.json")).unwrap()).unwrap();
    assert_eq!(side["skipped_rows"], 1);
}

#[test]
fn sampling_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "2000"]);
    let err = fail_small(ws, &["sample", "--algo", "paws", "-k", "844"]);
    assert!(err.contains("paws saliency"), "{err}");
    ok_small(ws, &["saliency"]);
    ok_small(ws, &["sample", "--algo", "paws", "-k", "844"]);
    let p = ws.join("samples/paws_k844_s0.csv");
    assert_eq!(data_lines(&p), 844);
    let first = fs::read(&p).unwrap();
    ok_small(ws, &["sample", "--algo", "paws", "-k", "844"]);
    assert_eq!(fs::read(&p).unwrap(), first);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.with_extension("json")).unwrap()).unwrap();
    assert!(side["elapsed_seconds"].is_number());
    assert_eq!(side["config"]["width"], 64);

    for algo in ["random", "maxmin", "dbs", "bluenoise", "vas"] {
        ok_small(ws, &["sample", "--algo", algo, "-k", "50", "--seed", "4"]);
        assert_eq!(data_lines(&ws.join(format!("samples/{algo}_k50_s4.csv"))), 50);
    }
    assert!(fail_small(ws, &["sample", "--algo", "kmeans", "-k", "5"]).contains("unknown algorithm"));
    assert!(fail_small(ws, &["sample", "--algo", "random", "-k", "2001"]).contains("k=2001"));
}

#[test]
fn compress_and_approx() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "3000"]);
    ok_small(ws, &["saliency"]);
    ok_small(ws, &["weights"]);
    let mut counts = Vec::new();
    for preset in ["low", "medium", "high"] {
        ok_small(ws, &["compress", "--preset", preset]);
        let side: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(ws.join(format!("partitions/{preset}_s0.json"))).unwrap(),
        )
        .unwrap();
        counts.push(side["box_count"].as_u64().unwrap());
    }
    assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");
    ok_small(ws, &["compress", "--lambda", "0.002", "--sigma", "0.001"]);
    assert!(ws.join("partitions/l0.002_s0.001_s0.csv").exists());
    assert!(fail_small(ws, &["compress", "--lambda", "0.002"]).contains("--sigma"));

    ok_small(ws, &["approx", "--partition", "partitions/high_s0.csv", "-k", "300", "-C", "3"]);
    assert_eq!(data_lines(&ws.join("samples/approx_k300_s0.csv")), 300);
    // The partition alone is enough: no dataset needed.
    fs::remove_file(ws.join("dataset.csv")).unwrap();
    ok_small(ws, &["approx", "--partition", "partitions/high_s0.csv", "-k", "10", "--out", "x.csv"]);
    fs::remove_file(ws.join("partitions/high_s0.csv")).unwrap();
    let err = fail_small(ws, &["approx", "--partition", "partitions/high_s0.csv", "-k", "10"]);
    assert!(err.contains("partition"), "{err}");
}

#[test]
fn metrics_reports_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "200"]);
    fs::write(ws.join("bad.csv"), "rank,index,x,y\n0,1,0.5,0.5\n1,2,zero,0.5\n").unwrap();
    let err = fail_small(ws, &["metrics", "--sample", "bad.csv"]);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn render_png() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "200"]);
    ok_small(ws, &["render", "--out", "all.png", "--ps", "2", "--op", "0.5"]);
    let bytes = fs::read(ws.join("all.png")).unwrap();
    assert_eq!(&bytes[..4], b"\x89PNG");
}

#[test]
fn bench_bookkeeping_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "600"]);
    ok_small(ws, &["saliency"]);
    let args = ["bench", "--algos", "paws,random", "--sizes", "20,40", "--seeds", "7", "--out", "b"];
    ok_small(ws, &args);
    let b = ws.join("b");
    let count = |sub: &str, ext: &str| {
        fs::read_dir(b.join(sub))
            .unwrap()
            .filter(|e| {
                let p = e.as_ref().unwrap().path();
                p.extension().is_some_and(|x| x == ext) && !p.to_string_lossy().ends_with(".meta.json")
            })
            .count()
    };
    assert_eq!(count("samples", "csv"), 4);
    assert_eq!(count("reports", "json"), 4);
    let summary = fs::read_to_string(b.join("summary.csv")).unwrap();
    assert!(summary.starts_with("algo,k,seed,metric,mean,ci95,elapsed\n"));
    assert_eq!(summary.lines().count(), 1 + 4 * 5);
    assert!(b.join("renders/paws_k20_s7.png").exists());

    let before = fs::read(b.join("samples/random_k40_s7.json")).unwrap();
    let mut resumed = small(&args);
    resumed.push("--resume".into());
    resumed.push("-v".into());
    let out = paws(ws, &resumed.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stderr).matches("(resumed)").count(), 4);
    // A resumed cell keeps its recorded timing, so the sidecar is untouched.
    assert_eq!(fs::read(b.join("samples/random_k40_s7.json")).unwrap(), before);
    assert_eq!(fs::read_to_string(b.join("summary.csv")).unwrap(), summary);
}

#[test]
fn bench_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok_small(ws, &["gen", "-n", "100"]);
    let err = fail_small(ws, &["bench", "--algos", "random", "--sizes", "10,500", "--seeds", "0", "--out", "b"]);
    assert!(err.contains("1 of 2 cells failed"), "{err}");
    let summary = fs::read_to_string(ws.join("b/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 5);
    assert!(ws.join("b/samples/random_k10_s0.csv").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    fs::write(ws.join("paws.conf"), "width = 80\nheight = 60\npoint_sizes = 2\nopacities = 1\n").unwrap();
    let conf = ws.join("paws.conf");
    let conf = conf.to_str().unwrap();
    ok(ws, &["--config", conf, "gen", "-n", "100"]);
    ok(ws, &["--config", conf, "--set", "height=50", "saliency"]);
    let map = load_map(&ws.join("saliency.salf")).unwrap();
    assert_eq!((map.width_px, map.height_px), (80, 50));
    let out = paws(ws, &["--set", "bogus=1", "gen", "-n", "10"]);
    assert!(!out.status.success());
}
