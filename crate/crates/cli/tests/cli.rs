use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use regex::Regex;
use stemfit_cli::RunReport;
use tempfile::TempDir;

fn stemfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stemfit"))
        .current_dir(dir)
        .env_remove("STEMFIT_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_SURFACE: &str = r#"
[source]
regime = "surface"
n_points = 8000
radial_noise_sigma = 0.0

[fit]
iterations = 200
"#;

#[test]
fn crop_fixture_prints_percent() {
    let tmp = TempDir::new().unwrap();
    let o = stemfit(tmp.path(), &["metrics", "crop", "1030133", "46356"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("95.5%"), "{}", stdout(&o));
}

#[test]
fn diameter_fixture_prints_percent() {
    let tmp = TempDir::new().unwrap();
    let o = stemfit(tmp.path(), &["metrics", "diameter", "0.395", "0.4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1.25%"), "{}", stdout(&o));
    let o = stemfit(tmp.path(), &["metrics", "diameter", "0.395", "0.4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["pct_error"].as_f64().unwrap() - 1.25).abs() < 1e-9);
}

#[test]
fn noiseless_pipeline_recovers_diameter() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SURFACE);
    let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg, "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((0.3999..=0.4001).contains(&report.diameter.estimated));
    assert!(report.diameter.pct_error < 0.03);
    for f in ["report.json", "cloud.ply", "overlay.svg"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f} missing");
    }
    let on_disk: RunReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn same_seed_gives_byte_identical_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[source]\nregime = \"multi_scan\"\n[source.scan]\nn_elevation = 32\nn_azimuth = 512\n[fit]\niterations = 200\n",
    );
    let wall = Regex::new(r#""wall_time_s": [^\n]*"#).unwrap();
    let run = || {
        let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg, "--seed", "42", "--out", "out"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let file = fs::read_to_string(tmp.path().join("out/report.json")).unwrap();
        (wall.replace(&stdout(&o), "").into_owned(), wall.replace(&file, "").into_owned())
    };
    let (a, fa) = run();
    let (b, fb) = run();
    assert_eq!(a, b);
    assert_eq!(fa, fb);
    let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg, "--seed", "43", "--out", "out"]);
    assert_ne!(wall.replace(&stdout(&o), ""), a);
}

#[test]
fn empty_crop_is_a_fit_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{SMALL_SURFACE}\n[crop]\nmin = [10.0, 10.0, 0.0]\nmax = [11.0, 11.0, 1.0]\n"),
    );
    let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg, "--out", "out"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("fit:"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[fit]\nthreshold = 0.1\n");
    let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config:"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "[scene]\ndiameter = 0.0\n");
    assert_eq!(stemfit(tmp.path(), &["pipeline", "--config", &cfg]).status.code(), Some(2));
    // Sensor inside the pipe.
    let cfg = write_config(tmp.path(), "[source]\nregime = \"multi_scan\"\ntrajectory_radius = 0.1\n");
    let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulate:"), "{}", stderr(&o));
    assert_eq!(stemfit(tmp.path(), &["pipeline", "--seed", "x"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let o = stemfit(tmp.path(), &["fit", "missing.ply"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("load:"), "{}", stderr(&o));
    fs::write(tmp.path().join("bad.ply"), "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").unwrap();
    assert_eq!(stemfit(tmp.path(), &["fit", "bad.ply"]).status.code(), Some(3));
    assert_eq!(stemfit(tmp.path(), &["pipeline", "--config", "nope.toml"]).status.code(), Some(3));
}

#[test]
fn simulate_then_fit_and_plot() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SURFACE);
    let o = stemfit(tmp.path(), &["simulate", "--config", &cfg, "--out", "sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stats["count"], 8000);

    let o = stemfit(tmp.path(), &["fit", "sim/cloud.ply", "--config", &cfg, "--out", "fit", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!tmp.path().join("fit/cloud.ply").exists());
    let csv = fs::read_to_string(tmp.path().join("fit/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let o = stemfit(tmp.path(), &["plot", "sim/cloud.ply", "--config", &cfg, "--out", "plot", "--slice", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("plot/overlay.svg")).unwrap();
    assert!(svg.contains("slice 0:"));
    assert_eq!(svg.matches(r#"<circle class="model""#).count(), 1);
}

#[test]
fn csv_header_written_once() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SURFACE);
    for seed in ["1", "2", "3"] {
        let o = stemfit(tmp.path(), &["pipeline", "--config", &cfg, "--out", "out", "--format", "csv", "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv = fs::read_to_string(tmp.path().join("out/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("tool,version,seed,regime,"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("tool,")).count(), 1);
    assert!(lines[3].starts_with("stemfit,0.1.0,3,surface,"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SURFACE);
    let o = Command::new(env!("CARGO_BIN_EXE_stemfit"))
        .current_dir(tmp.path())
        .env("STEMFIT_OUT_DIR", "from-env")
        .args(["simulate", "--config", &cfg])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("from-env/cloud.ply").exists());
}

#[test]
fn identical_images_report_infinite_psnr() {
    let tmp = TempDir::new().unwrap();
    let mut pgm = b"P5\n16 16\n255\n".to_vec();
    pgm.extend((0..256).map(|i| (i * 7 % 256) as u8));
    fs::write(tmp.path().join("a.pgm"), &pgm).unwrap();
    let o = stemfit(tmp.path(), &["metrics", "image", "a.pgm", "a.pgm", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["psnr"], "inf");
    assert_eq!(v["ssim"], 1.0);
    assert_eq!(stemfit(tmp.path(), &["metrics", "image", "a.pgm", "nope.png"]).status.code(), Some(3));
}

#[test]
fn help_lists_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = stemfit(tmp.path(), &["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains(stemfit_cli::DEFAULT_CONFIG.lines().nth(3).unwrap()));
    assert!(text.contains("inlier_threshold = 0.01"));
    assert!(text.contains("Exit status"));
}
