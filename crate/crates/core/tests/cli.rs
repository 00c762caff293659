use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use smstap::harness::output::read_matrix_binary;
use tempfile::TempDir;

const LIGHT: &str = "\
[processing]
doppler_bins = 64
angle_bins = 21

[bench]
n = 12
rank = 3
trials = 5
warmup = 1
";

fn smstap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smstap"))
        .args(args)
        .env_remove("SMSTAP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn light_config(dir: &Path) -> PathBuf {
    let path = dir.join("light.toml");
    fs::write(&path, LIGHT).unwrap();
    path
}

fn run(scenario: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    smstap(&args)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn list_names_every_scenario() {
    let out = smstap(&["list-scenarios"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    for name in ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "bench_eig", "custom"] {
        assert!(stdout.lines().any(|l| l.starts_with(name)), "{name} missing from\n{stdout}");
    }
}

#[test]
fn unknown_scenario_exits_nonzero() {
    let tmp = TempDir::new().unwrap();
    let out = smstap(&["run", "fig99", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("unknown scenario `fig99`"));
    assert!(!tmp.path().join("fig99").exists());
}

#[test]
fn validate_reports_field_paths() {
    let tmp = TempDir::new().unwrap();
    let good = light_config(tmp.path());
    let out = smstap(&["validate", good.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains(": ok"));
    assert!(stdout.contains("doppler_bins = 64"));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[design]\nnum_symbols = 3\n[scene]\ndoppler_spread = -1.0\n").unwrap();
    let out = smstap(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("design.num_symbols"), "{stderr}");
    assert!(stderr.contains("scene.doppler_spread"), "{stderr}");
}

#[test]
fn every_scenario_runs_and_writes_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = light_config(tmp.path());
    let out_root = tmp.path().join("out");
    for scenario in ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "bench_eig", "custom"] {
        let out = run(scenario, &config, &out_root, &["--trials", "2"]);
        assert!(out.status.success(), "{scenario}: {}", text(&out.stderr));
        let dir = out_root.join(scenario);
        let rep = report(&dir);
        assert_eq!(rep["scenario"], scenario);
        assert_eq!(rep["trials"], 2);
        let hash = rep["param_hash"].as_str().unwrap();
        assert_eq!(hash.len(), 64);

        let manifest = rep["files"].as_array().unwrap();
        assert!(!manifest.is_empty(), "{scenario} wrote nothing");
        for entry in manifest {
            let name = entry["file"].as_str().unwrap();
            let path = dir.join(name);
            let bytes = fs::metadata(&path).unwrap().len();
            assert!(bytes > 0, "{scenario}/{name} is empty");
            assert_eq!(entry["bytes"].as_u64(), Some(bytes));
            if name.ends_with(".csv") {
                let first = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
                assert!(first.starts_with(&format!("# scenario={scenario} seed=42 trials=2 params={hash}")), "{first}");
            }
        }
        let leftovers: Vec<_> = files(&dir).into_keys().filter(|f| f.ends_with(".partial")).collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let config = light_config(tmp.path());
    for scenario in ["fig4", "custom", "fig7"] {
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        for root in [&a, &b] {
            let out = run(scenario, &config, root, &["--trials", "3", "--seed", "7"]);
            assert!(out.status.success(), "{}", text(&out.stderr));
        }
        let (mut fa, mut fb) = (files(&a.join(scenario)), files(&b.join(scenario)));
        // wall clock differs between runs
        fa.remove("report.json");
        fb.remove("report.json");
        assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
        for (name, bytes) in &fa {
            assert!(bytes == &fb[name], "{scenario}/{name} differs between runs");
        }
        let (ra, rb) = (report(&a.join(scenario)), report(&b.join(scenario)));
        assert_eq!(ra["param_hash"], rb["param_hash"]);
        assert_eq!(ra["summary"], rb["summary"]);
    }
}

#[test]
fn seed_changes_the_data() {
    let tmp = TempDir::new().unwrap();
    let config = light_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("custom", &config, &a, &["--seed", "1"]).status.success());
    assert!(run("custom", &config, &b, &["--seed", "2"]).status.success());
    assert_ne!(fs::read(a.join("custom/cube.bin")).unwrap(), fs::read(b.join("custom/cube.bin")).unwrap());
    assert_ne!(report(&a.join("custom"))["param_hash"], report(&b.join("custom"))["param_hash"]);
}

#[test]
fn failed_run_leaves_no_files() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("infeasible.toml");
    fs::write(&config, "[design]\nsimilarity_bound = 0.0\n").unwrap();
    let out_root = tmp.path().join("out");
    for scenario in ["fig2", "fig4", "custom"] {
        let out = run(scenario, &config, &out_root, &[]);
        assert_eq!(out.status.code(), Some(1));
        let stderr = text(&out.stderr);
        assert!(stderr.contains(&format!("scenario `{scenario}` failed")), "{stderr}");
        assert!(stderr.contains("infeasible design"), "{stderr}");
        assert!(files(&out_root.join(scenario)).is_empty());
    }
}

fn parse_matrix_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn binary_and_csv_matrices_agree() {
    let tmp = TempDir::new().unwrap();
    let config = light_config(tmp.path());
    let out_root = tmp.path().join("out");
    assert!(run("custom", &config, &out_root, &[]).status.success());
    let dir = out_root.join("custom");
    for (stem, rows, cols) in [("cube", 10, 40), ("covariance", 40, 40)] {
        let m = read_matrix_binary(&mut fs::File::open(dir.join(format!("{stem}.bin"))).unwrap()).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (rows, cols));
        let csv = parse_matrix_csv(&dir.join(format!("{stem}.csv")));
        assert_eq!(csv.len(), rows);
        for (i, line) in csv.iter().enumerate() {
            for j in 0..cols {
                // 17 significant digits round-trip exactly
                assert_eq!(line[2 * j], m[(i, j)].re);
                assert_eq!(line[2 * j + 1], m[(i, j)].im);
            }
        }
    }
}

#[test]
fn bench_subcommand_honours_overrides() {
    let tmp = TempDir::new().unwrap();
    let out = smstap(&[
        "bench-eig", "--n", "10", "--rank", "2", "--trials", "4", "--seed", "3", "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rep = report(&tmp.path().join("bench_eig"));
    assert_eq!(rep["config"]["bench"]["n"], 10);
    assert_eq!(rep["trials"], 4);
    let timing = fs::read_to_string(tmp.path().join("bench_eig/timing.csv")).unwrap();
    // comment, header, power and reference at n and 2n
    assert_eq!(timing.lines().count(), 6);
    assert!(timing.lines().any(|l| l.starts_with("power,20,2,4,")));
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_smstap"))
        .args(["run", "fig2"])
        .env("SMSTAP_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(tmp.path().join("fig2/beampattern.csv").exists());
}
