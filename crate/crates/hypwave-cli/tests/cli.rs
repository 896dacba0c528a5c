//! End-to-end runs of the `hypwave` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hypwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypwave")).args(args).output().expect("spawn hypwave")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, json: serde_json::Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_ok(config: &str, out: &Path, extra: &[&str]) {
    let mut args = vec!["run", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = hypwave(&args);
    assert!(o.status.success(), "{config}: {}", String::from_utf8_lossy(&o.stderr));
}

/// Header plus numeric body.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(rows: &[Vec<f64>], header: &[String], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

#[test]
fn damped_wave_energy_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "md.json",
        serde_json::json!({"experiment": "models-decay", "parameters": {"model": "damped-wave", "dim": 1, "u1": {"type": "gaussian", "width": 1.0}}}),
    );
    run_ok(&cfg, tmp.path(), &[]);
    let (h, rows) = read_csv(&tmp.path().join("models-decay_energy.csv"));
    assert_eq!(h, ["t", "energy", "l2_norm"]);
    let e = column(&rows, &h, "energy");
    assert!(e.len() >= 10 && e[0] > 0.0);
    assert!(e.windows(2).all(|w| w[1] <= w[0]), "{e:?}");
    assert!(e.last().unwrap() < &(0.1 * e[0]));
}

#[test]
fn free_wave_energy_is_conserved() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fw.json", serde_json::json!({"experiment": "models-decay", "parameters": {"model": "free-wave", "dim": 2}}));
    run_ok(&cfg, tmp.path(), &[]);
    let (h, rows) = read_csv(&tmp.path().join("models-decay_energy.csv"));
    let e = column(&rows, &h, "energy");
    assert!(e.iter().all(|v| (v - e[0]).abs() <= 1e-12 * e[0]), "{e:?}");
}

#[test]
fn floquet_scan_finds_instability() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(configs_dir().join("floquet-scan.json").to_str().unwrap(), tmp.path(), &[]);
    let (h, rows) = read_csv(&tmp.path().join("floquet-scan_scan.csv"));
    assert_eq!(h, ["xi", "kappa"]);
    assert!(column(&rows, &h, "kappa").iter().any(|&k| k > 0.0));
    let (_, iv) = read_csv(&tmp.path().join("floquet-scan_intervals.csv"));
    assert!(!iv.is_empty());
}

#[test]
fn missing_mu_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "s.json", serde_json::json!({"experiment": "scattering", "parameters": {}}));
    let o = hypwave(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`mu`"));
    assert!(!out.exists());
}

#[test]
fn malformed_configs_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        serde_json::json!({"experiment": "nonexistent"}),
        serde_json::json!({"parameters": {"mu": 0.3}}),
        serde_json::json!({"experiment": "scattering", "parameters": {"mu": "large"}}),
        serde_json::json!({"experiment": "scattering", "parameters": {"mu": -1.0}}),
        serde_json::json!({"experiment": "gec", "parameters": {"kind": "l2", "mu": 0.5}}),
        serde_json::json!({"experiment": "dispersive-fit", "parameters": {"surface": {"name": "quartic", "dim": 3}}}),
        serde_json::json!({"experiment": "floquet-scan", "parameters": {"eps": 0.3}, "colour": 1}),
    ];
    for (i, c) in cases.into_iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), c.clone());
        let out = tmp.path().join(format!("o{i}"));
        let o = hypwave(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{c}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    let o = hypwave(&["run", tmp.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "unrelated").unwrap();
    // the contact table is written before the oscillatory quadrature fails
    let cfg = write_config(tmp.path(), "f.json", serde_json::json!({"experiment": "dispersive-fit", "parameters": {"surface": "sphere", "rel_tol": 1e-16}}));
    let o = hypwave(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quadrature"));
    let left: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["keep.txt"]);
}

#[test]
fn catalog_is_stable_and_anchored() {
    let a = hypwave(&["list"]);
    let b = hypwave(&["list"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let entries: Vec<&str> = text.split("\n\n").filter(|s| !s.trim().is_empty()).collect();
    assert_eq!(entries.len(), 12);
    for e in &entries {
        assert!(e.lines().any(|l| l.trim_start().starts_with("anchor: ")), "{e}");
        assert!(e.lines().any(|l| l.trim_start().starts_with("required: ")), "{e}");
        assert!(e.lines().any(|l| l.trim_start().starts_with("csv ")), "{e}");
    }
}

/// Every catalogued experiment runs from its documented config and emits the listed columns.
#[test]
fn every_documented_config_runs() {
    let catalog = String::from_utf8(hypwave(&["list"]).stdout).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in catalog.split("\n\n").filter(|s| !s.trim().is_empty()) {
        let name = entry.lines().next().unwrap();
        let cfg = configs_dir().join(format!("{name}.json"));
        run_ok(cfg.to_str().unwrap(), tmp.path(), &[]);
        for line in entry.lines().filter_map(|l| l.trim_start().strip_prefix("csv ")) {
            let (file, cols) = line.split_once(": ").unwrap();
            let (h, rows) = read_csv(&tmp.path().join(file));
            assert_eq!(h.join(", "), cols, "{file}");
            assert!(!rows.is_empty() || file.ends_with("_intervals.csv"), "{file} is empty");
            assert!(rows.iter().flatten().all(|v| v.is_finite()), "{file} has non-finite entries");
        }
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(format!("{name}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(meta["config"]["experiment"], name);
        assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        seen += 1;
    }
    assert_eq!(seen, 12);
}

fn bodies(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn same_config_and_seed_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("hierarchy.json");
    let cfg = cfg.to_str().unwrap();
    let dirs: Vec<PathBuf> = (0..4).map(|i| tmp.path().join(format!("r{i}"))).collect();
    run_ok(cfg, &dirs[0], &["--threads", "1"]);
    run_ok(cfg, &dirs[1], &["--threads", "4"]);
    run_ok(cfg, &dirs[2], &["--seed", "99"]);
    run_ok(cfg, &dirs[3], &["--seed", "99", "--threads", "3"]);
    assert_eq!(bodies(&dirs[0]), bodies(&dirs[1]));
    assert_eq!(bodies(&dirs[2]), bodies(&dirs[3]));
    assert_ne!(bodies(&dirs[0]), bodies(&dirs[2]));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dirs[2].join("hierarchy.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["config"]["seed"], 99);
}

#[test]
fn constcoeff_amplitudes_reproduce_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cc.json",
        serde_json::json!({"experiment": "constcoeff-amplitudes", "parameters": {"speeds": [1.0], "xi": 2.0, "data": [3.0], "times": [0.0, 0.5]}}),
    );
    run_ok(&cfg, tmp.path(), &[]);
    // first-order operator with root τ = ξ: u(t) = 3 e^{iξt}
    let (h, rows) = read_csv(&tmp.path().join("constcoeff-amplitudes_roots.csv"));
    assert!((column(&rows, &h, "re")[0] - 2.0).abs() < 1e-12 && column(&rows, &h, "im")[0].abs() < 1e-12);
    let (h, rows) = read_csv(&tmp.path().join("constcoeff-amplitudes_solution.csv"));
    let (re, im) = (column(&rows, &h, "re"), column(&rows, &h, "im"));
    for (k, t) in [0.0f64, 0.5].iter().enumerate() {
        assert!((re[k] - 3.0 * (2.0 * t).cos()).abs() < 1e-12 && (im[k] - 3.0 * (2.0 * t).sin()).abs() < 1e-12, "t={t}: {} {}", re[k], im[k]);
    }
}
