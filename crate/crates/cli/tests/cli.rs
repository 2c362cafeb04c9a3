//! End-to-end tests of the binary: every subcommand, the file contracts,
//! and the exit-code contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn speclust(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speclust"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

const SPEC_JSON: &str = r#"{
  "n": 24, "p": 4, "k": 2, "delta": 8.0, "beta": 1.0,
  "layout": "simplex", "noise": "isotropic-gaussian", "seed": 7
}"#;

#[test]
fn generate_writes_all_files_with_expected_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.json", SPEC_JSON);
    let out = speclust(&["generate", "--config", &cfg, "--out", "gen"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let x = fs::read_to_string(tmp.path().join("gen/X.csv")).unwrap();
    let rows: Vec<&str> = x.lines().collect();
    assert_eq!(rows.len(), 4, "X.csv has p rows");
    assert_eq!(rows[0].split(',').count(), 24, "X.csv has n columns");
    let z = fs::read_to_string(tmp.path().join("gen/z_star.csv")).unwrap();
    assert_eq!(z.lines().count(), 24);
    let c = fs::read_to_string(tmp.path().join("gen/centers.csv")).unwrap();
    assert_eq!(c.lines().count(), 4);
    assert_eq!(c.lines().next().unwrap().split(',').count(), 2);
    assert!(tmp.path().join("gen/spec.json").exists());
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.json", SPEC_JSON);
    assert!(speclust(&["generate", "--config", &cfg, "--out", "a"], tmp.path()).status.success());
    assert!(speclust(&["generate", "--config", &cfg, "--out", "b"], tmp.path()).status.success());
    for f in ["X.csv", "z_star.csv", "centers.csv", "spec.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn zero_noise_generate_matches_population() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "spec.json",
        r#"{
          "n": 9, "p": 3, "k": 3, "delta": 2.0, "beta": 1.0,
          "layout": "collinear",
          "noise": {"bounded-uniform": {"variance_proxy": 0.0}},
          "seed": 3
        }"#,
    );
    let out = speclust(&["generate", "--config", &cfg, "--out", "gen"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // X columns must equal the center column picked by each label
    let x = fs::read_to_string(tmp.path().join("gen/X.csv")).unwrap();
    let centers = fs::read_to_string(tmp.path().join("gen/centers.csv")).unwrap();
    let labels: Vec<usize> = fs::read_to_string(tmp.path().join("gen/z_star.csv"))
        .unwrap()
        .lines()
        .map(|l| l.trim().parse::<usize>().unwrap())
        .collect();
    let parse = |text: &str| -> Vec<Vec<f64>> {
        text.lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let xm = parse(&x);
    let cm = parse(&centers);
    for (i, &label) in labels.iter().enumerate() {
        for r in 0..3 {
            assert_eq!(xm[r][i], cm[r][label - 1], "X != P at ({r},{i})");
        }
    }
}

#[test]
fn cluster_on_generated_zero_noise_dir_reports_zero_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_cfg = write(
        tmp.path(),
        "spec.json",
        r#"{
          "n": 30, "p": 5, "k": 3, "delta": 6.0, "beta": 1.0,
          "layout": "simplex",
          "noise": {"bounded-uniform": {"variance_proxy": 0.0}},
          "seed": 11
        }"#,
    );
    assert!(speclust(&["generate", "--config", &gen_cfg, "--out", "gen"], tmp.path())
        .status
        .success());
    let cluster_cfg = write(tmp.path(), "cluster.json", r#"{"input_dir": "gen"}"#);
    let out = speclust(
        &["cluster", "--config", &cluster_cfg, "--out", "clu"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("clu/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["loss"], 0.0);
    assert_eq!(summary["k"], 3);
    assert_eq!(summary["algorithm"], "alg1");
    assert!(tmp.path().join("clu/labels.csv").exists());
    let centers_hat = fs::read_to_string(tmp.path().join("clu/centers_hat.csv")).unwrap();
    assert_eq!(centers_hat.lines().count(), 5);
}

#[test]
fn cluster_alg3_matches_alg1_up_to_permutation() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_cfg = write(tmp.path(), "spec.json", SPEC_JSON);
    assert!(speclust(&["generate", "--config", &gen_cfg, "--out", "gen"], tmp.path())
        .status
        .success());
    let cluster_cfg = write(
        tmp.path(),
        "cluster.json",
        r#"{"input_dir": "gen", "kmeans": {"seed": 5}}"#,
    );
    for (alg, dir) in [("alg1", "c1"), ("alg3", "c3")] {
        let out = speclust(
            &["cluster", "--config", &cluster_cfg, "--out", dir, "--algorithm", alg],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read_labels = |d: &str| -> Vec<u32> {
        fs::read_to_string(tmp.path().join(d).join("labels.csv"))
            .unwrap()
            .lines()
            .map(|l| l.trim().parse().unwrap())
            .collect()
    };
    let l1 = read_labels("c1");
    let l3 = read_labels("c3");
    // between-algorithm loss must be zero: check agreement up to relabeling
    let mut map = std::collections::HashMap::new();
    for (a, b) in l1.iter().zip(&l3) {
        assert_eq!(map.entry(*a).or_insert(*b), &*b, "labelings not a relabeling");
    }
}

#[test]
fn cluster_missing_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cluster.json", r#"{"input_dir": "nowhere"}"#);
    let out = speclust(&["cluster", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing-input"));
}

#[test]
fn sweep_emits_records_fit_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.json",
        r#"{
          "base": {"n": 40, "p": 4, "k": 2, "delta": 1.0, "beta": 1.0,
                   "layout": "simplex", "noise": "isotropic-gaussian", "seed": 0},
          "delta_grid": [1.0, 1.5, 2.0],
          "trials_per_delta": 4,
          "algorithms": ["alg1", "alg2"],
          "master_seed": 9,
          "kmeans": {"restarts": 5}
        }"#,
    );
    let out = speclust(&["sweep", "--config", &cfg, "--out", "sw"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = fs::read_to_string(tmp.path().join("sw/records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delta,trial,algorithm,loss,objective,elapsed_ms,seed"
    );
    assert_eq!(lines.count(), 3 * 4 * 2);
    let fits: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sw/ratefit.json")).unwrap())
            .unwrap();
    assert!(fits.get("alg1").is_some() && fits.get("alg2").is_some());
    let svg = fs::read_to_string(tmp.path().join("sw/rate.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("circle"));

    // determinism across runs and thread counts
    let out2 = speclust(
        &["sweep", "--config", &cfg, "--out", "sw2", "--threads", "1"],
        tmp.path(),
    );
    assert!(out2.status.success());
    assert_eq!(
        fs::read(tmp.path().join("sw/records.csv")).unwrap(),
        fs::read(tmp.path().join("sw2/records.csv")).unwrap()
    );
}

#[test]
fn fit_recovers_exact_synthetic_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("delta,trial,algorithm,loss,objective,elapsed_ms,seed\n");
    for (i, d) in [3.0f64, 3.5, 4.0, 4.5, 5.0].iter().enumerate() {
        let loss = (-d * d / 8.0).exp();
        csv.push_str(&format!("{d},0,alg1,{loss:e},0e0,0e0,{i}\n"));
    }
    let records = write(tmp.path(), "records.csv", &csv);
    let out = speclust(&["fit", "--config", &records, "--out", "fit"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fits: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fit/ratefit.json")).unwrap())
            .unwrap();
    let slope = fits["alg1"]["slope"].as_f64().unwrap();
    assert!((slope + 0.125).abs() <= 1e-9, "slope {slope}");
    assert_eq!(fits["alg1"]["n_censored"], 0);
    assert_eq!(fits["alg1"]["reference_slope"], -0.125);
}

#[test]
fn fit_with_all_censored_points_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = "delta,trial,algorithm,loss,objective,elapsed_ms,seed\n\
               3e0,0,alg1,0e0,0e0,0e0,1\n\
               4e0,0,alg1,0e0,0e0,0e0,2\n";
    let records = write(tmp.path(), "records.csv", csv);
    let out = speclust(&["fit", "--config", &records, "--out", "fit"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient-uncensored-points"));
}

#[test]
fn sweep_with_empty_grid_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.json",
        r#"{
          "base": {"n": 10, "p": 2, "k": 2, "delta": 1.0, "beta": 1.0,
                   "layout": "simplex", "noise": "isotropic-gaussian", "seed": 0},
          "delta_grid": [],
          "trials_per_delta": 1,
          "algorithms": ["alg1"],
          "master_seed": 1
        }"#,
    );
    let out = speclust(&["sweep", "--config", &cfg, "--out", "sw"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_default_config_passes_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "verify.json",
        r#"{
          "instance": {"n": 90, "p": 18, "k": 3, "delta": 6.0, "beta": 1.0,
                       "layout": "collinear", "noise": "isotropic-gaussian", "seed": 1},
          "population_trials": 5,
          "perturbation_trials": 30,
          "haar_j": 3,
          "haar_trials": 400,
          "tail_n": 40, "tail_p": 40, "tail_t": 3.0, "tail_trials": 20,
          "equivalence_trials": 8
        }"#,
    );
    let out = speclust(&["verify", "--config", &cfg, "--out", "ver"], tmp.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ver/verify.json")).unwrap())
            .unwrap();
    assert_eq!(report["all_pass"], true);
    let checks = report["checks"].as_array().unwrap();
    for name in [
        "population-structure",
        "weyl",
        "davis-kahan",
        "projector-residual-bound",
        "haar-residual",
        "opnorm-tail",
        "algorithm-equivalence",
    ] {
        let check = checks
            .iter()
            .find(|c| c["name"] == name)
            .unwrap_or_else(|| panic!("check {name} missing"));
        assert_eq!(check["status"], "pass", "check {name}: {check}");
    }
}

#[test]
fn verify_skips_haar_for_bounded_uniform_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "verify.json",
        r#"{
          "instance": {"n": 40, "p": 8, "k": 2, "delta": 6.0, "beta": 1.0,
                       "layout": "simplex",
                       "noise": {"bounded-uniform": {"variance_proxy": 1.0}},
                       "seed": 1},
          "population_trials": 2,
          "perturbation_trials": 5,
          "tail_n": 20, "tail_p": 20, "tail_trials": 4,
          "equivalence_trials": 2
        }"#,
    );
    let out = speclust(&["verify", "--config", &cfg, "--out", "ver"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ver/verify.json")).unwrap())
            .unwrap();
    let haar = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "haar-residual")
        .unwrap();
    assert_eq!(haar["status"], "skipped");
    assert!(haar["detail"]
        .as_str()
        .unwrap()
        .contains("hypothesis requires isotropic Gaussian"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "spec.json", SPEC_JSON);
    assert!(speclust(&["generate", "--config", &cfg, "--out", "a", "--seed", "100"], tmp.path())
        .status
        .success());
    assert!(speclust(&["generate", "--config", &cfg, "--out", "b", "--seed", "101"], tmp.path())
        .status
        .success());
    let a = fs::read(tmp.path().join("a/X.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/X.csv")).unwrap();
    assert_ne!(a, b, "different seeds must give different data");
    let spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/spec.json")).unwrap()).unwrap();
    assert_eq!(spec["seed"], 100);
}

#[test]
fn json_format_emits_json_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sweep.json",
        r#"{
          "base": {"n": 12, "p": 2, "k": 2, "delta": 1.0, "beta": 1.0,
                   "layout": "simplex", "noise": "isotropic-gaussian", "seed": 0},
          "delta_grid": [1.0, 2.0],
          "trials_per_delta": 2,
          "algorithms": ["alg1"],
          "master_seed": 3,
          "kmeans": {"restarts": 3}
        }"#,
    );
    let out = speclust(
        &["sweep", "--config", &cfg, "--out", "sw", "--format", "json"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sw/records.json")).unwrap())
            .unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert!(rows[0].get("delta").is_some());
    assert!(rows[0].get("loss").is_some());
}
