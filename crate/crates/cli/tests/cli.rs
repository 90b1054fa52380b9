//! End-to-end checks of the binary: reproducibility, schemas, error paths.

use std::process::Command;

fn svlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svlab"))
}

#[test]
fn tail_tables_are_byte_identical_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = svlab()
            .args([
                "tail",
                "--profile",
                "band:24:0.2",
                "--atom",
                "gaussian",
                "--shift",
                "none",
                "--tgrid",
                "0.05:0.4:4",
                "--trials",
                "120",
                "--seed",
                "11",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same config + seed must reproduce byte-identically");
    // manifest exists alongside and echoes the seed
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["config_hash"].is_string());
}

#[test]
fn tail_tables_differ_across_seeds() {
    let run = |seed: &str| {
        let out = svlab()
            .args([
                "tail", "--profile", "ones:16", "--atom", "gaussian", "--shift", "none",
                "--tgrid", "0.1:0.5:3", "--trials", "100", "--seed", seed,
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn band_check_emits_connectivity_report() {
    let out = svlab()
        .args(["check-profile", "--band", "n=60", "eps=0.2", "--seed", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["kind"], "broad");
    assert_eq!(report["verdict"], true);
    assert!(report["params"]["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn certify_reports_bound_below_measured_smin() {
    let out = svlab()
        .args([
            "certify",
            "--profile",
            "halfones:32",
            "--shift",
            "diag:1.0",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bound = body["certificate"]["bound"].as_f64().unwrap();
    let smin = body["measured_smin"].as_f64().unwrap();
    let opnorm = body["measured_opnorm"].as_f64().unwrap();
    assert!(bound <= smin + 1e-9 * opnorm);
}

#[test]
fn certify_accepts_decomposition_file() {
    let dir = tempfile::tempdir().unwrap();
    let dec_path = dir.path().join("dec.json");
    let status = svlab()
        .args(["decompose", "--profile", "halfones:32", "--seed", "4", "--out"])
        .arg(&dec_path)
        .status()
        .unwrap();
    assert!(status.success());
    let out = svlab()
        .args([
            "certify",
            "--profile",
            "halfones:32",
            "--shift",
            "diag:1.0",
            "--seed",
            "4",
            "--decomposition",
        ])
        .arg(&dec_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn anticonc_emits_schema_with_monotone_estimates() {
    let out = svlab()
        .args([
            "anticonc", "--atom", "rademacher", "--m", "32", "--rgrid", "0.1:0.4:4",
            "--samples", "20000", "--seed", "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "atom,m,r,p_hat,stderr,method,seed,config_hash"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(row.starts_with("rademacher,32,"));
    }
}

#[test]
fn invalid_specs_fail_with_diagnostics() {
    let out = svlab()
        .args(["tail", "--profile", "band:x:0.2", "--tgrid", "0.1:0.5:3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("band:x:0.2"), "diagnostic names the bad spec: {stderr}");

    let out = svlab()
        .args(["tail", "--profile", "ones:8", "--tgrid", "nonsense"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));

    let out = svlab()
        .args(["check-profile", "--band", "n=60"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps"));
}

#[test]
fn seed_env_var_sets_default() {
    let a = svlab()
        .env("SVLAB_SEED", "17")
        .args(["tail", "--profile", "ones:12", "--tgrid", "0.1:0.3:2", "--trials", "100"])
        .output()
        .unwrap();
    assert!(a.status.success());
    let b = svlab()
        .args([
            "tail", "--profile", "ones:12", "--tgrid", "0.1:0.3:2", "--trials", "100",
            "--seed", "17",
        ])
        .output()
        .unwrap();
    let text_a = String::from_utf8(a.stdout).unwrap();
    let text_b = String::from_utf8(b.stdout).unwrap();
    // same rows up to the config-hash column (argv differs)
    let strip = |s: &str| -> Vec<String> {
        s.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    assert_eq!(strip(&text_a), strip(&text_b));
}

#[test]
fn oracle_suite_passes() {
    let out = svlab().args(["oracle-suite", "--seed", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    assert!(!text.contains("FAIL"));
}
