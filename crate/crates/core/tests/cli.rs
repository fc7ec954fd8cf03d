use std::process::Command;

fn sirf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sirf"))
}

#[test]
fn analyze_prints_csv_row() {
    let out = sirf()
        .args(["analyze", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("A,a,r,beta0"));
    assert!(lines.next().unwrap().starts_with("0.96,0.14,0.25,2,0.2,"));
}

#[test]
fn simulate_writes_trajectory_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    std::fs::write(
        &params,
        r#"{"A":0.96,"a":0.14,"r":0.25,"beta0":2.0,"mu":0.2,"gamma":0.1,"omega":2.0}"#,
    )
    .unwrap();
    let status = sirf()
        .args(["simulate", "--system", "full", "--t-end", "5"])
        .arg("--config")
        .arg(&params)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,S,I,R\n"));
    let stats: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("trajectory_stats.json")).unwrap(),
    )
    .unwrap();
    assert!(stats["steps_accepted"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_and_regime_map_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        r#"
        job = "classify"
        [classify]
        transient_periods = 20
        kept_periods = 50
        min_transient_time = 0.0
        min_kept_time = 0.0
        [[axes]]
        param = "gamma"
        values = [0.0, 0.1]
        "#,
    )
    .unwrap();
    for sub in ["sweep", "regime-map"] {
        let status = sirf()
            .arg(sub)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .args([
                "--workers",
                "2",
                "--seed",
                "5",
                "--format",
                "csv",
                "--format",
                "gnuplot",
            ])
            .status()
            .unwrap();
        assert!(status.success(), "{sub}");
    }
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    assert!(dir.path().join("sweep.dat").exists());
    assert!(dir.path().join("regime_map.csv").exists());
}

#[test]
fn bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = sirf()
        .args(["sweep", "--config"])
        .arg(dir.path().join("nope.toml"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[[axes]]\nparam = \"zeta\"\nvalues = [1.0]\n").unwrap();
    let bad = sirf()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn poincare_and_lyapunov_run() {
    let dir = tempfile::tempdir().unwrap();
    let status = sirf()
        .args([
            "poincare", "--phase", "--t-end", "200", "--x0", "0.4,0.3", "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let section = std::fs::read_to_string(dir.path().join("section.csv")).unwrap();
    assert!(section.lines().count() > 20);

    let out = sirf()
        .args([
            "lyapunov",
            "--x0",
            "0.41,0.28",
            "--transient",
            "20",
            "--periods",
            "100",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["lambda_max"].is_number());
}
