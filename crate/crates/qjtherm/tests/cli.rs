use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qjtherm"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    // unknown config key
    let cfg = write_config(dir.path(), r#"{"temperature_k": 4, "tau_ns": 5, "bogus": 1}"#);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("a"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // mutually exclusive gap settings
    let cfg = write_config(
        dir.path(),
        r#"{"wavelength_nm": 785, "gap_ev": 1.0, "temperature_k": 4, "tau_ns": 5}"#,
    );
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // missing config file
    let out = bin()
        .args(["simulate", "--config", "/nonexistent/qjtherm.json", "--out"])
        .arg(dir.path().join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn monte_carlo_refused_in_extreme_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"wavelength_nm": 785, "temperature_k": 4, "tau_ns": 5, "n_samples": 1000}"#,
    );
    let out = bin()
        .args(["jarzynski", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("enumeration"), "stderr: {stderr}");
}

#[test]
fn fit_on_flat_histogram_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from(
        "#bin_width_ns=0.1\n#rep_rate_mhz=80\n#n_cycles=100000\n",
    );
    for i in 0..125 {
        body.push_str(&format!("{i},7\n"));
    }
    let hist = dir.path().join("flat.txt");
    fs::write(&hist, body).unwrap();

    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("fit")
        .arg(&hist)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // a structured failure report is still produced
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "failed");
    assert!(doc["error"].is_string());
}

#[test]
fn synth_then_fit_recovers_lifetime_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"gap_ev": 1.5794, "temperature_k": 4, "tau_ns": 5, "seed": 11,
            "synth": {"rep_rate_mhz": 80, "n_cycles": 1000000, "excitation_prob": 1.0,
                      "detection_efficiency": 1.0, "dark_rate_hz": 0.0, "bin_width_ns": 0.1}}"#,
    );
    let synth_dir = dir.path().join("synth");
    assert!(bin()
        .args(["synth", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&synth_dir)
        .status()
        .unwrap()
        .success());

    let fit_dir = dir.path().join("fit");
    assert!(bin()
        .arg("fit")
        .arg(synth_dir.join("histogram.txt"))
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&fit_dir)
        .status()
        .unwrap()
        .success());

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(doc["status"], "ok");
    let tau = doc["decay_fit"]["tau_ns"].as_f64().unwrap();
    assert!((tau - 5.0).abs() / 5.0 < 0.02, "tau = {tau}");
    let s_hat = doc["swap_estimate"]["s_hat"].as_f64().unwrap();
    let injected = (-0.1f64 / 5.0).exp();
    assert!((s_hat - injected).abs() / injected < 0.01, "s_hat = {s_hat}");
}

#[test]
fn simulate_exports_parse_back_and_feed_jarzynski() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"gap_ev": 0.001, "temperature_k": 4, "survival": 0.8, "n_rounds": 30,
            "bath_excitation": 0.02, "seed": 4}"#,
    );
    let sim_dir = dir.path().join("sim");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&sim_dir)
        .status()
        .unwrap()
        .success());

    // exported ensemble parses back to an identical file
    let text = fs::read_to_string(sim_dir.join("ensemble.txt")).unwrap();
    let parsed = qjtherm::ensemble_io::parse_ensemble(&text).unwrap();
    assert_eq!(qjtherm::ensemble_io::write_ensemble(&parsed).unwrap(), text);

    // and feeds the jarzynski command, which stays on 1
    let jz_dir = dir.path().join("jz");
    assert!(bin()
        .args(["jarzynski", "--ensemble"])
        .arg(sim_dir.join("ensemble.txt"))
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&jz_dir)
        .status()
        .unwrap()
        .success());
    let series = qjtherm::report::parse_round_series(
        &fs::read_to_string(jz_dir.join("jarzynski.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(series.len(), 31);
    for (_, v) in series {
        assert!((v - 1.0).abs() < 1e-9, "value {v}");
    }

    // heat series parses and each row is a distribution
    let heat = fs::read_to_string(sim_dir.join("heat.csv")).unwrap();
    for line in heat.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!((cols.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn infer_shift_from_samples_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"wavelength_nm": 785, "temperature_k": 4, "tau_ns": 5,
            "shift": {"delta_ev": 0.0005, "epsilon_ev": 0.00005}}"#,
    );
    // thermal state at 4 K is all ground, so every quench work is δ
    let samples = dir.path().join("work.txt");
    fs::write(&samples, "0.0005\n".repeat(1000)).unwrap();

    let out_dir = dir.path().join("out");
    assert!(bin()
        .args(["infer-shift", "--work-samples"])
        .arg(&samples)
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("shift.json")).unwrap()).unwrap();
    let delta = doc["delta_ev"].as_f64().unwrap();
    assert!((delta - 5e-4).abs() < 1e-12, "delta = {delta}");

    // malformed sample line is a parse error
    fs::write(&samples, "0.0005\nnot-a-number\n").unwrap();
    let out = bin()
        .args(["infer-shift", "--work-samples"])
        .arg(&samples)
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_lists_hashed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(bin()
        .args(["jarzynski", "--out"])
        .arg(&out_dir)
        .args(["--format", "json"])
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "jarzynski");
    let outputs = report["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1);
    let data = fs::read(out_dir.join("jarzynski.json")).unwrap();
    assert_eq!(
        outputs[0]["sha256"].as_str().unwrap(),
        qjtherm::report::sha256_hex(&data)
    );
}
