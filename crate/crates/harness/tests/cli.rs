use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinsense"))
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn only_run_dir(root: &Path) -> std::path::PathBuf {
    let dirs = entries(root);
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    root.join(&dirs[0])
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let out = bin().args(["reproduce", "fig7"]).env("SPINSENSE_OUT", "/nonexistent").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig7"));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name": "x"}"#).unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["validate", "/does/not/exist.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().arg("bogus-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_fig3_writes_four_csvs() {
    let root = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce", "fig3", "--set", "ensemble.n_packets=50"])
        .env("SPINSENSE_OUT", root.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = only_run_dir(root.path());
    assert!(run.file_name().unwrap().to_string_lossy().starts_with("fig3-"));
    let csvs: Vec<String> = entries(&run).into_iter().filter(|f| f.ends_with(".csv")).collect();
    assert_eq!(csvs, ["fig3_amplitude.csv", "fig3_phase.csv", "fig3_simulation.csv", "fig3_split.csv"]);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["ensemble"]["n_packets"], 50);
}

#[test]
fn reproduce_fig5_covers_both_protocols() {
    let root = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out"])
        .arg(root.path())
        .args(["reproduce", "fig5", "--set", "ensemble.n_packets=200"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = only_run_dir(root.path());
    let mut rdr = csv::Reader::from_path(run.join("fig5_sensitivity.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (p, n, s, h) = (col("protocol"), col("n_pi"), col("s_spectral_t_per_sqrt_hz"), col("config_hash"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    for proto in ["pdd", "cp"] {
        let ns: Vec<&str> = rows.iter().filter(|r| &r[p] == proto).map(|r| &r[n]).collect();
        assert_eq!(ns, ["1", "2", "3", "4", "5"]);
    }
    assert!(rows.iter().all(|r| r[s].parse::<f64>().unwrap() > 0.0));
    let hash = run.file_name().unwrap().to_string_lossy().rsplit('-').next().unwrap().to_string();
    assert!(rows.iter().all(|r| r[h] == hash));
}

#[test]
fn subcommand_runs_config_file_and_hash_separates_outputs() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("amp.json");
    std::fs::write(
        &cfg,
        r#"{
            "name": "amp",
            "seed": 3,
            "spin_system": {"t_m_us": 20},
            "calibration": {"field_per_volt_mt": 0.72, "max_voltage_v": 2.5, "coupling_eta": 0.0067},
            "sequence": {"kind": "hahn", "tau_ns": 1190, "t_pi2_ns": 80, "t_pi_ns": 160},
            "rf": {"amplitude_grid_mt": {"start": 0, "stop": 1.8, "points": 10}},
            "ensemble": {"n_packets": 64, "rf_amplitude_spread": 0.3, "pulse_mode": "ideal",
                         "max_step_ns": null, "readout_halfwidth_ns": 0, "readout_samples": 1}
        }"#,
    )
    .unwrap();
    let out_root = root.path().join("runs");
    for seed in ["3", "4"] {
        let out = bin()
            .arg("sweep-amplitude")
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(&out_root)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let runs = entries(&out_root);
    assert_eq!(runs.len(), 2, "{runs:?}");
    for r in runs {
        let files = entries(&out_root.join(r));
        assert!(files.contains(&"sweep_amplitude.csv".to_string()));
        assert!(files.contains(&"sweep_amplitude_fit.csv".to_string()));
        assert!(files.contains(&"manifest.json".to_string()));
    }

    let out = bin()
        .arg("sweep-amplitude")
        .arg(&cfg)
        .args(["--set", "rf.amplitude_grid_mt=[0, 5]"])
        .arg("--out")
        .arg(&out_root)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
