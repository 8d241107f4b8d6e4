use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn catgate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catgate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CATGATE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn coherent_state_vacuum_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&catgate(&["state", "coherent", "--alpha", "0.92"], dir.path()));
    // c0 = exp(-|alpha|^2 / 2)
    let c0 = v["c0"][0].as_f64().unwrap();
    assert!((c0 - (-0.92f64 * 0.92 / 2.0).exp()).abs() < 1e-9, "{c0}");
    assert!((c0 - 0.655).abs() < 1e-3);
    let ket: Value = serde_json::from_reader(std::fs::File::open(dir.path().join("coherent.json")).unwrap()).unwrap();
    assert_eq!(ket["cutoff"], 20);
    assert_eq!(ket["re"].as_array().unwrap().len(), 21);
}

#[test]
fn zero_norm_cat_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = catgate(
        &["state", "cat", "--alpha", "0", "--theta", "1.5708", "--phi", "3.1416"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero norm"));
}

#[test]
fn vacuum_wigner_peaks_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&catgate(&["state", "vacuum", "--wigner"], dir.path()));
    let max = v["wigner_max"].as_f64().unwrap();
    assert!((max - std::f64::consts::FRAC_1_PI).abs() < 1e-12);

    let mut rdr = csv::Reader::from_path(dir.path().join("vacuum_wigner.csv")).unwrap();
    let (mut best, mut at) = (f64::MIN, (1.0, 1.0));
    for row in rdr.records() {
        let row = row.unwrap();
        let (x, p, w): (f64, f64, f64) = (
            row[0].parse().unwrap(),
            row[1].parse().unwrap(),
            row[2].parse().unwrap(),
        );
        if w > best {
            best = w;
            at = (x, p);
        }
    }
    assert_eq!(at, (0.0, 0.0));
}

#[test]
fn exit_codes_separate_config_from_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_t = catgate(&["state", "vacuum", "--T", "1.5"], dir.path());
    assert_eq!(bad_t.status.code(), Some(2));
    let unknown = catgate(&["figures", "fig9"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    let truncated = catgate(&["state", "coherent", "--alpha", "9"], dir.path());
    assert_eq!(truncated.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&truncated.stderr).contains("cutoff 20 too small"));
}

#[test]
fn config_file_then_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "xi = 1.0\nalpha = 0.92\n").unwrap();
    let from_file = stdout_json(&catgate(
        &[
            "entangled-fidelity",
            "--config",
            cfg.to_str().unwrap(),
            "--cutoff",
            "30",
        ],
        dir.path(),
    ));
    let overridden = stdout_json(&catgate(
        &[
            "entangled-fidelity",
            "--config",
            cfg.to_str().unwrap(),
            "--cutoff",
            "30",
            "--xi",
            "0.83",
        ],
        dir.path(),
    ));
    let (f1, f083) = (
        from_file["fidelity"].as_f64().unwrap(),
        overridden["fidelity"].as_f64().unwrap(),
    );
    assert!((f083 - 0.7824).abs() < 1e-3, "{f083}");
    assert!(f1 > f083);

    std::fs::write(&cfg, "xii = 1.0\n").unwrap();
    let typo = catgate(&["entangled-fidelity", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(typo.status.code(), Some(2));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_catgate"))
        .args(["state", "vacuum"])
        .env("CATGATE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("vacuum.json").exists());
}

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["pipeline", "--seed", "11", "--cutoff", "16"];
    let ra = stdout_json(&catgate(&args, a.path()));
    stdout_json(&catgate(&args, b.path()));
    let xi = ra["xi"].as_f64().unwrap();
    assert!((xi - 0.83).abs() < 0.03, "{xi}");
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 11);
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&catgate(
        &["simulate-homodyne", "source", "--name", "src", "--seed", "5"],
        dir.path(),
    ));
    stdout_json(&catgate(
        &["simulate-homodyne", "subtracted", "--name", "sub", "--seed", "6"],
        dir.path(),
    ));
    let src = dir.path().join("src_quadratures.csv");
    let sub = dir.path().join("sub_quadratures.csv");
    let fit = stdout_json(&catgate(
        &["fit", src.to_str().unwrap(), sub.to_str().unwrap()],
        dir.path(),
    ));
    assert!((fit["s"].as_f64().unwrap() - 0.55).abs() < 0.02);
    assert!((fit["xi"].as_f64().unwrap() - 0.83).abs() < 0.03);

    let tomo = stdout_json(&catgate(&["tomo", src.to_str().unwrap(), "--cutoff", "12"], dir.path()));
    assert!(tomo["purity"].as_f64().unwrap() > 0.95);
    let rec = dir.path().join("reconstruction.json");
    stdout_json(&catgate(
        &["simulate-homodyne", "--input", rec.to_str().unwrap(), "--name", "re"],
        dir.path(),
    ));
}

#[test]
fn figure_data_for_adequacy_and_purity_curves() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&catgate(&["figures", "fig5"], dir.path()));
    stdout_json(&catgate(&["figures", "fig4"], dir.path()));
    let lookup = |file: &str, x: &str| -> f64 {
        let mut rdr = csv::Reader::from_path(dir.path().join(file)).unwrap();
        let row = rdr
            .records()
            .map(|r| r.unwrap())
            .find(|r| &r[0] == x)
            .expect("row present");
        row[1].parse().unwrap()
    };
    assert!((lookup("fig5.csv", "0.92") - 0.967).abs() < 5e-4);
    assert!((lookup("fig4.csv", "0.83") - 0.78).abs() < 0.05);
}
