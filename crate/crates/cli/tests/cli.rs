use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn cam(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cam"))
        .arg("--quiet")
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("CAM_REGGE_CONFIG")
        .output()
        .expect("cam runs")
}

fn ok(out: Output) {
    assert!(out.status.success(), "cam failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Columns of a CSV with a header, skipping `#` lines.
fn columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (col, field) in cols.iter_mut().zip(line.split(',')) {
            col.push(field.parse().unwrap_or(f64::NAN));
        }
    }
    (header, cols)
}

fn single_pole_pipeline(dir: &Path, extra: &[&str]) {
    let spec = model("single_pole.json");
    let table = dir.join("table.csv");
    ok(cam(dir, &[extra, &["synth", s(&spec)]].concat()));
    ok(cam(dir, &[extra, &["poles-j", s(&table)]].concat()));
    ok(cam(dir, &[extra, &["track", s(&dir.join("poles_j.csv"))]].concat()));
    let trajs = dir.join("trajectories.csv");
    ok(cam(dir, &[extra, &["decompose", s(&table), "--trajectories", s(&trajs)]].concat()));
}

#[test]
fn synth_then_poles_gives_one_row_per_pole_per_energy() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    ok(cam(dir.path(), &["synth", s(&model("single_pole.json")), "-o", s(&table)]));
    ok(cam(dir.path(), &["poles-j", s(&table)]));
    let (header, cols) = columns(&dir.path().join("poles_j.csv"));
    assert_eq!(header[0], "axis");
    let energies = &cols[1];
    assert_eq!(energies.len(), 52);
    for w in energies.windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn pipeline_residual_is_smooth() {
    let dir = tempfile::tempdir().unwrap();
    single_pole_pipeline(dir.path(), &[]);
    let (header, cols) = columns(&dir.path().join("decomposition.csv"));
    assert_eq!(header, ["E_meV", "sigma_exact", "sigma_back_int", "sigma_res_T1", "residual_I"]);
    let d2 = |v: &[f64]| v.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
    let smooth: Vec<f64> = cols[1].iter().zip(&cols[3]).map(|(a, b)| a - b).collect();
    assert!(d2(&cols[1]) / d2(&smooth) >= 10.0);
    for i in 0..cols[0].len() {
        let rebuilt = cols[2][i] + cols[3][i] + cols[4][i];
        assert!((rebuilt - cols[1][i]).abs() <= 1e-12 * cols[1][i]);
        assert!(cols[4][i].abs() < 0.1 * cols[3].iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let (_, fano) = columns(&dir.path().join("fano.csv"));
    assert_eq!(fano[1], [5.0, 6.0, 7.0, 8.0, 9.0]);
    for width in &fano[3] {
        assert!((width - 0.4).abs() < 1e-9);
    }
}

#[test]
fn decompose_without_trajectories_is_background_only() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    ok(cam(dir.path(), &["synth", s(&model("single_pole.json"))]));
    ok(cam(dir.path(), &["decompose", s(&table)]));
    let (header, cols) = columns(&dir.path().join("decomposition.csv"));
    assert_eq!(header, ["E_meV", "sigma_exact", "sigma_back_int", "residual_I"]);
    for i in 0..cols[0].len() {
        assert_eq!(cols[3][i], cols[1][i] - cols[2][i]);
    }
    let m = manifest(dir.path(), "decompose");
    assert_eq!(m["status"], "ok");
    let warnings = m["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("background-only")));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    single_pole_pipeline(a.path(), &["--jobs", "1"]);
    single_pole_pipeline(b.path(), &["--jobs", "4"]);
    for name in ["table.csv", "poles_j.csv", "trajectories.csv", "decomposition.csv", "fano.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn rotor_model_maps_to_its_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(cam(d, &["synth", s(&model("rotor.json"))]));
    ok(cam(d, &["poles-e", s(&d.join("table.csv"))]));
    ok(cam(d, &["track", s(&d.join("poles_e.csv"))]));
    ok(cam(d, &["map", s(&d.join("ce_trajectories.csv"))]));
    let text = std::fs::read_to_string(d.join("map.json")).unwrap();
    let map: serde_json::Value = serde_json::from_str(&text).unwrap();
    let js = &map["j_shifting"];
    assert!((js["I"]["value"].as_f64().unwrap() - 50.0).abs() < 1e-6);
    assert!((js["E0"]["value"].as_f64().unwrap() - 60.0).abs() < 1e-6);
    assert!((js["tau"]["value"].as_f64().unwrap() - 10.0).abs() < 1e-6);
    let (header, cols) = columns(&d.join("regge_predicted.csv"));
    assert_eq!(header[2], "re_J");
    assert!(cols[2].len() > 100);
}

#[test]
fn missing_input_exits_one_and_still_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = cam(dir.path(), &["poles-j", "no/such/table.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/table.csv"));
    let m = manifest(dir.path(), "poles-j");
    assert_eq!(m["status"], "failed");
    assert_eq!(m["exit_code"], 1);
    assert!(m["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn unknown_config_field_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"tracking": {"radius": 1}}"#).unwrap();
    let out = cam(dir.path(), &["--config", s(&config), "synth", s(&model("rotor.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("table.csv").exists());
}

#[test]
fn degenerate_fit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let ce = dir.path().join("ce.csv");
    std::fs::write(
        &ce,
        "label,J,re_E,im_E,re_residue,im_residue\nA,5,60.1,-0.1,0,0\nA,5,60.2,-0.1,0,0\nA,5,60.3,-0.1,0,0\n",
    )
    .unwrap();
    let out = cam(dir.path(), &["map", s(&ce)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(manifest(dir.path(), "map")["exit_code"], 2);
}

#[test]
fn config_file_supplies_inputs_and_env_fallback_works() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let spec = model("single_pole.json");
    std::fs::write(&config, format!(r#"{{"inputs": {{"spec": {:?}}}}}"#, s(&spec))).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cam"))
        .args(["--quiet", "--out-dir", s(dir.path()), "synth"])
        .env("CAM_REGGE_CONFIG", &config)
        .output()
        .unwrap();
    ok(out);
    assert!(dir.path().join("table.csv").exists());
    let m = manifest(dir.path(), "synth");
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().is_some()));
}
