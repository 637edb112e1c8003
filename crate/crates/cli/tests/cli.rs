use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fades(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fades"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn fades")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_grid_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = fades(
        &[
            "run",
            "--shape",
            "64,64,64",
            "--sparsity",
            "0,0.9",
            "--pes",
            "8,32",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("r/run.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["all_match"], true);
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells
        .iter()
        .all(|c| c["match"] == true && c["modeled_cycles"].is_number()));
    let csv = std::fs::read_to_string(dir.path().join("r/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("r/timing.json").exists());
}

#[test]
fn scaled_transposed_and_float_cells() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [
        &[
            "--scale",
            "--trans",
            "--zero-point",
            "-7",
            "--cores",
            "1,4",
            "--pr",
            "2",
        ][..],
        &["--precision", "f32", "--scale", "--cores", "4"][..],
    ] {
        let mut args = vec![
            "run",
            "--shape",
            "37,53,41",
            "--sparsity",
            "0,0.5",
            "--pes",
            "8",
            "--out",
            "r",
        ];
        args.extend_from_slice(extra);
        let out = fades(&args, dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&dir.path().join("r/run.json"))["all_match"], true);
    }
}

#[test]
fn degenerate_shape_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fades(&["run", "--shape", "64,0,64"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = fades(&["run", "--shape", "64,64"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = fades(&["run", "--pes", "24"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mobilenet_layer_tiling() {
    let dir = tempfile::tempdir().unwrap();
    let out = fades(
        &[
            "run",
            "--shape",
            "1024,1024,49",
            "--pes",
            "32",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let cell = &json(&dir.path().join("r/run.json"))["cells"][0];
    assert_eq!(cell["tiles"], 2);
    assert_eq!(cell["last_tile_width"], 17);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--shape",
        "30,40,50",
        "--sparsity",
        "0.7",
        "--seed",
        "9",
        "--repeat",
        "2",
        "--out",
        "r",
    ];
    let read = |f: &str| std::fs::read(dir.path().join("r").join(f)).unwrap();
    assert!(fades(&args, dir.path()).status.success());
    let first = [read("run.json"), read("run.csv")];
    assert!(fades(&args, dir.path()).status.success());
    assert_eq!(first, [read("run.json"), read("run.csv")]);
}

#[test]
fn spec_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"shape": [16, 24, 20], "precision": "int8", "sparsities": [0.0, 0.5],
        "configs": [{"cores": 2, "pes": 4}], "seed": 3, "out": "s"}"#;
    std::fs::write(dir.path().join("spec.json"), spec).unwrap();
    let out = fades(&["run", "--spec", "spec.json", "--seed", "4"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("s/run.json"));
    assert_eq!(report["spec"]["seed"], 4);
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);
    std::fs::write(dir.path().join("bad.json"), r#"{"shape": [1,1,1]}"#).unwrap();
    assert_eq!(
        fades(&["run", "--spec", "bad.json"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn matrix_files_round_trip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &[
            "gen",
            "--rows",
            "20",
            "--cols",
            "33",
            "--sparsity",
            "0.8",
            "--seed",
            "2",
            "--csr",
            "-o",
            "a.bin",
        ][..],
        &[
            "gen", "--rows", "33", "--cols", "9", "--seed", "3", "-o", "b.bin",
        ][..],
    ] {
        assert!(fades(args, d).status.success());
    }
    let out = fades(
        &[
            "run", "--a-file", "a.bin", "--b-file", "b.bin", "--pes", "4", "--out", "r",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cell = &json(&d.join("r/run.json"))["cells"][0];
    assert_eq!(cell["a_repr"], "csr");
    assert_eq!(
        (cell["n"].as_u64(), cell["m"].as_u64(), cell["p"].as_u64()),
        (Some(20), Some(33), Some(9))
    );
    assert_eq!(
        fades(&["run", "--a-file", "missing.bin", "--b-file", "b.bin"], d)
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_reproduces_model_trends() {
    let dir = tempfile::tempdir().unwrap();
    let out = fades(
        &[
            "sweep",
            "--shape",
            "1024,1024,1024",
            "--pes",
            "128,32",
            "--cores",
            "1,4",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let report = json(&dir.path().join("s/sweep.json"));
    let cells = report["cells"].as_array().unwrap();
    let find = |cores: u64, pes: u64, s: f64| {
        cells
            .iter()
            .find(|c| c["cores"] == cores && c["pes"] == pes && c["sparsity"].as_f64() == Some(s))
            .unwrap()
    };
    assert!(find(1, 128, 0.5)["relative_to_dense"].as_f64().unwrap() <= 1.0);
    assert!(find(1, 32, 0.5)["relative_to_dense"].as_f64().unwrap() <= 1.0);
    let t = |c: &Value| c["time_s"].as_f64().unwrap();
    assert!(t(find(1, 128, 0.9)) / t(find(4, 32, 0.9)) >= 1.5);
    let dense = t(find(1, 128, 0.0)) / t(find(4, 32, 0.0));
    assert!((0.9..=1.3).contains(&dense));
    assert_eq!(report["monotone"], true);
}

#[test]
fn reconfig_alternating_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = fades(&["reconfig", "--alternate", "10", "--out", "c"], dir.path());
    assert!(out.status.success());
    let report = json(&dir.path().join("c/reconfig.json"));
    let rows = report["strategies"].as_array().unwrap();
    let total = |s: &str| {
        rows.iter().find(|r| r["strategy"] == s).unwrap()["total_overhead_s"]
            .as_f64()
            .unwrap()
    };
    assert!((total("DFX") - 0.27).abs() < 1e-9);
    assert_eq!(total("VFX"), 0.0);
    assert!((total("FR") - 1.8).abs() < 1e-9);
    assert!(rows.iter().all(|r| r["switches"] == 9));

    std::fs::write(
        dir.path().join("plan.json"),
        r#"{"layers": [{"precision": "int8", "compute_s": 0.5}, {"precision": "float32", "compute_s": 0.5}]}"#,
    )
    .unwrap();
    let out = fades(
        &[
            "reconfig",
            "--plan",
            "plan.json",
            "--format",
            "csv",
            "--out",
            "c",
        ],
        dir.path(),
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("strategy,switches"));
    assert!(csv.contains("DFX,1,0.03"));
    std::fs::write(dir.path().join("bad.json"), "{\"layers\": 3}").unwrap();
    assert_eq!(
        fades(&["reconfig", "--plan", "bad.json"], dir.path())
            .status
            .code(),
        Some(1)
    );
}
