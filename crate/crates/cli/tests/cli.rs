use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetero-dp"))
        .args(args)
        .env_remove("HETERO_DP_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &[&str] = &["--pool-size", "3000", "--dim", "4", "--fraction", "0.05", "--trials", "4"];

#[test]
fn calibrate_table_marks_out_of_range_rows() {
    let o = run(&["calibrate", "--epsilons", "0.5,1.5", "--deltas", "1e-5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().contains("out of CGM range"));
}

#[test]
fn calibrate_json_has_same_numbers() {
    let o = run(&["calibrate", "--epsilons", "0.5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &v[0];
    let table = stdout(&run(&["calibrate", "--epsilons", "0.5"]));
    let cols: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(cols[3].parse::<f64>().unwrap(), row["sigma_agm"].as_f64().unwrap());
    assert_eq!(cols[4].parse::<f64>().unwrap(), row["sigma_cgm"].as_f64().unwrap());
    assert!(row["ratio"].as_f64().unwrap() < 1.0);
}

#[test]
fn bad_flags_exit_with_usage_code() {
    assert_eq!(run(&["calibrate", "--deltas", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["calibrate", "--epsilons", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["measure", "--format", "idx"]).status.code(), Some(2));
    assert_eq!(run(&["experiment", "--profiles", "balanced-10,balanced-10"]).status.code(), Some(2));
    assert_eq!(run(&["compare-heterogeneity", "--profiles", "balanced-10"]).status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let o = run(&["measure", "--format", "idx", "--data", "/nonexistent/hetero-dp"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn measure_reports_statistics() {
    let o = run(&["measure", "--pool-size", "500", "--dim", "3", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 500);
    let i2 = v["i_squared"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&i2));
}

#[test]
fn measure_reads_idx_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = Vec::new();
    for v in [0x0803u32, 3, 1, 2] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(&[0, 255, 255, 0, 51, 51]);
    let mut lab = Vec::new();
    for v in [0x0801u32, 3] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(&[0, 1, 1]);
    std::fs::write(dir.path().join("train-images-idx3-ubyte"), img).unwrap();
    std::fs::write(dir.path().join("train-labels-idx1-ubyte"), lab).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hetero-dp"))
        .args(["measure", "--format", "idx", "--dim", "2", "--json"])
        .env("HETERO_DP_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // mean (0.4, 0.4); squared deviations 0.16+0.36, 0.36+0.16, 0.04+0.04.
    assert!((v["dispersion"].as_f64().unwrap() - 1.12 / 3.0).abs() < 1e-12);
}

#[test]
fn zero_noise_experiment_writes_csv_plan_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let svg = dir.path().join("charts");
    let mut args = vec!["experiment", "--zero-noise", "--epsilons", "0.5,2", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--svg", svg.to_str().unwrap()]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = hetero_dp::experiment::read_csv(&out).unwrap();
    assert_eq!(rows.len(), 3 * 6 * 2);
    assert!(rows.iter().all(|r| r.emse == 0.0 && r.tmse == 0.0 && r.cmse == 0.0));
    let plan = hetero_dp::experiment::ExperimentPlan::read_json(dir.path().join("run.plan.json")).unwrap();
    assert!(plan.zero_noise);
    assert_eq!(std::fs::read_dir(svg).unwrap().count(), 3);
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let mut args = vec!["experiment", "--seed", "9", "--epsilons", "1", "--out", p.to_str().unwrap()];
        args.extend_from_slice(SMALL);
        assert_eq!(run(&args).status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn comparison_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let mut args = vec![
        "compare-heterogeneity",
        "--fixed",
        "--profiles",
        "balanced-2,skewed-2",
        "--out",
        out.to_str().unwrap(),
        "--json",
    ];
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // One balance pair, three statistics, two mechanisms.
    assert_eq!(v.as_array().unwrap().len(), 6);
    assert!(std::fs::read_to_string(out).unwrap().lines().count() == 7);
}
