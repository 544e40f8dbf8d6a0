use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_overlap-witness"));
    c.env_remove("OVERLAP_WITNESS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    run(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn evaluate_pentagon_states_file() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), &["states", "--set", "pentagon"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let states = tmp.path().join("pentagon.json");
    let out = tmp.path().join("eval");
    let o = run_in(
        &out,
        &["evaluate", "--input", states.to_str().unwrap(), "--inequality", "h_mzi"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("evaluate.json"));
    let v = r["verdict"]["value"].as_f64().unwrap();
    assert!((v - 5.0 * 5f64.sqrt() / 4.0).abs() < 1e-9);
    assert_eq!(r["verdict"]["coherence_witnessed"], true);
    assert_eq!(r["verdict"]["min_dimension"], 2);
}

#[test]
fn evaluate_overlap_matrix_and_qutrit_set() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("r.json");
    // Pentagon overlaps: 1/2 (1 + cos(2 pi k / 5)) for nodes k apart.
    let r = |k: usize| 0.5 * (1.0 + (2.0 * std::f64::consts::PI * k as f64 / 5.0).cos());
    let m: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        r((i as i64 - j as i64).unsigned_abs() as usize)
                    }
                })
                .collect()
        })
        .collect();
    fs::write(&input, serde_json::json!({ "matrix": m }).to_string()).unwrap();
    let out = tmp.path().join("a");
    let o = run_in(
        &out,
        &[
            "evaluate",
            "--input",
            input.to_str().unwrap(),
            "--inequality",
            "h_mzi",
            "--format",
            "csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("evaluate.csv")).unwrap();
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("value,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 2.795).abs() < 1e-3);
    assert!(out.join("overlaps.csv").exists());

    let out = tmp.path().join("b");
    let o = run_in(&out, &["evaluate", "--set", "h4-qutrit", "--inequality", "h4"]);
    assert_eq!(code(&o), 0);
    let r = json(&out.join("evaluate.json"));
    assert!((r["verdict"]["value"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-9);
    assert_eq!(r["verdict"]["min_dimension"], 3);
}

#[test]
fn malformed_input_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"foo\": 1}").unwrap();
    let o = run_in(tmp.path(), &["evaluate", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(
        code(&run_in(tmp.path(), &["evaluate", "--input", bad.to_str().unwrap()])),
        2
    );
    // Non-normalized state.
    fs::write(&bad, "{\"states\": [{\"amplitudes\": [[1.0, 0.0], [1.0, 0.0]]}]}").unwrap();
    assert_eq!(
        code(&run_in(tmp.path(), &["evaluate", "--input", bad.to_str().unwrap()])),
        2
    );
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run_in(tmp.path(), &["interrogation", "--r", "1.5"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["sample", "--inequality", "nonsense"])), 2);
    assert_eq!(
        code(&run_in(tmp.path(), &["--threads", "0", "sample", "--trials", "10"])),
        2
    );
    assert_eq!(code(&run(&["no-such-command"])), 2);
    // No contextual advantage at 60 degrees: the crossover does not exist.
    let o = run_in(tmp.path(), &["interrogation", "--theta", "60deg"]);
    assert_eq!(code(&o), 3);
    assert_eq!(
        code(&run_in(
            tmp.path(),
            &["interrogation", "--theta", "60deg", "--allow-no-gap"]
        )),
        0
    );
}

#[test]
fn interrogation_table_rows() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(
        tmp.path(),
        &["interrogation", "--theta", "150deg", "--nu", "0,0.112,0.333"],
    );
    assert_eq!(code(&o), 0);
    let r = json(&tmp.path().join("interrogation.json"));
    assert!((r["eta_ideal"].as_f64().unwrap() - 0.428571).abs() < 1e-6);
    assert!((r["crossover_nu"].as_f64().unwrap() - 0.057).abs() < 1e-3);
    assert!((r["crossover_efficiency"].as_f64().unwrap() - 0.419385).abs() < 1e-4);
    let rows = r["robustness"].as_array().unwrap();
    let worst: Vec<f64> = rows.iter().map(|x| x["worst_case"].as_f64().unwrap()).collect();
    for (w, expected) in worst.iter().zip([0.285714, 0.410757, 0.379353]) {
        assert!((w - expected).abs() < 1e-4, "{w} vs {expected}");
    }
    assert!((rows[0]["h3_robust"].as_f64().unwrap() - 1.25).abs() < 1e-12);
    // Without mismatch or dark counts the efficiency band collapses onto the ideal curve.
    for row in r["efficiency"].as_array().unwrap() {
        if let Some(p) = row["eta_plus"].as_f64() {
            assert!((p - row["eta_ideal"].as_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn sample_is_deterministic_across_threads_and_replays() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = [
        "--seed",
        "42",
        "--trials",
        "3000",
        "sample",
        "--inequality",
        "h6",
        "--d",
        "4",
    ];
    let mut all = vec!["--out-dir", a.to_str().unwrap()];
    all.extend_from_slice(&args);
    let o = bin().args(&all).env("OVERLAP_WITNESS_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    let mut all = vec!["--out-dir", b.to_str().unwrap()];
    all.extend_from_slice(&args);
    let o = bin().args(&all).env("OVERLAP_WITNESS_THREADS", "4").output().unwrap();
    assert_eq!(code(&o), 0);
    let sa = fs::read(a.join("sample.json")).unwrap();
    assert_eq!(sa, fs::read(b.join("sample.json")).unwrap());
    assert_eq!(
        fs::read(a.join("histogram.csv")).unwrap(),
        fs::read(b.join("histogram.csv")).unwrap()
    );

    let report: Value = serde_json::from_slice(&sa).unwrap();
    assert_eq!(report["violation_count"], 0);
    let hist = fs::read_to_string(a.join("histogram.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 3000);

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "sample");
    assert_eq!(manifest["seed"], 42);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    let c = tmp.path().join("c");
    let o = run(&[
        "replay",
        a.join("manifest.json").to_str().unwrap(),
        "--into",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(sa, fs::read(c.join("sample.json")).unwrap());
}

#[test]
fn sample_in_one_dimension_is_degenerate() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(
        tmp.path(),
        &["--trials", "50", "sample", "--inequality", "h6", "--d", "1"],
    );
    assert_eq!(code(&o), 0);
    let r = json(&tmp.path().join("sample.json"));
    for v in r["values"].as_array().unwrap() {
        assert!((v.as_f64().unwrap() + 5.0).abs() < 1e-12);
    }
}

#[test]
fn table_csv_shape() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(
        tmp.path(),
        &[
            "--restarts",
            "20",
            "--format",
            "csv",
            "table",
            "--n-max",
            "5",
            "--d-max",
            "4",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "inequality,d=2,d=3,d=4");
    let h4: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(h4[0], "h4");
    assert!((h4[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-3);
    assert!((h4[2].parse::<f64>().unwrap() - 4.0 / 3.0).abs() < 1e-3);
    let cells = fs::read_to_string(tmp.path().join("table_cells.csv")).unwrap();
    assert!(cells.lines().skip(1).all(|l| !l.contains(",false,")));
}

#[test]
fn mesh_roundtrip_through_files() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("d");
    let o = run_in(&d, &["--seed", "5", "mesh", "decompose", "--haar", "6"]);
    assert_eq!(code(&o), 0);
    let report = json(&d.join("decompose.json"));
    assert!(report["roundtrip_error"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["config"]["cells"].as_array().unwrap().len(), 15);
    // The bare configuration is written alongside and composes directly.
    let config = d.join("mesh_config.json");
    assert_eq!(json(&config), report["config"]);
    let c = tmp.path().join("c");
    let o = run_in(&c, &["mesh", "compose", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let u = json(&c.join("unitary.json"));
    let unitary = tmp.path().join("u.json");
    fs::write(&unitary, u.to_string()).unwrap();
    let o = run_in(
        &tmp.path().join("e"),
        &["mesh", "decompose", "--unitary", unitary.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);

    // A cell off the rectangular layout is rejected.
    let mut broken = report["config"].clone();
    broken["cells"][0]["column"] = Value::from(1);
    let broken_path = tmp.path().join("broken.json");
    fs::write(&broken_path, broken.to_string()).unwrap();
    assert_eq!(
        code(&run_in(
            &c,
            &["mesh", "compose", "--config", broken_path.to_str().unwrap()]
        )),
        2
    );
}

#[test]
fn mesh_calibration_and_fidelity() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), &["--seed", "3", "mesh", "calibrate", "--synthetic", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("calibration.json"));
    assert!(r["recovery"]["theta0"].as_f64().unwrap() < 1e-3);
    assert!(r["recovery"]["alpha"].as_f64().unwrap() < 1e-3);
    assert!(r["recovery"]["beta"].as_f64().unwrap() < 1e-2);

    // Re-fit from the written sweep file.
    let again = tmp.path().join("again");
    let sweeps = tmp.path().join("sweeps.csv");
    let o = run_in(
        &again,
        &[
            "mesh",
            "calibrate",
            "--sweeps",
            sweeps.to_str().unwrap(),
            "--modes",
            "4",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&again.join("calibration.json"))["model"], r["model"]);

    let f = tmp.path().join("f");
    let o = run_in(&f, &["--trials", "10", "mesh", "fidelity"]);
    assert_eq!(code(&o), 0);
    let mean = json(&f.join("fidelity.json"))["mean"].as_f64().unwrap();
    assert!(mean > 0.98 && mean < 1.0);
}

#[test]
fn mesh_count_simulation() {
    let tmp = TempDir::new().unwrap();
    let o = run_in(tmp.path(), &["--seed", "9", "mesh", "simulate", "--set", "pentagon"]);
    assert_eq!(code(&o), 0);
    let r = json(&tmp.path().join("simulate.json"));
    let est = r["estimate"].as_f64().unwrap();
    let sigma = r["sigma"].as_f64().unwrap();
    assert!((est - 5.0 * 5f64.sqrt() / 4.0).abs() < 3.0 * sigma);
}
