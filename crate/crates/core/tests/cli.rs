use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vfedpca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfedpca"))
        .args(args)
        .env_remove("VFED_LOG")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn federated_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = vfedpca(&[
        "federated",
        "--synth",
        "single",
        "--n",
        "40",
        "--m",
        "60",
        "--p",
        "5",
        "--rounds",
        "4",
        "--local-iters",
        "10",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "# standardize=false");
    assert_eq!(
        lines[1],
        "round,distance_error,scalars_sent,weight_0,weight_1,weight_2,weight_3,weight_4"
    );
    assert!(lines[2].starts_with("0,") && lines[2].contains(&format!(",{},", 5 * 41 + 5 * 40)));
    assert_eq!(
        fs::read_to_string(out.join("timing.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    assert_eq!(
        fs::read_to_string(out.join("vector.csv"))
            .unwrap()
            .lines()
            .count(),
        40
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 4);
    assert_eq!(summary["total_scalars_sent"], 4 * 405);
    assert_eq!(summary["spec"]["tol"], 1e-9);
    assert_eq!(summary["spec"]["merge"], "plain");
    assert!(summary["spec"].get("out").is_none());
}

#[test]
fn single_client_csv_run_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    let o = vfedpca(&[
        "synth",
        "--synth",
        "mixture",
        "--n",
        "25",
        "--m",
        "8",
        "--seed",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::rename(dir.path().join("data.csv"), &csv).unwrap();
    let out = dir.path().join("run");
    let o = vfedpca(&[
        "federated",
        "--data",
        s(&csv),
        "--p",
        "1",
        "--rounds",
        "2",
        "--local-iters",
        "5000",
        "--tol",
        "1e-14",
        "--warm-start",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["final_distance_error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!(
            r#"{{"synth": "single", "n": 12, "m": 9, "p": 3, "rounds": 6, "topology": "ring", "out": "{}"}}"#,
            s(&out)
        ),
    )
    .unwrap();
    let o = vfedpca(&["federated", "--config", s(&cfg), "--rounds", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["spec"]["rounds"], 2);
    assert_eq!(summary["spec"]["p"], 3);
    assert_eq!(summary["protocol"], "decentralized");
    assert_eq!(summary["total_scalars_sent"], 2 * 6 * 13);
}

#[test]
fn spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cases: Vec<Vec<&str>> = vec![
        vec!["federated", "--out", s(&out)],
        vec![
            "federated",
            "--synth",
            "single",
            "--rounds",
            "0",
            "--out",
            s(&out),
        ],
        vec![
            "federated",
            "--synth",
            "single",
            "--hub",
            "1",
            "--out",
            s(&out),
        ],
        vec![
            "federated",
            "--synth",
            "single",
            "--n",
            "5",
            "--m",
            "3",
            "--p",
            "4",
            "--out",
            s(&out),
        ],
        vec![
            "federated",
            "--synth",
            "single",
            "--kernel",
            "rbf",
            "--out",
            s(&out),
        ],
        vec![
            "federated",
            "--synth",
            "single",
            "--merge",
            "fancy",
            "--out",
            s(&out),
        ],
        vec!["federated", "--synth", "single"],
    ];
    for args in cases {
        let o = vfedpca(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = vfedpca(&[
        "federated",
        "--synth",
        "single",
        "--rounds",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(stderr(&o).contains("rounds"));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"rounds": 2, "colour": "red"}"#).unwrap();
    let o = vfedpca(&["federated", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = vfedpca(&[
        "federated",
        "--data",
        s(&dir.path().join("none.csv")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let ragged = dir.path().join("r.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let o = vfedpca(&[
        "federated",
        "--data",
        s(&ragged),
        "--p",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn baseline_pca_on_diagonal_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(&csv, "2,0\n0,1\n").unwrap();
    let o = vfedpca(&[
        "baseline",
        "--kind",
        "pca",
        "--k",
        "1",
        "--data",
        s(&csv),
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!((summary["eigenvalues"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let comps = fs::read_to_string(dir.path().join("components.csv")).unwrap();
    let v: Vec<f64> = comps.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12, "{comps}");
}

#[test]
fn baseline_akpca_and_kpca_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = vfedpca(&[
        "baseline",
        "--kind",
        "akpca",
        "--k",
        "6",
        "--kernel",
        "linear",
        "--synth",
        "single",
        "--n",
        "6",
        "--m",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let z = fs::read_to_string(dir.path().join("components.csv")).unwrap();
    assert_eq!(z.lines().count(), 1 + 6);
    assert!(z.lines().skip(1).all(|l| l.split(',').count() == 4));

    let kp = dir.path().join("kp");
    let o = vfedpca(&[
        "baseline",
        "--kind",
        "kpca",
        "--k",
        "2",
        "--kernel",
        "rbf",
        "--gamma",
        "0.5",
        "--synth",
        "mixture",
        "--n",
        "10",
        "--m",
        "3",
        "--out",
        s(&kp),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(kp.join("components.csv"))
            .unwrap()
            .lines()
            .count(),
        11
    );
}

#[test]
fn kpca_with_indefinite_sigmoid_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    fs::write(&csv, "1,2\n").unwrap();
    let o = vfedpca(&[
        "baseline",
        "--kind",
        "kpca",
        "--kernel",
        "sigmoid",
        "--gamma",
        "1",
        "--c",
        "0",
        "--data",
        s(&csv),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("indefinite kernel for KPCA"));
}

#[test]
fn synth_to_stdout_is_reproducible() {
    let a = vfedpca(&["synth", "--n", "3", "--m", "4", "--seed", "9"]);
    let b = vfedpca(&["synth", "--n", "3", "--m", "4", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.split(',').count() == 4));
}

#[test]
fn pgm_directory_source_and_logging() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/shapes");
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vfedpca"))
        .args([
            "federated",
            "--data",
            s(&data),
            "--standardize",
            "--p",
            "4",
            "--topology",
            "star",
            "--hub",
            "2",
            "--mode",
            "akpca",
            "--kernel",
            "rbf",
            "--rounds",
            "3",
            "--out",
            s(dir.path()),
        ])
        .env("VFED_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("round 2"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["samples"], 12);
    assert_eq!(summary["features"], 256);
    assert!(summary["spec"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn shuffled_features_change_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "federated",
            "--synth",
            "mixture",
            "--n",
            "20",
            "--m",
            "12",
            "--p",
            "3",
            "--rounds",
            "1",
            "--local-iters",
            "3",
            "--standardize",
            "--out",
        ];
        args.push(s(&out));
        args.extend(extra);
        let o = vfedpca(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
        assert!(trace.starts_with("# standardize=true\n"));
        serde_json::from_str::<serde_json::Value>(
            &fs::read_to_string(out.join("summary.json")).unwrap(),
        )
        .unwrap()
    };
    let plain = run("plain", &[]);
    let shuffled = run("shuffled", &["--shuffle-features"]);
    assert_eq!(plain["spec"]["shuffle_features"], false);
    assert_eq!(shuffled["spec"]["shuffle_features"], true);
    assert_ne!(
        plain["final_distance_error"],
        shuffled["final_distance_error"]
    );
}
