use std::process::{Command, Output};

fn bqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn bounds_endpoints_for_two() {
    let o = bqc(&["bounds", "--n", "2", "--decoys", "5", "--grid", "11"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (tradeoff, detection) = text.split_once("\n\n").unwrap();
    assert!(tradeoff.starts_with("G,F_bound\n"));
    assert!(detection.starts_with("I,D_bound\n"));
    let t = rows(tradeoff);
    assert_eq!(t.len(), 11);
    assert_eq!(t[0], vec![0.5, 1.0]);
    assert_eq!(t[10], vec![1.0, 0.75]);
}

#[test]
fn bounds_detection_row_at_full_information() {
    let dir = tempfile::tempdir().unwrap();
    let o = bqc(&[
        "bounds",
        "--n",
        "4",
        "--decoys",
        "10",
        "--grid",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let d = rows(&std::fs::read_to_string(dir.path().join("detection.csv")).unwrap());
    assert_eq!(d.len(), 3);
    assert_eq!(d[2][0], 2.0);
    assert!((d[2][1] - (1.0 - 0.625f64.powi(10))).abs() < 1e-15);
    assert_eq!(d[0][1], 0.0);
    let t = std::fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    assert_eq!(t.lines().count(), 4);
}

#[test]
fn bounds_rejects_bad_parameters() {
    assert_eq!(bqc(&["bounds", "--n", "1"]).status.code(), Some(2));
    assert_eq!(bqc(&["bounds", "--n", "3", "--grid", "1"]).status.code(), Some(2));
}

#[test]
fn simulate_measure_resend_matches_the_endpoint() {
    let o = bqc(&[
        "simulate",
        "--variant",
        "noninteractive",
        "--attack",
        "measure-resend",
        "--n",
        "2",
        "--decoys",
        "5",
        "--trials",
        "100000",
        "--seed",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let d = v["stats"]["detection"]["mean"].as_f64().unwrap();
    let se = v["stats"]["detection"]["se"].as_f64().unwrap();
    assert!((d - (1.0 - 0.75f64.powi(5))).abs() < 4.0 * se);
    assert_eq!(v["config"]["variant"], "noninteractive");
    assert_eq!(v["config"]["stop_on_detect"], false);
    assert_eq!(v["config"]["attack"]["name"], "measure-resend");
    assert_eq!(v["attack_report"]["g"], 1.0);
    assert_eq!(v["bound_check"]["pass"], true);
}

#[test]
fn simulate_honest_and_blind_guess() {
    for attack in ["honest", "blind-guess"] {
        let o = bqc(&["simulate", "--attack", attack, "--trials", "2000", "--n", "4"]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["stats"]["detection"]["mean"], 0.0);
        let g = v["stats"]["guess_success"]["mean"].as_f64().unwrap();
        let se = v["stats"]["guess_success"]["se"].as_f64().unwrap();
        assert!((g - 0.25).abs() < 4.0 * se);
    }
}

#[test]
fn simulate_writes_to_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let args = |p: &str| {
        vec![
            "simulate".to_string(),
            "--attack".into(),
            "entangling-probe".into(),
            "--coupling".into(),
            "random".into(),
            "--n".into(),
            "2".into(),
            "--ancilla-digits".into(),
            "3".into(),
            "--trials".into(),
            "3000".into(),
            "--seed".into(),
            "4".into(),
            "--out".into(),
            p.to_string(),
        ]
    };
    let first = Command::new(env!("CARGO_BIN_EXE_bqc"))
        .args(args(path.to_str().unwrap()))
        .output()
        .unwrap();
    assert!(first.status.code().is_some_and(|c| c <= 1));
    let a = std::fs::read(&path).unwrap();
    let second = dir.path().join("again.json");
    Command::new(env!("CARGO_BIN_EXE_bqc"))
        .args(args(second.to_str().unwrap()))
        .output()
        .unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(v["attack_report"].is_null());
    assert!(v["bound_check"]["per_round"].is_null());
}

#[test]
fn simulate_rejects_unknown_names() {
    assert_eq!(bqc(&["simulate", "--attack", "wiretap"]).status.code(), Some(2));
    assert_eq!(bqc(&["simulate", "--rvf", "sudoku"]).status.code(), Some(2));
    assert_eq!(bqc(&["simulate", "--attack", "partial-measure", "--strength", "2"]).status.code(), Some(2));
    assert_eq!(bqc(&["simulate", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn optimize_rows_stay_below_the_curve() {
    let o = bqc(&["optimize", "--n", "3", "--grid", "4", "--budget", "4000", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("G_target,G_achieved,F_achieved,F_bound,gap\n"));
    let r = rows(&text);
    assert_eq!(r.len(), 4);
    for row in &r {
        assert!(row[2] <= row[3] + 1e-9);
        assert!((row[0] - row[1]).abs() <= 1e-3);
    }
    assert!(r[0][4] <= 1e-6);
    assert!(r[3][4] <= 1e-3);
}

#[test]
fn optimize_rejects_large_dimensions() {
    assert_eq!(bqc(&["optimize", "--n", "5"]).status.code(), Some(2));
    assert_eq!(bqc(&["optimize", "--n", "2", "--g-targets", "0.1"]).status.code(), Some(2));
}

#[test]
fn circular_check_reports_all_passes() {
    let o = bqc(&["lemma-check", "--trials", "2000", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass_count"], 2000);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert!(v["worst_margin"].as_f64().unwrap() >= -1e-12);
}

#[test]
fn rvf_graph_pairs_verify() {
    let o = bqc(&["rvf", "--instance", "graph-iso", "--vertices", "5", "--edges", "4", "--count", "3", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["instance"], "graph_iso");
        assert_eq!(v["verified"], true);
        assert_eq!(v["output"].as_array().unwrap().len(), 5);
        assert_eq!(v["input"]["g0"].as_array().unwrap().len(), 4);
    }
    assert_eq!(bqc(&["rvf", "--instance", "graph-iso", "--vertices", "9"]).status.code(), Some(2));
}
