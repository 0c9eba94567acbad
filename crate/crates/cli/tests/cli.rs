use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TOY1: &str = r#"{"scheme": {"front_loaded": [{"1": "1"}]}, "a_rule": {"explicit": [2]}}"#;

fn readspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readspace"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy1.json"), TOY1).unwrap();
    fs::write(
        dir.path().join("canonical.json"),
        r#"{"scheme": "canonical", "a_rule": "minimal"}"#,
    )
    .unwrap();
    fs::write(dir.path().join("ones.json"), r#"{"1": "1", "2": "1"}"#).unwrap();
    fs::write(dir.path().join("e1.json"), r#"{"1": "1"}"#).unwrap();
    fs::write(
        dir.path().join("points.json"),
        r#"[{"1": "1", "2": "1"}, {"1": "8/9", "2": "-8/9"}]"#,
    )
    .unwrap();
    dir
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn lur_witness_writes_report_and_csv() {
    let dir = setup();
    let out = readspace(
        dir.path(),
        &[
            "lur-witness",
            "--config",
            "toy1.json",
            "--x",
            "ones.json",
            "--rho",
            "1/3",
            "--m",
            "3..50",
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/001_lur_witness.csv")).unwrap();
    assert_eq!(csv.lines().count(), 49);
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[1..3], &["2", "2"]);
        assert!(cols[3].starts_with("0.333333") && cols[3] == cols[4]);
    }
    let report = fs::read_to_string(dir.path().join("o/report.json")).unwrap();
    let first = report.clone();
    readspace(
        dir.path(),
        &[
            "lur-witness",
            "--config",
            "toy1.json",
            "--x",
            "ones.json",
            "--rho",
            "1/3",
            "--m",
            "3..50",
            "--out",
            "o",
        ],
    );
    assert_eq!(fs::read_to_string(dir.path().join("o/report.json")).unwrap(), first);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["schema_version"], "1.0.0");
    assert_eq!(v["construction"]["a_rule"]["explicit"][0], 2);
}

#[test]
fn precondition_violation_exits_2() {
    let dir = setup();
    let out = readspace(
        dir.path(),
        &[
            "roughness-witness",
            "--config",
            "toy1.json",
            "--f",
            "e1.json",
            "--lambda",
            "3/5",
            "--delta",
            "3/5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda * delta"));
    let out = readspace(dir.path(), &["norm", "--config", "missing.json", "--vec", "e1.json"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("bad.json"), "{").unwrap();
    let out = readspace(dir.path(), &["run", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    let dir = setup();
    fs::write(dir.path().join("y.json"), r#"{"1": "-1"}"#).unwrap();
    let out = readspace(
        dir.path(),
        &[
            "wlur-probe",
            "--config",
            "toy1.json",
            "--x",
            "ones.json",
            "--y",
            "y.json",
            "--m",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("equalities_as_expected"));
    let out = readspace(
        dir.path(),
        &[
            "wlur-probe",
            "--config",
            "toy1.json",
            "--x",
            "ones.json",
            "--y",
            "y.json",
            "--m",
            "3",
            "--control",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn construct_prints_term_table() {
    let dir = setup();
    let out = readspace(dir.path(), &["construct", "--config", "canonical.json", "--terms", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "n,a_n,r_n,v_n");
    assert!(lines[1].starts_with("1,2,"));
}

#[test]
fn norm_and_dual_norm_on_toy1() {
    let dir = setup();
    let out = readspace(
        dir.path(),
        &["norm", "--config", "toy1.json", "--vec", "e1.json", "--eps", "1e-6"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let iv = &v["records"][0]["result"]["interval"];
    assert_eq!(iv["lo"], iv["hi"]);
    assert_eq!(iv["lo"]["m"], "17/1");
    assert_eq!(iv["lo"]["e2"], -4);
    let out = readspace(
        dir.path(),
        &["dualnorm", "--config", "toy1.json", "--vec", "e1.json", "--terms", "1"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["records"][0]["result"]["value"], "1/1");
}

#[test]
fn lp_solve_reports_certificates() {
    let dir = setup();
    fs::write(
        dir.path().join("lp.json"),
        r#"{"sense": "min", "objective": ["1"], "vars": ["nonneg"],
            "constraints": [{"row": ["1"], "relation": "<=", "rhs": "0"}, {"row": ["1"], "relation": ">=", "rhs": "1"}]}"#,
    )
    .unwrap();
    let out = readspace(dir.path(), &["lp", "solve", "lp.json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["records"][0]["result"]["status"], "infeasible");
}

#[test]
fn renorm_subcommands() {
    let dir = setup();
    for sub in ["dual", "gauge", "check-additivity", "check-na"] {
        let vec = if sub == "gauge" { "ones.json" } else { "e1.json" };
        let out = readspace(
            dir.path(),
            &[
                "renorm-smooth",
                sub,
                "--config",
                "toy1.json",
                "--points",
                "points.json",
                "--vec",
                vec,
                "--terms",
                "1",
            ],
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn other_geometry_subcommands() {
    let dir = setup();
    fs::write(dir.path().join("xs.json"), r#"{"1": "32/35", "2": "-16/35"}"#).unwrap();
    fs::write(dir.path().join("ys.json"), r#"{"1": "-16/35", "2": "32/35"}"#).unwrap();
    fs::write(dir.path().join("tail.json"), r#"{"1": "2", "tail": "1", "horizon": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "certify-strict-convexity",
            "--config",
            "toy1.json",
            "--x",
            "xs.json",
            "--y",
            "ys.json",
            "--depth",
            "1",
        ],
        vec![
            "goldstine",
            "--config",
            "canonical.json",
            "--x",
            "tail.json",
            "--m",
            "6",
            "--m-list",
            "4..12",
        ],
        vec!["conorm-check", "--u", "e1.json", "--rho", "1/3", "--m", "4"],
        vec![
            "wlur-probe",
            "--config",
            "toy1.json",
            "--x",
            "ones.json",
            "--rho",
            "1/3",
            "--m",
            "3,4,5",
            "--terms",
            "1",
        ],
    ];
    for args in cases {
        let out = readspace(dir.path(), &args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn batch_is_identical_across_thread_counts() {
    let dir = setup();
    let config = format!(
        r#"{{"construction": {TOY1}, "defaults": {{"terms": 1}}, "experiments": [
            {{"kind": "lur_witness", "x": {{"1": "1", "2": "1"}}, "rho": "1/3", "m": [3, 4, 5]}},
            {{"kind": "norm", "x": {{"1": "1"}}}},
            {{"kind": "renorm_additivity", "points": [{{"1": "1", "2": "1"}}], "f": {{"2": "1"}}}}
        ]}}"#
    );
    fs::write(dir.path().join("batch.json"), config).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = Command::new(env!("CARGO_BIN_EXE_readspace"))
            .current_dir(dir.path())
            .env("READSPACE_THREADS", threads)
            .args(["run", "--config", "batch.json"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
}
