use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cogniopt"));
    c.env_remove("COGNIOPT_THREADS");
    c
}

fn run(dir: &Path, args: &[&str], scenario: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = scenario {
        let path = dir.join("scenario.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const FAST: &str = r#"{
  "sensing": { "sensed_snr_db": -15, "eta_grid": { "min": 0.96, "max": 1.08, "points": 13 } },
  "solver": { "grid_points": 9 }
}"#;

#[test]
fn roc_defaults_are_monotone_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["roc"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv_path = dir.path().join("out/roc.csv");
    let (header, rows) = read_csv(&csv_path);
    assert_eq!(
        header,
        [
            "sensed_snr_db",
            "eta",
            "p_false_alarm",
            "p_detection",
            "p_missed"
        ]
    );
    assert_eq!(rows.len(), 2 * 201);
    for block in rows.chunks(201) {
        let block = block.to_vec();
        for name in ["p_false_alarm", "p_detection"] {
            let v = column(&header, &block, name);
            assert!(v.iter().all(|p| (0.0..=1.0).contains(p)));
            assert!(v.windows(2).all(|w| w[1] <= w[0]), "{name}");
        }
        let pm = column(&header, &block, "p_missed");
        assert!(pm.windows(2).all(|w| w[1] >= w[0]));
    }
    let first = fs::read(&csv_path).unwrap();
    let manifest = fs::read(dir.path().join("out/roc_manifest.json")).unwrap();
    let o = run(dir.path(), &["roc"], None);
    assert!(o.status.success());
    assert_eq!(fs::read(&csv_path).unwrap(), first);
    assert_eq!(
        fs::read(dir.path().join("out/roc_manifest.json")).unwrap(),
        manifest
    );

    let m: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(m["command"], "roc");
    assert_eq!(m["seed"], 0xC0FFEE);
    assert_eq!(m["parameters"]["sensing"]["num_samples"], 12000);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["roc"],
        Some(r#"{"sensing": {"eta_grid": []}}"#),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sensing.eta_grid"), "{}", stderr(&o));

    let o = run(
        dir.path(),
        &["optimize"],
        Some(r#"{"scenario": {"prior_active": 1.5}}"#),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario.prior_active"));

    let o = run(
        dir.path(),
        &["roc"],
        Some(r#"{"sensing": {"samples": 10}}"#),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("samples"));

    let o = run(dir.path(), &["roc"], Some("not json"));
    assert_eq!(o.status.code(), Some(2));

    let o = bin()
        .args(["roc", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = run(dir.path(), &["roc", "--threads", "0"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_budgets() {
    for (pav, ipk) in [(5.0, 0.0), (15.0, 0.0), (-3.0, 0.0)] {
        let dir = TempDir::new().unwrap();
        let scenario = FAST.replace(
            r#""solver""#,
            &format!(
                r#""scenario": {{ "avg_power_budget_db": {pav}, "peak_interference_db": {ipk} }}, "solver""#
            ),
        );
        let o = run(dir.path(), &["optimize"], Some(&scenario));
        assert!(o.status.success(), "{pav} dB: {}", stderr(&o));
        let (header, rows) = read_csv(&dir.path().join("out/optimize.csv"));
        assert_eq!(rows.len(), 1);
        let cs = column(&header, &rows, "C_s")[0];
        let gap = column(&header, &rows, "gap")[0];
        assert!(cs > 0.0 && gap.abs() <= (1e-3 * cs).max(1e-6));
        let loss = column(&header, &rows, "C_p_loss")[0];
        let budget = column(&header, &rows, "loss_budget")[0];
        assert!(loss <= budget * (1.0 + 1e-9));

        let (header, rows) = read_csv(&dir.path().join("out/optimize_sweep.csv"));
        assert_eq!(
            header,
            [
                "sensed_snr_db",
                "eta",
                "lambda_star",
                "C_s",
                "H",
                "I",
                "C_p_loss",
                "gap",
                "iters",
                "feasible"
            ]
        );
        assert_eq!(rows.len(), 9);
        for name in ["lambda_star", "H", "I", "C_p_loss"] {
            assert!(
                column(&header, &rows, name).iter().all(|v| *v >= 0.0),
                "{name}"
            );
        }
    }
}

#[test]
fn infeasible_budget_exits_3() {
    let dir = TempDir::new().unwrap();
    let scenario = FAST.replace(
        r#""solver""#,
        r#""scenario": { "loss_fraction": 0.0 }, "solver""#,
    );
    let o = run(dir.path(), &["optimize"], Some(&scenario));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("capacity loss"), "{}", stderr(&o));
}

#[test]
fn ploss_laws() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["ploss"], Some(FAST));
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/ploss.csv"));
    assert_eq!(
        header,
        [
            "capacity_law",
            "sensed_snr_db",
            "eta",
            "P_m",
            "P_out",
            "gamma_p_min",
            "C_p_loss"
        ]
    );
    assert_eq!(rows.len(), 26);
    let shannon: Vec<_> = rows.iter().filter(|r| r[0] == "shannon").cloned().collect();
    let loss = column(&header, &shannon, "C_p_loss");
    assert!(loss.windows(2).all(|w| w[1] >= w[0]));
    assert!(column(&header, &rows, "P_out")
        .iter()
        .all(|p| (0.0..=1.0).contains(p)));

    let o = run(
        dir.path(),
        &["ploss", "--capacity-law", "paper"],
        Some(FAST),
    );
    assert!(o.status.success());
    let (_, rows) = read_csv(&dir.path().join("out/ploss.csv"));
    assert!(rows.len() == 13 && rows.iter().all(|r| r[0] == "paper"));
}

const SMALL_VALIDATE: &str = r#"{
  "sensing": { "sensed_snr_db": -15, "eta_grid": { "min": 0.96, "max": 1.08, "points": 25 } },
  "solver": { "grid_points": 9 },
  "validate": { "mc_trials": 2000, "surface_eta_points": 12,
                "lambda_grid": { "min": 1e-3, "max": 1e2, "points": 40 } }
}"#;

#[test]
fn validate_report_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["validate", "--seed", "11", "--threads", "1"],
        Some(SMALL_VALIDATE),
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}\n{}", stderr(&o));
    assert!(stdout.contains("all 15 checks passed"));
    assert!(stdout.contains("tolerance="));
    let report = fs::read_to_string(dir.path().join("out/validate_report.txt")).unwrap();
    assert_eq!(report, stdout);
    let m: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/validate_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["seed"], 11);

    let corrupted = SMALL_VALIDATE.replace(
        r#""mc_trials": 2000"#,
        r#""mc_trials": 2000, "tolerances": { "kkt_slackness": 0.0 }"#,
    );
    let o = run(dir.path(), &["validate"], Some(&corrupted));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL kkt_slackness"));
    assert!(stderr(&o).contains("kkt_slackness"));
}

#[test]
fn thread_count_does_not_change_results() {
    let scenario = r#"{"sensing": {"sensed_snr_db": -15, "eta_grid": [1.0]},
                       "validate": {"mc_trials": 1000, "surface_eta_points": 5,
                                    "lambda_grid": {"min": 1e-3, "max": 1e2, "points": 20}},
                       "solver": {"grid_points": 5, "eta_range": [0.97, 1.07]}}"#;
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, scenario).unwrap();
        let o = bin()
            .env("COGNIOPT_THREADS", threads)
            .arg("validate")
            .arg("--config")
            .arg(&path)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        reports.push(o.stdout);
    }
    assert!(!reports[0].is_empty());
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn shipped_scenarios_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let dir = TempDir::new().unwrap();
    for (file, cmd) in [
        ("reference.json", "roc"),
        ("quick_validate.json", "validate"),
    ] {
        let o = bin()
            .arg(cmd)
            .arg("--config")
            .arg(root.join(file))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{file}: {}", stderr(&o));
    }
}
