use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn syment(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_syment"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = syment(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    syment(args).status.code().expect("exited normally")
}

/// Rows as maps from column name to raw field.
fn records(csv_text: &str) -> Vec<Vec<(String, String)>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    reader
        .records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(h, _)| h == name).unwrap_or_else(|| panic!("no column {name}")).1
}

fn num(row: &[(String, String)], name: &str) -> f64 {
    field(row, name).parse().unwrap()
}

fn header(csv_text: &str) -> &str {
    csv_text.lines().next().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exact_ghz_averaged() {
    let out = stdout_ok(&["exact", "--state", "ghz", "--n", "4", "--group", "symmetric", "--k", "4", "--s", "2"]);
    assert_eq!(header(&out), "k,group,scope,C,E,bound_max_E");
    let rows = records(&out);
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0], "C") - 0.3125).abs() < 1e-12);
    assert!((num(&rows[0], "E") - 0.6875).abs() < 1e-12);
    assert_eq!(field(&rows[0], "scope"), "s=2");
}

#[test]
fn exact_family_matches_state_vector() {
    let args = |state: &str| {
        stdout_ok(&["exact", "--state", state, "--n", "5", "--e", "2", "--k", "5", "--subset", "1,3"])
    };
    // dicke goes through the analytic spectrum; the file route builds and traces the state.
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dicke.json");
    fs::write(&file, syment::PureState::dicke(5, 2).unwrap().to_json()).unwrap();
    let from_file = stdout_ok(&["exact", "--state", "file", "--file", path_str(&file), "--k", "5", "--subset", "1,3"]);
    for (a, b) in records(&args("dicke")).iter().zip(records(&from_file).iter()) {
        assert!((num(a, "C") - num(b, "C")).abs() < 1e-12);
    }
}

#[test]
fn exact_product_is_unentangled() {
    let out = stdout_ok(&["exact", "--state", "product", "--n", "3", "--d", "3", "--k", "3", "--subset", "0,2"]);
    for row in records(&out) {
        assert_eq!(num(&row, "E"), 0.0);
    }
}

#[test]
fn exact_gme() {
    let out = stdout_ok(&["exact", "--state", "ghz", "--n", "3", "--k", "2", "--gme", "--group", "symmetric"]);
    let rows = records(&out);
    assert_eq!(field(&rows[0], "scope"), "gme");
    assert!((num(&rows[0], "E") - 0.25).abs() < 1e-12);
}

#[test]
fn invalid_inputs_exit_with_two() {
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--k", "1", "--s", "2"]), 2);
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--k", "3", "--s", "4"]), 2);
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--k", "3", "--subset", "0,0"]), 2);
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--k", "3", "--s", "2", "--subset", "0"]), 2);
    assert_eq!(code(&["exact", "--state", "file", "--file", "/nonexistent/state.json", "--k", "3", "--s", "1"]), 2);
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--k", "x", "--s", "2"]), 2);
    assert_eq!(code(&["launch"]), 2);
    assert_eq!(code(&["sweep", "--state", "w", "--n", "4", "--s", "1", "--kmax", "201"]), 2);
    assert_eq!(code(&["exact", "--state", "ghz", "--n", "4", "--d", "3", "--k", "3", "--s", "1"]), 2);
}

#[test]
fn sweep_ghz_closed_form_and_chain() {
    let out = stdout_ok(&["sweep", "--state", "ghz", "--n", "4", "--s", "2", "--kmax", "50"]);
    assert_eq!(header(&out), "k,group,scope,C,E");
    let rows = records(&out);
    assert_eq!(rows.len(), 49 * 3);
    for row in rows.iter().filter(|r| field(r, "group") == "symmetric") {
        let k: i32 = field(row, "k").parse().unwrap();
        let expect = (k as f64 + 1.0) / 2f64.powi(k);
        assert!((num(row, "C") - expect).abs() <= 1e-12 * expect, "k={k}");
    }
    for chunk in rows.chunks(3) {
        let c = |g: &str| num(chunk.iter().find(|r| field(r, "group") == g).unwrap(), "C");
        assert!(c("symmetric") <= c("dihedral") + 1e-12);
        assert!(c("dihedral") <= c("cyclic") + 1e-12);
    }
}

#[test]
fn sweep_fit_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    let theta = (std::f64::consts::PI / 8.0).to_string();
    stdout_ok(&[
        "sweep", "--state", "ghz-theta", "--theta", &theta, "--n", "2", "--subset", "0", "--group", "symmetric",
        "--kmax", "20", "--fit-range", "10:20", "--out", path_str(&out), "--svg", path_str(&svg),
    ]);
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.fit.json")).unwrap()).unwrap();
    let slope = fit[0]["slope"].as_f64().unwrap();
    assert!((slope + 0.1583).abs() < 5e-3, "slope {slope}");
    let svg = fs::read_to_string(svg).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 600""#));
}

#[test]
fn estimate_gbose_error_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        stdout_ok(&[
            "estimate", "--state", "ghz", "--n", "4", "--k", "4", "--s", "2", "--group", "symmetric", "--method",
            "gbose", "--budget", "1e5", "--trials", "100", "--seed", "7", "--out", path_str(&path),
        ]);
        fs::read(path).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let text = String::from_utf8(first).unwrap();
    assert_eq!(header(&text), "trial,method,group,k,n_tot,c_hat,c_exact,abs_err,log_err");
    let rows = records(&text);
    assert_eq!(rows.len(), 100);
    let mean = rows.iter().map(|r| num(r, "abs_err")).sum::<f64>() / 100.0;
    assert!(mean < 5e-3, "mean abs err {mean}");

    let prov: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["command"], "estimate");
    assert_eq!(prov["config"]["seed"], 7);
    assert_eq!(prov["config"]["trials"], 100);
    assert_eq!(prov["config"]["method"], "gbose");
    assert_eq!(prov["config"]["budget"], 100000);
    assert_eq!(prov["config"]["state"], "ghz");
}

#[test]
fn estimate_seed_changes_output() {
    let base = ["estimate", "--state", "w", "--n", "3", "--k", "3", "--subset", "0", "--method", "swap", "--budget", "1000", "--trials", "3"];
    let a = stdout_ok(&[&base[..], &["--seed", "1"]].concat());
    let b = stdout_ok(&[&base[..], &["--seed", "2"]].concat());
    assert_ne!(a, b);
}

#[test]
fn estimate_extrapolation_column() {
    let out = stdout_ok(&[
        "estimate", "--state", "ghz", "--n", "4", "--k", "8", "--subset", "0,1", "--group", "symmetric", "--method",
        "swap", "--extrapolate", "4", "--budget", "1e5", "--trials", "3",
    ]);
    assert!(header(&out).ends_with(",log_err,extrapolated"));
    assert!(records(&out).iter().all(|r| field(r, "extrapolated") == "4"));
}

#[test]
fn estimate_rejects_zero_trials() {
    let args = ["estimate", "--state", "ghz", "--n", "4", "--k", "4", "--s", "2", "--budget", "1000", "--trials", "0"];
    assert_eq!(code(&args), 2);
}

#[test]
fn scaling_slopes_and_single_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scaling.csv");
    stdout_ok(&[
        "scaling", "--state", "haar", "--n", "4", "--k", "4", "--s", "2", "--group", "symmetric", "--budgets",
        "1e3,1e4,1e5,1e6", "--trials", "30", "--out", path_str(&out),
    ]);
    let summary = fs::read_to_string(dir.path().join("scaling.summary.csv")).unwrap();
    assert_eq!(header(&summary), "method,slope,intercept,residual,n_points");
    let rows = records(&summary);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let slope = num(row, "slope");
        assert!((-0.6..=-0.4).contains(&slope), "{} slope {slope}", field(row, "method"));
    }
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scaling.summary.json")).unwrap()).unwrap();
    for m in json.as_array().unwrap() {
        let ci = m["abs_err"]["ci95"].as_array().unwrap();
        assert!(ci[0].as_f64().unwrap() < m["abs_err"]["slope"].as_f64().unwrap());
    }

    let single = dir.path().join("single.csv");
    stdout_ok(&[
        "scaling", "--state", "ghz", "--n", "3", "--k", "3", "--subset", "0", "--group", "cyclic", "--method", "gbose",
        "--budgets", "1e4", "--trials", "2", "--out", path_str(&single),
    ]);
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("single.summary.json")).unwrap()).unwrap();
    assert!(json[0]["abs_err"]["slope"].is_null());
    assert!(json[0]["abs_err"]["ci95"].is_null());
}

#[test]
fn distribution_bell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bell.csv");
    stdout_ok(&["distribution", "--state", "ghz", "--n", "2", "--k", "2", "--out", path_str(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text, "z,p\n00,0.75\n01,0\n10,0\n11,0.25\n");
    let marg = fs::read_to_string(dir.path().join("bell.marginals.csv")).unwrap();
    assert_eq!(header(&marg), "subset,marginal,exact,residual");
    for row in records(&marg) {
        assert!(num(&row, "residual").abs() < 1e-9);
    }
}

#[test]
fn distribution_product_and_caps() {
    let out = stdout_ok(&["distribution", "--state", "product", "--n", "3", "--k", "3"]);
    let nonzero: Vec<_> = records(&out).into_iter().filter(|r| num(r, "p") != 0.0).collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(field(&nonzero[0], "z"), "000");
    assert_eq!(num(&nonzero[0], "p"), 1.0);
    assert_eq!(code(&["distribution", "--state", "haar", "--n", "12", "--k", "4"]), 2);
}

#[test]
fn budget_table() {
    let out = stdout_ok(&["budget", "--method", "gbose", "--group", "symmetric", "--k", "4", "--eps", "0.01", "--delta", "0.05"]);
    let rows = records(&out);
    assert_eq!(field(&rows[0], "copies"), "73780");

    let out = stdout_ok(&[
        "budget", "--method", "swap", "--group", "symmetric", "--k", "4", "--eps", "0.01", "--budget", "1000000",
    ]);
    let rows = records(&out);
    let n = |j: &str| num(rows.iter().find(|r| field(r, "order") == j).unwrap(), "plan_executions");
    for (j, nj) in [(3.0, n("3")), (4.0, n("4"))] {
        let expect = n("2") * (j / 2.0f64).powf(-4.0 / 3.0);
        assert!((nj - expect).abs() / expect < 1e-3, "order {j}: {nj} vs {expect}");
    }

    assert_eq!(code(&["budget", "--k", "4", "--eps", "0"]), 2);
    assert_eq!(code(&["budget", "--k", "4"]), 2);
}

#[test]
fn json_format() {
    let out = stdout_ok(&["exact", "--state", "w", "--n", "4", "--k", "3", "--s", "1", "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["C"].is_f64());
    assert_eq!(rows[0]["group"], "symmetric");
}
