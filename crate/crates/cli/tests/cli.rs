use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ecorate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecorate"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn fixture_dir() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let out = ecorate(&["fixture", "--out", "fx"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fx = dir.path().join("fx");
    (dir, fx)
}

/// Parses a CSV body into header and rows.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column<'a>(header: &[String], rows: &'a [Vec<String>], name: &str) -> Vec<&'a str> {
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].as_str()).collect()
}

#[test]
fn fixture_files() {
    let (_dir, fx) = fixture_dir();
    let lcb = fs::read_to_string(fx.join("table1_lcb.csv")).unwrap();
    let cxg = fs::read_to_string(fx.join("table1_cxg.csv")).unwrap();
    assert!(lcb
        .lines()
        .any(|l| l == "Seed-Coder-8B-Instruct,LCB,1.00,0.88"));
    assert!(cxg.lines().any(|l| l == "Yi-Coder-9B,CXG,0.16,0.00"));
    assert_eq!(lcb.lines().count(), 23);
    assert_eq!(cxg.lines().count(), 23);
    let sizes = fs::read_to_string(fx.join("sizes.csv")).unwrap();
    let (_, rows) = table(&sizes);
    let count = |b: &str| rows.iter().filter(|r| r[1] == b).count();
    assert_eq!((count("<3B"), count("3-7B"), count(">=7B")), (5, 6, 11));
}

#[test]
fn rate_both_matches_published_circ() {
    let (dir, _) = fixture_dir();
    let out = ecorate(
        &[
            "rate",
            "--method",
            "both",
            "--input",
            "fx/table1_lcb.csv",
            "--mode",
            "normalized",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("r/ratings.csv")).unwrap();
    let (header, rows) = table(&text);
    assert_eq!(rows.len(), 22);
    let circ: Vec<u32> = column(&header, &rows, "circ_rating")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(
        circ,
        ecorate::fixture::published_circ(ecorate::fixture::Benchmark::Lcb)
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/ratings.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "rate");
    assert_eq!(meta["config"]["oter"]["degree"], 5);
}

#[test]
fn report_reingests_as_normalized_input() {
    let (dir, _) = fixture_dir();
    let first = ecorate(
        &[
            "rate",
            "--input",
            "fx/table1_cxg.csv",
            "--out",
            "a",
            "--no-meta",
        ],
        dir.path(),
    );
    assert!(first.status.success());
    let again = ecorate(
        &[
            "rate",
            "--input",
            "a/ratings.csv",
            "--out",
            "b",
            "--no-meta",
        ],
        dir.path(),
    );
    assert!(again.status.success(), "{}", stderr(&again));
    let a = fs::read(dir.path().join("a/ratings.csv")).unwrap();
    let b = fs::read(dir.path().join("b/ratings.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!dir.path().join("a/ratings.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (dir, _) = fixture_dir();
    let a = ecorate(&["rate", "--input", "fx/table1_lcb.csv"], dir.path());
    let b = ecorate(&["rate", "--input", "fx/table1_lcb.csv"], dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn circ_scale_ten_endpoints() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("ends.csv"),
        "model_id,benchmark_id,acc_norm,eff_norm\nbest,B,1,1\nworst,B,0,0\n",
    )
    .unwrap();
    let out = ecorate(
        &[
            "rate", "--method", "circ", "--scale", "10", "--input", "ends.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let (header, rows) = table(&stdout(&out));
    assert_eq!(column(&header, &rows, "circ_rating"), ["10", "1"]);
    assert!(!header.iter().any(|h| h == "oter_rating"));
}

#[test]
fn single_row_is_insufficient() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("one.csv"),
        "model_id,benchmark_id,acc_norm,eff_norm\na,B,0.5,0.5\n",
    )
    .unwrap();
    let out = ecorate(&["rate", "--input", "one.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("insufficient data"));
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "model_id,benchmark_id,acc_norm,eff_norm\na,B,0.5,0.5\nb,B,1.5,0.5\n",
    )
    .unwrap();
    let out = ecorate(&["rate", "--input", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.csv") && err.contains("line 3"), "{err}");
}

#[test]
fn configuration_errors_exit_3() {
    let (dir, _) = fixture_dir();
    fs::write(dir.path().join("typo.json"), r#"{"oter": {"degre": 3}}"#).unwrap();
    let out = ecorate(
        &[
            "rate",
            "--input",
            "fx/table1_lcb.csv",
            "--config",
            "typo.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("degre"));
    let out = ecorate(
        &["rate", "--input", "fx/table1_lcb.csv", "--scale", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let out = ecorate(&["rate", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = ecorate(&["rate"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_applies_and_flags_win() {
    let (dir, _) = fixture_dir();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"method": "circ", "scale": 3}"#,
    )
    .unwrap();
    let out = ecorate(
        &[
            "rate",
            "--input",
            "fx/table1_lcb.csv",
            "--config",
            "cfg.json",
        ],
        dir.path(),
    );
    let (header, rows) = table(&stdout(&out));
    assert!(column(&header, &rows, "circ_rating")
        .iter()
        .all(|r| ["1", "2", "3"].contains(r)));
    let out = ecorate(
        &[
            "rate",
            "--input",
            "fx/table1_lcb.csv",
            "--config",
            "cfg.json",
            "--scale",
            "5",
        ],
        dir.path(),
    );
    let (header, rows) = table(&stdout(&out));
    assert!(column(&header, &rows, "circ_rating").contains(&"5"));
}

#[test]
fn raw_input_is_normalized() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("raw.csv"),
        "model_id,benchmark_id,accuracy,energy_joules\na,B,0.9,100\nb,B,0.1,300\nc,B,0.5,200\n",
    )
    .unwrap();
    let out = ecorate(
        &[
            "rate", "--method", "circ", "--mode", "raw", "--input", "raw.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = table(&stdout(&out));
    assert_eq!(column(&header, &rows, "acc_norm"), ["1", "0", "0.5"]);
    assert_eq!(column(&header, &rows, "eff_norm"), ["1", "0", "0.5"]);
    assert_eq!(column(&header, &rows, "circ_rating"), ["5", "1", "3"]);
}

#[test]
fn curve_export() {
    let (dir, fx) = fixture_dir();
    let out = ecorate(
        &["curve", "--input", "fx/table1_cxg.csv", "--out", "c"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let curve = fs::read_to_string(dir.path().join("c/curve.csv")).unwrap();
    let (_, rows) = table(&curve);
    assert_eq!(rows.len(), 201);
    let f: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] <= w[0]));

    let points = fs::read_to_string(dir.path().join("c/points.csv")).unwrap();
    let (header, rows) = table(&points);
    let flagged = column(&header, &rows, "is_outlier");
    let set =
        ecorate::measurements::parse_normalized(fs::File::open(fx.join("table1_cxg.csv")).unwrap())
            .unwrap();
    let mask = ecorate::robust::detect_outliers(&set.points, 0.95, 0).unwrap();
    let expected: Vec<String> = mask.flags.iter().map(|f| f.to_string()).collect();
    assert_eq!(flagged, expected);
}

#[test]
fn curve_degree_one_on_a_line() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("model_id,benchmark_id,acc_norm,eff_norm\n");
    for i in 0..6 {
        let x = f64::from(i) / 5.0;
        body += &format!("m{i},B,{},{}\n", 1.0 - 0.8 * x, x);
    }
    fs::write(dir.path().join("line.csv"), body).unwrap();
    fs::write(
        dir.path().join("deg1.json"),
        r#"{"oter": {"degree": 1, "les_filter": null}}"#,
    )
    .unwrap();
    let out = ecorate(
        &["curve", "--input", "line.csv", "--config", "deg1.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, rows) = table(&stdout(&out));
    for r in rows {
        let (x, f): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((f - (1.0 - 0.8 * x)).abs() < 1e-6, "x={x} f={f}");
    }
}

#[test]
fn aggregate_power_logs() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("log.csv"),
        "model_id,benchmark_id,device,tick,watts\n\
         a,B,gpu,0,10\nb,B,cpu,0,4\na,B,cpu,0,2\na,B,gpu,1,20\nb,B,ram,1,1\n",
    )
    .unwrap();
    let out = ecorate(
        &[
            "aggregate",
            "--input",
            "log.csv",
            "--mode",
            "powerlog",
            "--dt",
            "0.5",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    // a: (10 + 2 + 20) * 0.5, b: (4 + 1) * 0.5
    assert_eq!(
        stdout(&out),
        "model_id,benchmark_id,energy_joules\na,B,16\nb,B,2.5\n"
    );

    fs::write(
        dir.path().join("acc.csv"),
        "model_id,benchmark_id,accuracy\na,B,0.7\nb,B,0.4\n",
    )
    .unwrap();
    let out = ecorate(
        &[
            "aggregate",
            "--input",
            "log.csv",
            "--dt",
            "0.5",
            "--accuracy",
            "acc.csv",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("o/measurements.csv")).unwrap();
    assert_eq!(
        text,
        "model_id,benchmark_id,accuracy,energy_joules\na,B,0.7,16\nb,B,0.4,2.5\n"
    );
    let rated = ecorate(
        &[
            "rate",
            "--mode",
            "raw",
            "--input",
            "o/measurements.csv",
            "--method",
            "circ",
        ],
        dir.path(),
    );
    assert!(rated.status.success());
}

#[test]
fn aggregate_empty_log_fails() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("log.csv"),
        "model_id,benchmark_id,device,tick,watts\n",
    )
    .unwrap();
    let out = ecorate(
        &["aggregate", "--input", "log.csv", "--mode", "powerlog"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

fn summaries(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn loo_circ_is_static() {
    let (dir, _) = fixture_dir();
    let out = ecorate(
        &[
            "loo",
            "--method",
            "circ",
            "--input",
            "fx/table1_lcb.csv",
            "--out",
            "l",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summaries(&stdout(&out));
    assert_eq!(s.len(), 1);
    assert_eq!(s[0]["mean_drift"], 0.0);
    assert_eq!(s[0]["cases"], 22);
    let csv = fs::read_to_string(dir.path().join("l/loo.csv")).unwrap();
    assert_eq!(csv.lines().count(), 23);
}

#[test]
fn noise_is_seeded() {
    let (dir, _) = fixture_dir();
    let run = |seed: &str| {
        let out = ecorate(
            &[
                "noise",
                "--input",
                "fx/table1_cxg.csv",
                "--trials",
                "4",
                "--seed",
                seed,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
    let out = ecorate(
        &[
            "noise",
            "--input",
            "fx/table1_cxg.csv",
            "--amplitude",
            "0",
            "--trials",
            "2",
            "--method",
            "circ",
        ],
        dir.path(),
    );
    let s = summaries(&stderr(&out));
    assert_eq!(s[0]["max_drift"], 0.0);
}

#[test]
fn sweep_with_small_grid() {
    let (dir, _) = fixture_dir();
    fs::write(
        dir.path().join("grid.json"),
        r#"{"sweep": {"degrees": [4, 5], "mcd_percentiles": [0.95], "les_quantiles": [0.75], "epsilons": [0.01, 0.1]}}"#,
    )
    .unwrap();
    let out = ecorate(
        &[
            "sweep",
            "--input",
            "fx/table1_lcb.csv",
            "--config",
            "grid.json",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summaries(&stdout(&out));
    assert_eq!(s[0]["cases"], 4);
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("oter,degree=4 mcd=0.95 les=0.75 epsilon=0.01,"));
    let out = ecorate(
        &["sweep", "--method", "circ", "--input", "fx/table1_lcb.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sizebias_reports_lcb_circ_p_value() {
    let (dir, _) = fixture_dir();
    let out = ecorate(
        &[
            "sizebias",
            "--method",
            "circ",
            "--input",
            "fx/table1_lcb.csv",
            "--groups",
            "fx/sizes.csv",
            "--out",
            "k",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let s = summaries(&stdout(&out));
    let p = s[0]["p_value"].as_f64().unwrap();
    assert!((0.79..=0.89).contains(&p), "p = {p}");
}

#[test]
fn sizebias_requires_every_model_grouped() {
    let (dir, _) = fixture_dir();
    fs::write(
        dir.path().join("partial.csv"),
        "model_id,size_bucket\nYi-Coder-9B,big\n",
    )
    .unwrap();
    let out = ecorate(
        &[
            "sizebias",
            "--input",
            "fx/table1_lcb.csv",
            "--groups",
            "partial.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
