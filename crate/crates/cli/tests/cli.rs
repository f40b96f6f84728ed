use std::path::PathBuf;
use std::process::{Command, Output};

use dcf_cli::record::CSV_HEADER;
use dcf_cli::settings::{GlobalArgs, Settings};
use dcf_core::{evaluate, DelayNormalization};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dcf-cli"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dcf-cli")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Data rows (comments and header stripped) split into cells.
fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn col(name: &str) -> usize {
    CSV_HEADER.split(',').position(|c| c == name).unwrap()
}

#[test]
fn solve_single_station() {
    let out = run(&["solve", "--n", "1", "--pf", "0", "--mode", "basic"]);
    assert!(out.status.success());
    let r = rows(&stdout(&out));
    assert_eq!(r.len(), 1);
    let tau: f64 = r[0][col("tau")].parse().unwrap();
    assert!((tau - 2.0 / 9.0).abs() < 1e-15);
    assert_eq!(r[0][col("discard_prob")], "0");
    assert_eq!(r[0][col("seed")], "");
}

#[test]
fn solve_matches_golden_row() {
    let text = std::fs::read_to_string(golden("solve_n30_pf0.1_f10_rtscts.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let reference: Vec<&str> = lines.next().unwrap().split(',').collect();

    let out = run(&["solve", "--n", "30", "--pf", "0.1", "--f", "10", "--mode", "rtscts"]);
    assert!(out.status.success());
    let row = &rows(&stdout(&out))[0];
    for (k, name) in header.iter().enumerate() {
        let got = &row[col(name)];
        if k < 7 {
            assert_eq!(got, reference[k], "{name}");
        } else {
            let (a, b): (f64, f64) = (got.parse().unwrap(), reference[k].parse().unwrap());
            assert!(((a - b) / b).abs() < 1e-12, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn domain_errors_exit_nonzero() {
    for args in [
        &["solve", "--pf", "1.5"][..],
        &["solve", "--n", "0"],
        &["solve", "--f", "many"],
        &["solve", "--mode", "token-ring"],
        &["sweep", "--axis", "n", "--values", "0,1"],
        &["sweep"],
    ] {
        let out = run(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn json_output() {
    let out = run(&["solve", "--n", "5", "--f", "inf", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["f"], "inf");
    assert_eq!(v["discard_prob"], 0.0);
    assert!(v["seed"].is_null());
}

#[test]
fn table1_flags() {
    let out = run(&["table1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).matches("PASS").count(), 4);
    let out = run(&["table1", "--rate", "22"]);
    assert!(out.status.success());
    assert!(!stdout(&out).contains("PASS"));
    let out = run(&["table1", "--payload", "0"]);
    let text = stdout(&out);
    assert!(text.contains("payload_airtime_us=0.0000"));
}

#[test]
fn simulate_single_station_is_exact_and_repeatable() {
    let args = ["simulate", "--n", "1", "--pf", "0", "--seed", "42", "--frames", "20000", "--reps", "3"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# generator ChaCha8Rng seed 42"));
    let r = rows(&text);
    assert_eq!(r[0][col("discard_prob")], "0");
    assert_eq!(r[0][col("source")], "sim");
    assert_eq!(r[0][col("seed")], "42");
}

#[test]
fn preset_fig3_matches_golden_bytes() {
    let out = run(&["sweep", "--preset", "fig3"]);
    assert!(out.status.success());
    let expected = std::fs::read(golden("fig3_analytic.csv")).unwrap();
    assert_eq!(out.stdout, expected);
}

#[test]
fn preset_fig3_discard_columns_coincide() {
    let r = rows(&stdout(&run(&["sweep", "--preset", "fig3"])));
    assert_eq!(r.len(), 21 * 2 * 2);
    for pair in r.chunks(2) {
        assert_eq!(pair[0][col("mode")], "basic");
        assert_eq!(pair[1][col("mode")], "rtscts");
        assert_eq!(pair[0][col("discard_prob")], pair[1][col("discard_prob")]);
    }
}

#[test]
fn preset_fig4_ends_at_zero_throughput() {
    let r = rows(&stdout(&run(&["sweep", "--preset", "fig4"])));
    let last: Vec<_> = r.iter().filter(|row| row[col("pf")] == "1").collect();
    assert_eq!(last.len(), 4);
    for row in last {
        assert_eq!(row[col("throughput")], "0");
        assert_eq!(row[col("delay_us")], "0");
        assert_eq!(row[col("discard_prob")], "1");
    }
}

#[test]
fn sweep_rows_round_trip_through_solve() {
    let text = stdout(&run(&["sweep", "--preset", "fig4", "--delay-normalization", "conditional"]));
    for row in rows(&text) {
        let args = GlobalArgs {
            mode: Some(row[col("mode")].clone()),
            n: Some(row[col("n")].parse().unwrap()),
            w0: Some(row[col("w0")].parse().unwrap()),
            m: Some(row[col("m")].parse().unwrap()),
            f: Some(row[col("f")].clone()),
            pf: Some(row[col("pf")].parse().unwrap()),
            delay_normalization: Some("conditional".into()),
            ..Default::default()
        };
        let s: Settings = args.resolve().unwrap();
        let m = evaluate(&s.scenario, DelayNormalization::Conditional).unwrap();
        let again = dcf_cli::record::RunRecord::analytic(&s.scenario, &m).csv_row();
        assert_eq!(again, row.join(","));
    }
}

#[test]
fn config_file_and_echo() {
    let dir = std::env::temp_dir().join(format!("dcf-cli-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("run.conf");
    std::fs::write(&conf, "n = 12\npf = 0.2\nmode = rtscts\n").unwrap();
    let out = run(&["solve", "--config", conf.to_str().unwrap(), "--pf", "0.3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# config mode=rtscts n=12 w0=8 m=5 f=10 pf=0.3"));
    let r = rows(&text);
    assert_eq!(r[0][col("n")], "12");
    assert_eq!(r[0][col("pf")], "0.3");

    let out_file = dir.join("row.csv");
    let out = run(&["solve", "--n", "3", "--out", out_file.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    assert_eq!(rows(&std::fs::read_to_string(&out_file).unwrap()).len(), 1);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn validate_paths() {
    let out = run(&["validate", "--points", "n=1:pf=0", "--frames", "20000", "--reps", "5"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("overall: PASS"));

    let out = run(&[
        "validate",
        "--max-rel-err",
        "0.001",
        "--points",
        "n=30:pf=0.1",
        "--frames",
        "20000",
        "--reps",
        "3",
    ]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("overall: FAIL"));

    let out = run(&["validate", "--points", "n=2:pf=0.3:mode=basic", "--frames", "5000", "--reps", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 1);
    assert!(v["pass"].is_boolean());
}

#[test]
fn custom_sweep_with_sim_rows() {
    let out = run(&[
        "sweep", "--axis", "pf", "--values", "0.3,0", "--source", "both", "--frames", "5000", "--reps", "2",
        "--seed", "5", "--n", "4",
    ]);
    assert!(out.status.success());
    let r = rows(&stdout(&out));
    assert_eq!(r.len(), 4);
    assert_eq!(r[0][col("pf")], "0");
    assert_eq!(r[0][col("source")], "analytic");
    assert_eq!(r[1][col("source")], "sim");
    assert_eq!(r[1][col("seed")], "5");
    assert_eq!(r[3][col("seed")], "7");
    assert_eq!(r[0][col("ci95_throughput")], "");
    assert_ne!(r[1][col("ci95_throughput")], "");
}
