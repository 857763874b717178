//! End-to-end tests of the `copubreak` binary: exit-code contract,
//! deterministic outputs, and the shape of each command's report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_copubreak")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

/// Simulate a strong Clayton dependence break to a CSV panel and return its path.
fn break_panel(dir: &Path, t: usize, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("panel.csv");
    let out = run(&[
        "simulate",
        "--dgp",
        "clayton:theta0=2.5,theta1=5.0,s0=0.5",
        "--t",
        &t.to_string(),
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "simulate failed: {}", stdout(&out));
    path
}

#[test]
fn simulate_writes_a_loadable_panel_of_the_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = break_panel(dir.path(), 150, 4, 7);
    let text = std::fs::read_to_string(&path).unwrap();
    let panel = copubreak::load_panel_str(&text, &copubreak::panel::LoadOptions::default()).unwrap();
    assert_eq!(panel.values.rows(), 150);
    assert_eq!(panel.values.cols(), 4);
    assert_eq!(panel.names.len(), 4);
}

#[test]
fn test_command_rejects_on_a_strong_break() {
    let dir = tempfile::tempdir().unwrap();
    let path = break_panel(dir.path(), 300, 5, 11);
    let out = run(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--measures",
        "m5",
        "--B",
        "80",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("reject = true"), "report was:\n{text}");
    assert!(text.contains("s_hat = "), "report was:\n{text}");
    assert!(text.contains("break_date = "), "report was:\n{text}");
    assert!(text.contains("ci_lower = "), "report was:\n{text}");
}

#[test]
fn identical_invocations_write_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let panel = break_panel(dir.path(), 200, 4, 5);
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for file in [&a, &b] {
        let out = run(&[
            "test",
            "--input",
            panel.to_str().unwrap(),
            "--measures",
            "m5",
            "--B",
            "50",
            "--seed",
            "9",
            "--output",
            file.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn exit_codes_follow_the_usage_vs_runtime_contract() {
    // Unknown flag: usage error, exit 2.
    let out = run(&["test", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // Missing input file: runtime error, exit 1.
    let out = run(&["test", "--input", "/nonexistent/panel.csv"]);
    assert_eq!(out.status.code(), Some(1));

    // Malformed measure spec: usage error, exit 2 (checked before I/O).
    let out = run(&[
        "test",
        "--input",
        "/nonexistent/panel.csv",
        "--measures",
        "q1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Zero workers is rejected up front.
    let out = run(&["--workers", "0", "test", "--input", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));

    // Help and version are not errors.
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn describe_emits_one_row_per_window_position_in_csv() {
    let dir = tempfile::tempdir().unwrap();
    let panel = break_panel(dir.path(), 160, 3, 3);
    let out = run(&[
        "describe",
        "--input",
        panel.to_str().unwrap(),
        "--window",
        "100",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .collect();
    // Header plus one row per window end: 160 - 100 + 1 = 61.
    assert_eq!(data_rows.len(), 1 + 61, "output was:\n{text}");
    assert!(data_rows[0].starts_with("date,"));
}

#[test]
fn scan_reports_window_bookkeeping_and_a_break_table() {
    let dir = tempfile::tempdir().unwrap();
    let panel = break_panel(dir.path(), 400, 4, 26);
    let out = run(&[
        "scan",
        "--input",
        panel.to_str().unwrap(),
        "--measures",
        "m5",
        "--window",
        "200",
        "--step",
        "50",
        "--B",
        "50",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("windows_tested = "), "output was:\n{text}");
    assert!(text.contains("breaks_found = "), "output was:\n{text}");
    assert!(text.contains("window = 200"), "output was:\n{text}");
}

#[test]
fn ci_command_prints_an_ordered_interval() {
    let dir = tempfile::tempdir().unwrap();
    let panel = break_panel(dir.path(), 240, 4, 13);
    let out = run(&[
        "ci",
        "--input",
        panel.to_str().unwrap(),
        "--measures",
        "m5",
        "--B",
        "60",
        "--seed",
        "8",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    let grab = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("missing {key} in:\n{text}"))
            .parse()
            .unwrap()
    };
    let (lo, hi) = (grab("ci_lower"), grab("ci_upper"));
    assert!(lo <= hi);
    assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
}

#[test]
fn mc_size_power_emits_a_rate_table_over_the_dgp_grid() {
    let out = run(&[
        "mc-size-power",
        "--dgp",
        "clayton:theta0=2.5",
        "--dgp",
        "clayton:theta0=2.5,theta1=5.0,s0=0.5",
        "--measures",
        "m5",
        "--reps",
        "5",
        "--t",
        "120",
        "--n",
        "3",
        "--B",
        "25",
        "--seed",
        "1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    let table: String = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let rate_idx = reader
        .headers()
        .unwrap()
        .iter()
        .position(|c| c == "rate")
        .expect("rate column");
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2, "output was:\n{text}");
    for record in &records {
        let rate: f64 = record[rate_idx].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn common_break_compares_two_measure_sets_on_one_panel() {
    let dir = tempfile::tempdir().unwrap();
    let panel = break_panel(dir.path(), 260, 4, 17);
    let out = run(&[
        "common-break",
        "--input",
        panel.to_str().unwrap(),
        "--measures",
        "m5",
        "--measures2",
        "m4",
        "--B",
        "40",
        "--seed",
        "6",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("same_break = "), "output was:\n{text}");
    assert!(text.contains("alpha_star = "), "output was:\n{text}");
}
