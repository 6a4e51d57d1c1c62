use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ecbe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecbe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn generate_sea(dir: &Path) {
    let out = ecbe(
        &[
            "generate",
            "--kind",
            "sea",
            "--seed",
            "3",
            "--instances",
            "6000",
            "--noise",
            "0.1",
            "--drift-at",
            "1500,4500",
            "--swap",
            "0,1",
            "--out",
            "s.csv",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn generate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "attrib1,attrib2,attrib3,class");
    assert_eq!(csv.lines().count(), 6001);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["label_noise"], 0.1);
    let positions: Vec<u64> = manifest["drift_positions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    // Four SEA concepts over 6000 instances plus the two swaps.
    assert_eq!(positions, vec![1500, 3000, 4500]);

    generate_sea(dir.path());
    assert_eq!(
        csv,
        std::fs::read_to_string(dir.path().join("s.csv")).unwrap()
    );
}

#[test]
fn run_writes_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    let out = ecbe(
        &[
            "run",
            "--data",
            "s.csv",
            "--manifest",
            "s.manifest.json",
            "--k",
            "5",
            "--winsize",
            "500",
            "--out",
            "res",
            "--no-timings",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let res = dir.path().join("res");
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["method"], "ecbe");
    assert_eq!(summary["blocks"], 12);
    assert_eq!(summary["config"]["winsize"], 500);
    let accuracy = summary["average_accuracy"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&accuracy));
    assert!(summary["detection"]["missed"].is_u64());

    let blocks = std::fs::read_to_string(res.join("blocks.csv")).unwrap();
    assert_eq!(blocks.lines().count(), 13);
    let log = std::fs::read_to_string(res.join("drift_log.csv")).unwrap();
    assert!(log.starts_with("block_index,psi_prev,psi_curr,epsilon,decision"));
    // Warm-up covers the first k blocks, the detector sees the rest.
    assert_eq!(log.lines().count(), 1 + 12 - 5);

    let again = ecbe(
        &[
            "run",
            "--data",
            "s.csv",
            "--manifest",
            "s.manifest.json",
            "--k",
            "5",
            "--winsize",
            "500",
            "--out",
            "res2",
            "--no-timings",
        ],
        dir.path(),
    );
    assert_eq!(code(&again), 0);
    assert_eq!(
        blocks,
        std::fs::read_to_string(dir.path().join("res2/blocks.csv")).unwrap()
    );
}

#[test]
fn baseline_run_has_an_empty_drift_log() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    let out = ecbe(
        &[
            "run",
            "--data",
            "s.csv",
            "--winsize",
            "1000",
            "--baseline",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["method"], "majority_baseline");
    let log = std::fs::read_to_string(dir.path().join("b/drift_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    std::fs::write(
        dir.path().join("c.toml"),
        "k = 3\nwinsize = 1000\nalpha = 0.1\n",
    )
    .unwrap();
    let out = ecbe(
        &[
            "run",
            "--data",
            "s.csv",
            "--config",
            "c.toml",
            "--winsize",
            "600",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["k"], 3);
    assert_eq!(summary["config"]["alpha"], 0.1);
    assert_eq!(summary["config"]["winsize"], 600);
    assert_eq!(summary["blocks"], 10);
}

#[test]
fn generator_table_in_a_json_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("g.json"),
        r#"{"generator": {"kind": {"type": "led", "noise": 0.0}, "seed": 2, "instances": 50}}"#,
    )
    .unwrap();
    let out = ecbe(
        &[
            "generate",
            "--config",
            "g.json",
            "--instances",
            "30",
            "--out",
            "led.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("led.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 25);
}

#[test]
fn sweep_over_a_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecbe(
        &[
            "sweep",
            "--param",
            "winsize",
            "--values",
            "500..1500:500",
            "--seeds",
            "1,2",
            "--kind",
            "sea",
            "--instances",
            "6000",
            "--out",
            "sweep.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    assert!(lines[3].starts_with("winsize,500,mean,"));
    assert!(lines[9].starts_with("winsize,1500,mean,"));
}

#[test]
fn sweep_over_a_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    let out = ecbe(
        &[
            "sweep",
            "--param",
            "noise",
            "--values",
            "0,0.2",
            "--seeds",
            "4",
            "--data",
            "s.csv",
            "--winsize",
            "1000",
            "--out",
            "n.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    generate_sea(dir.path());
    let cases: &[&[&str]] = &[
        &["run", "--data", "s.csv", "--beta", "1", "--out", "o"],
        &["run", "--data", "s.csv", "--alpha", "1.5", "--out", "o"],
        &["run", "--data", "s.csv", "--k", "0", "--out", "o"],
        &[
            "run",
            "--data",
            "s.csv",
            "--config",
            "missing.toml",
            "--out",
            "o",
        ],
        &["generate", "--out", "x.csv"],
        &[
            "generate", "--kind", "sea", "--noise", "2", "--out", "x.csv",
        ],
        &[
            "generate", "--kind", "sea", "--swap", "0,1", "--out", "x.csv",
        ],
        &[
            "generate",
            "--kind",
            "sea",
            "--drift-at",
            "1,a",
            "--out",
            "x.csv",
        ],
        &[
            "sweep", "--param", "beta", "--values", "0.5", "--kind", "sea", "--out", "w.csv",
        ],
        &[
            "sweep", "--param", "gamma", "--values", "1", "--kind", "sea", "--out", "w.csv",
        ],
        &["run", "--out", "o"],
    ];
    for args in cases {
        let out = ecbe(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "a,b,class\n").unwrap();
    std::fs::write(dir.path().join("ragged.csv"), "a,b,class\n1,2,x\n3,y\n").unwrap();
    for data in ["missing.csv", "empty.csv", "ragged.csv"] {
        let out = ecbe(&["run", "--data", data, "--out", "o"], dir.path());
        assert_eq!(code(&out), 3, "{data}: {}", stderr(&out));
    }
    std::fs::write(dir.path().join("ok.csv"), "a,class\n1,x\n2,y\n").unwrap();
    let out = ecbe(
        &[
            "run",
            "--data",
            "ok.csv",
            "--manifest",
            "missing.json",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
