//! End-to-end runs of the `limitdecide` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use limitdecide::harness::Summary;
use limitdecide::streams::SplitMix64;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_limitdecide"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn asset(rel: &str) -> PathBuf {
    root().join("assets").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn regression_config_matches_golden_summary() {
    let config = asset("configs/regression.toml");
    let golden = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/regression_summary.csv")).unwrap();
    for threads in ["1", "4"] {
        let o = run(&["decide-mean", "--config", config.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(o.stdout, golden, "threads {threads}");
    }
}

#[test]
fn negative_variance_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[stream]\ndistribution = \"normal\"\nmean = 2\nvariance = -1.0\n").unwrap();
    let o = run(&["decide-mean", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stream.variance"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\ntrails = 3\n").unwrap();
    let o = run(&["decide-mean", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn example_config_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(asset("configs/example.toml"))
        .unwrap()
        .replace("../../out/", "");
    let cfg = dir.path().join("example.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["decide-mean", "--config", cfg.to_str().unwrap(), "--trials", "8", "--horizon", "2048"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read(dir.path().join("example_summary.csv")).unwrap();
    let from_csv = Summary::read_csv(csv.as_slice()).unwrap().unwrap();
    let from_json = Summary::from_json(&std::fs::read_to_string(dir.path().join("example_summary.json")).unwrap()).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!((from_csv.trials, from_csv.ground_truth), (8, false));
    assert_eq!(from_csv.final_accuracy, 1.0);
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 4] = [
        (
            "decide-mean",
            &["--config", "--trials", "--horizon", "--seed", "--epsilon", "--set", "--format", "--out", "--threads", "--dump-config"],
        ),
        ("adversary", &["--procedure", "--stem", "--depth", "--rho", "--target", "--report", "--out"]),
        ("blackbox", &["--config", "--bits", "--target", "--first-mismatch", "--out"]),
        ("report", &["--input", "--format", "--out"]),
    ];
    let top = stdout(&run(&["--help"]));
    for (sub, flags) in cases {
        assert!(top.contains(sub), "{sub} missing from top-level help");
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let help = stdout(&o);
        for flag in flags {
            assert!(help.contains(flag), "{sub} --help lacks {flag}");
        }
    }
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = asset("configs/regression.toml");
    let o = run(&["decide-mean", "--config", config.to_str().unwrap(), "--dump-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dumped = dir.path().join("dumped.toml");
    std::fs::write(&dumped, &o.stdout).unwrap();
    let again = run(&["decide-mean", "--config", dumped.to_str().unwrap(), "--dump-config"]);
    assert_eq!(stdout(&again), stdout(&o));
    let golden = run(&["decide-mean", "--config", dumped.to_str().unwrap()]);
    let expected = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/regression_summary.csv")).unwrap();
    assert_eq!(golden.stdout, expected, "{}", stderr(&golden));
}

#[test]
fn adversary_certificates() {
    let o = run(&["adversary", "--procedure", "constant-1", "--stem", "1", "--depth", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&o)["kind"], "wrong-way-branch");

    let o = run(&["adversary", "--procedure", "prefix-match:evens", "--stem", "0", "--depth", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert = json(&o);
    assert_eq!(cert["kind"], "extinction");
    assert_eq!(cert["extinction_level"], 1);

    let bc = asset("procedures/alternating_length.bc");
    let o = run(&["adversary", "--procedure", &format!("bytecode:{}", bc.display()), "--stem", "1", "--depth", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&o)["kind"], "unstable-branch");

    let bc = asset("procedures/late_one_majority.bc");
    let o = run(&["adversary", "--procedure", &format!("bytecode:{}", bc.display()), "--stem", "1", "--depth", "12"]);
    assert_eq!(json(&o)["kind"], "wrong-way-branch");
}

#[test]
fn adversary_rejects_an_on_target_stem() {
    let o = run(&["adversary", "--procedure", "prefix-match:evens", "--stem", "1"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn adversary_report_mode() {
    let o = run(&["adversary", "--procedure", "parity-vote", "--stem", "", "--depth", "10", "--report"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(json(&o).is_object());
}

#[test]
fn blackbox_on_its_own_bits_accepts_everywhere() {
    let bits = asset("bits/evens_first_64.bin");
    let o = run(&["blackbox", "--bits", bits.to_str().unwrap(), "--target", "evens"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,bit,decision"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.ends_with(",1")));

    let cfg = asset("configs/blackbox.toml");
    let o = run(&["blackbox", "--config", cfg.to_str().unwrap(), "--first-mismatch"]);
    assert_eq!(json(&o)["first_mismatch"], Value::Null);
}

#[test]
fn blackbox_finds_a_flipped_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bits.bin");
    std::fs::write(&path, [0b1010_1110u8, 0xaa]).unwrap();
    let o = run(&["blackbox", "--bits", path.to_str().unwrap(), "--target", "evens", "--first-mismatch"]);
    assert_eq!(json(&o)["first_mismatch"], 5);

    let o = run(&["blackbox", "--bits", path.to_str().unwrap(), "--target", "evens"]);
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(str::to_owned).collect();
    assert_eq!(rows[4], "5,1,1");
    assert_eq!(rows[5], "6,1,0");
    assert!(rows[6..].iter().all(|r| r.ends_with(",0")));
}

/// First index where MSB-first bits of `bytes` differ from the evens.
fn scan_evens(bytes: &[u8]) -> Option<u64> {
    for (i, byte) in bytes.iter().enumerate() {
        for j in 0..8 {
            let n = (i * 8 + j) as u64;
            let bit = byte >> (7 - j) & 1 == 1;
            if bit != n.is_multiple_of(2) {
                return Some(n);
            }
        }
    }
    None
}

#[test]
fn blackbox_megabyte_file() {
    let mut bytes = vec![0xaau8; 1 << 19];
    let mut rng = SplitMix64::new(99);
    bytes.extend((0..1 << 17).flat_map(|_| rng.next_u64().to_le_bytes()));
    assert_eq!(bytes.len(), 3 << 19);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.bin");
    std::fs::write(&path, &bytes).unwrap();
    let o = run(&["blackbox", "--bits", path.to_str().unwrap(), "--target", "evens", "--first-mismatch"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let got = json(&o);
    assert_eq!(got["bits"], (bytes.len() * 8) as u64);
    let want = scan_evens(&bytes).unwrap();
    assert!(want >= 1 << 22);
    assert_eq!(got["first_mismatch"], want);
}

#[test]
fn missing_bit_file_is_a_config_error() {
    let o = run(&["blackbox", "--target", "evens"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_converts_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/regression_summary.csv");
    let json_path = dir.path().join("s.json");
    let o = run(&["report", "--input", golden.to_str().unwrap(), "--out", json_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["report", "--input", json_path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.stdout, std::fs::read(&golden).unwrap());
}
