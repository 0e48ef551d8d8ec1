//! End-to-end tests driving the compiled `polarsec` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarsec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Builds the shared toy pipeline (channel + exact small code) in `dir`.
fn make_toy(dir: &Path) -> (String, String) {
    let channel = path_str(dir, "channel.json");
    let out = run(&[
        "channel",
        "make",
        "--preset",
        "toy",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let out = run(&[
        "construct",
        "--channel",
        &channel,
        "--l",
        "4",
        "--m",
        "2",
        "--eps1",
        "0.2",
        "--eps2",
        "0.2",
        "--mode",
        "exact",
        "--keep-profiles",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    (channel, path_str(dir, "code.json"))
}

#[test]
fn toy_pipeline_produces_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, code) = make_toy(dir);

    let out = run(&[
        "ska", "--channel", &channel, "--code", &code, "--trials", "25", "--seed", "11", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(dir.join("ska_trials.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ska_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["trials"], 25);
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["protocol"], "ska");

    let out = run(&[
        "pcc", "--channel", &channel, "--code", &code, "--trials", "25", "--seed", "11", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let pcc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("pcc_summary.json")).unwrap())
            .unwrap();
    assert_eq!(pcc["protocol"], "pcc");
    assert_eq!(pcc["rate"], summary["rate"], "both protocols share the code rate");

    let out = run(&[
        "analyze",
        "secrecy",
        "--channel",
        &channel,
        "--code",
        &code,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let secrecy: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("secrecy.json")).unwrap()).unwrap();
    assert!(
        secrecy["exact_l1"].is_number(),
        "toy scale must include the exhaustive value"
    );
    let l1 = secrecy["exact_l1"].as_f64().unwrap();
    let bound = secrecy["pinsker_bound"].as_f64().unwrap();
    assert!((0.0..=2.0).contains(&l1));
    assert!(bound >= l1 / 2.0, "bound {bound} vs variational {}", l1 / 2.0);

    let out = run(&[
        "analyze",
        "supersource",
        "--channel",
        &channel,
        "--l",
        "4",
        "--eps1",
        "0.2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("retained-bit bound PASS"));

    let out = run(&["report", "--dir", dir.to_str().unwrap()]);
    assert_code(&out, 0);
    let text = stdout(&out);
    for name in [
        "channel.json",
        "code.json",
        "ska_summary.json",
        "pcc_summary.json",
        "secrecy.json",
        "supersource.json",
    ] {
        assert!(text.contains(name), "report omits {name}:\n{text}");
    }
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, code) = make_toy(dir);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for run_dir in [&a, &b] {
        for proto in ["ska", "pcc"] {
            let out = run(&[
                proto,
                "--channel",
                &channel,
                "--code",
                &code,
                "--trials",
                "20",
                "--seed",
                "42",
                "--dump-secrets",
                "--out",
                run_dir.to_str().unwrap(),
            ]);
            assert_code(&out, 0);
        }
    }
    for name in [
        "ska_trials.csv",
        "ska_summary.json",
        "ska_transcripts.json",
        "pcc_trials.csv",
        "pcc_summary.json",
        "pcc_transcripts.json",
    ] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical reruns");
    }
}

#[test]
fn secrets_stay_out_of_reports_unless_requested() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, code) = make_toy(dir);
    let out = run(&[
        "ska", "--channel", &channel, "--code", &code, "--trials", "10", "--seed", "5", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(!dir.join("ska_transcripts.json").exists());
    let summary = std::fs::read_to_string(dir.join("ska_summary.json")).unwrap();
    let csv = std::fs::read_to_string(dir.join("ska_trials.csv")).unwrap();
    for text in [&summary, &csv] {
        assert!(!text.contains("key_alice"));
        assert!(!text.contains("\"x\""));
    }
}

#[test]
fn missing_seed_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, code) = make_toy(dir);
    for args in [
        vec!["ska", "--channel", &channel, "--code", &code, "--out", dir.to_str().unwrap()],
        vec!["pcc", "--channel", &channel, "--code", &code, "--out", dir.to_str().unwrap()],
        vec![
            "construct",
            "--channel",
            &channel,
            "--l",
            "4",
            "--m",
            "2",
            "--eps1",
            "0.2",
            "--eps2",
            "0.2",
            "--mode",
            "mc",
            "--out",
            dir.to_str().unwrap(),
        ],
    ] {
        let out = run(&args);
        assert_code(&out, 2);
    }
}

#[test]
fn code_built_for_another_channel_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (_, code) = make_toy(dir);
    let other = tmp.path().join("other");
    let out = run(&[
        "channel",
        "make",
        "--bsc-cascade",
        "0.2,0.3",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let out = run(&[
        "ska",
        "--channel",
        &path_str(&other, "channel.json"),
        "--code",
        &code,
        "--trials",
        "5",
        "--seed",
        "1",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn oversized_exact_secrecy_refuses_with_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, _) = make_toy(dir);
    let out = run(&[
        "construct",
        "--channel",
        &channel,
        "--l",
        "16",
        "--m",
        "8",
        "--eps1",
        "0.2",
        "--eps2",
        "0.2",
        "--mode",
        "mc",
        "--trials",
        "500",
        "--seed",
        "5",
        "--keep-profiles",
        "--name",
        "big.json",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let big = path_str(dir, "big.json");
    let out = run(&[
        "analyze", "secrecy", "--channel", &channel, "--code", &big, "--exact", "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 3);
    // Without --exact the command succeeds and simply omits the value.
    let out = run(&[
        "analyze", "secrecy", "--channel", &channel, "--code", &big, "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let secrecy: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("secrecy.json")).unwrap()).unwrap();
    assert!(secrecy["exact_l1"].is_null());
}

#[test]
fn erasure_polarization_table_has_shrinking_middle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(&[
        "analyze",
        "polarization",
        "--bec",
        "0.5",
        "--ns",
        "64..512",
        "--eps",
        "0.1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let csv = std::fs::read_to_string(dir.join("polarization.csv")).unwrap();
    let fractions: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(fractions.len(), 4);
    for pair in fractions.windows(2) {
        assert!(pair[1] < pair[0], "undecided fraction must shrink: {fractions:?}");
    }
}

#[test]
fn single_message_round_trips_and_reduced_public_is_narrower() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (channel, code) = make_toy(dir);
    let out = run(&[
        "pcc", "--channel", &channel, "--code", &code, "--message", "1:01", "--seed", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("delivered true"));
    let full: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("pcc_transcript.json")).unwrap())
            .unwrap();
    let full_width: usize = full["public"][0]
        .as_str()
        .unwrap()
        .split(':')
        .next()
        .unwrap()
        .parse()
        .unwrap();

    let reduced_dir = tmp.path().join("reduced");
    let out = run(&[
        "pcc",
        "--channel",
        &channel,
        "--code",
        &code,
        "--message",
        "1:01",
        "--seed",
        "3",
        "--reduce-public",
        "--out",
        reduced_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("delivered true"));
    let reduced: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(reduced_dir.join("pcc_transcript.json")).unwrap(),
    )
    .unwrap();
    let reduced_width: usize = reduced["public"][0]
        .as_str()
        .unwrap()
        .split(':')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        reduced_width < full_width,
        "reduced {reduced_width} vs full {full_width}"
    );
    assert_eq!(reduced["message"], full["message"]);
}
