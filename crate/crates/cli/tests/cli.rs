//! End-to-end tests that drive the compiled `longview` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn longview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longview"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn run_writes_all_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = longview(&[
            "run",
            "--seeds",
            "3",
            "--ntrain",
            "400",
            "--ntarget",
            "60",
            "--h",
            "1",
            "--k",
            "2",
            "--estimators",
            "soft,mc",
            "--out",
            out.to_str().unwrap(),
        ]);
        let text = stdout_of(&output);
        assert!(text.contains("wrote 6 rows"), "stdout: {text}");
    }
    for name in ["rows.csv", "summary.csv", "summary.md"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let rows = fs::read_to_string(out_a.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 7, "header plus 3 seeds x 2 estimators");
    assert!(rows.starts_with("environment,scenario,estimator,"));
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.conf");
    fs::write(
        &config_path,
        "# toy experiment\n\
         env = toy\n\
         scenario = realizable\n\
         seeds = 2\n\
         n_behavior = 400\n\
         n_target = 60\n\
         estimators = soft # regression only\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = longview(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--seeds",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    stdout_of(&output);
    let rows = fs::read_to_string(out.join("rows.csv")).unwrap();
    // 4 seeds (flag) x 1 estimator (file) + header.
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().skip(1).all(|l| l.contains(",soft,")));
}

#[test]
fn run_rejects_unknown_estimators_and_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = longview(&[
        "run",
        "--estimators",
        "soft,warp-drive",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("warp-drive"), "stderr: {stderr}");

    let config_path = dir.path().join("bad.conf");
    fs::write(&config_path, "n_behaviour = 100\n").unwrap();
    let output = longview(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("n_behaviour"), "stderr: {stderr}");
}

#[test]
fn compare_reproduces_reference_welch_values() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline.txt");
    let candidate = dir.path().join("candidate.txt");
    fs::write(&baseline, "metric\n1.0\n2.0\n3.0\n4.0\n").unwrap();
    fs::write(&candidate, "2.0\n3.0\n4.0\n5.0\n").unwrap();
    let output = longview(&[
        "compare",
        "--baseline",
        baseline.to_str().unwrap(),
        "--candidate",
        candidate.to_str().unwrap(),
    ]);
    let text = stdout_of(&output);
    assert!(text.contains("t = -1.0954"), "stdout: {text}");
    assert!(text.contains("df = 6.00"), "stdout: {text}");
    assert!(text.contains("p = 0.3153"), "stdout: {text}");
    assert!(text.contains("retain the null at alpha 0.05"), "stdout: {text}");
}

#[test]
fn compare_paired_reproduces_reference_values_and_rejects_at_loose_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline.txt");
    let candidate = dir.path().join("candidate.txt");
    fs::write(&baseline, "2.0\n4.0\n6.0\n").unwrap();
    fs::write(&candidate, "1.0\n2.0\n3.0\n").unwrap();
    let run = |alpha: &str| {
        stdout_of(&longview(&[
            "compare",
            "--paired",
            "--alpha",
            alpha,
            "--baseline",
            baseline.to_str().unwrap(),
            "--candidate",
            candidate.to_str().unwrap(),
        ]))
    };
    let text = run("0.05");
    assert!(text.contains("paired t-test: t = 3.4641"), "stdout: {text}");
    assert!(text.contains("p = 0.0742"), "stdout: {text}");
    assert!(text.contains("retain the null"), "stdout: {text}");
    assert!(run("0.1").contains("reject the null"));
}

#[test]
fn compare_rejects_non_numeric_rows() {
    let dir = tempfile::tempdir().unwrap();
    let baseline = dir.path().join("baseline.txt");
    let candidate = dir.path().join("candidate.txt");
    fs::write(&baseline, "1.0\nnot-a-number\n3.0\n").unwrap();
    fs::write(&candidate, "1.0\n2.0\n3.0\n").unwrap();
    let output = longview(&[
        "compare",
        "--baseline",
        baseline.to_str().unwrap(),
        "--candidate",
        candidate.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("not-a-number"));
}

#[test]
fn mdp_export_round_trips_through_the_importer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mdp.csv");
    let output = longview(&["mdp-export", "--out", path.to_str().unwrap()]);
    let text = stdout_of(&output);
    assert!(text.contains("1440 states"), "stdout: {text}");
    let file = fs::File::open(&path).unwrap();
    let spec =
        longview_core::sepsis::import_spec(&mut std::io::BufReader::new(file)).unwrap();
    assert_eq!(spec.n_states, 1440);
    assert_eq!(spec, longview_core::sepsis::build_spec(&Default::default()));
    // A jittered export differs from the nominal kernel.
    let jittered_path = dir.path().join("mdp_jittered.csv");
    stdout_of(&longview(&[
        "mdp-export",
        "--seed",
        "3",
        "--out",
        jittered_path.to_str().unwrap(),
    ]));
    assert_ne!(fs::read(&path).unwrap(), fs::read(&jittered_path).unwrap());
    assert!(exists_nonempty(&jittered_path));
}

fn exists_nonempty(path: &Path) -> bool {
    fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false)
}
