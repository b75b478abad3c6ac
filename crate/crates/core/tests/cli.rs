//! End-to-end checks of the `pulsecorr` binary: output layout, rerun
//! determinism, guard rails, and the replay-DCP baseline.

use std::path::Path;
use std::process::{Command, Output};

fn pulsecorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulsecorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn gen_tiny_dataset(dir: &Path, with_dcp: bool) {
    let mut args = vec![
        "gen-data",
        "--out",
        dir.to_str().unwrap(),
        "--seed-data",
        "11",
        "--train-count",
        "3",
        "--test-count",
        "2",
        "--gamma",
        "0.2",
        "--threads",
        "2",
    ];
    if with_dcp {
        args.push("--with-dcp");
    }
    assert_success(&pulsecorr(&args));
}

#[test]
fn gen_data_is_byte_identical_across_reruns() {
    let base = tempfile::tempdir().unwrap();
    let dir_a = base.path().join("a");
    let dir_b = base.path().join("b");
    gen_tiny_dataset(&dir_a, false);
    gen_tiny_dataset(&dir_b, false);

    for file in ["manifest.json", "train.jsonl", "test.jsonl", "config.toml"] {
        assert_eq!(
            read(&dir_a.join(file)),
            read(&dir_b.join(file)),
            "{file} differs between reruns"
        );
    }
}

#[test]
fn train_eval_scan_pipeline_and_determinism() {
    let base = tempfile::tempdir().unwrap();
    let data = base.path().join("data");
    gen_tiny_dataset(&data, true);

    let train = |out: &Path| {
        assert_success(&pulsecorr(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed-train",
            "3",
            "--epochs",
            "2",
            "--batch-size",
            "2",
            "--hidden-dim",
            "4",
            "--gamma",
            "0.2",
            "--threads",
            "2",
        ]));
    };
    let run_a = base.path().join("run-a");
    let run_b = base.path().join("run-b");
    train(&run_a);
    train(&run_b);
    assert_eq!(
        read(&run_a.join("history.csv")),
        read(&run_b.join("history.csv")),
        "history must be identical under equal seeds"
    );
    assert_eq!(
        read(&run_a.join("checkpoint.json")),
        read(&run_b.join("checkpoint.json")),
        "checkpoints must be identical under equal seeds"
    );
    let history = String::from_utf8(read(&run_a.join("history.csv"))).unwrap();
    assert!(history.starts_with("epoch,train_err,test_fidelity\n"));
    assert_eq!(history.lines().count(), 3);

    let checkpoint = run_a.join("checkpoint.json");

    // Evaluation: model path and the replay-DCP baseline.
    let eval_dir = base.path().join("eval");
    assert_success(&pulsecorr(&[
        "eval",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]));
    let metrics = String::from_utf8(read(&eval_dir.join("metrics.csv"))).unwrap();
    assert!(metrics.starts_with("record,fidelity\n"));
    assert!(metrics.contains("\nmean,"));
    assert!(metrics.contains("\noutliers,"));

    let oracle_dir = base.path().join("eval-oracle");
    let out = pulsecorr(&[
        "eval",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        oracle_dir.to_str().unwrap(),
        "--oracle-dcp",
        "--threads",
        "2",
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let outcome: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    // Stored DCPs were admitted at F >= 0.99, so the replay baseline clears it.
    assert!(outcome["mean_fidelity"].as_f64().unwrap() >= 0.99);

    // Scan: schema stability and rerun determinism.
    let scan = |out: &Path| {
        assert_success(&pulsecorr(&[
            "scan",
            "--checkpoint",
            checkpoint.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--eps",
            "0.1",
            "--threads",
            "2",
        ]));
    };
    let scan_a = base.path().join("scan-a");
    let scan_b = base.path().join("scan-b");
    scan(&scan_a);
    scan(&scan_b);
    for file in ["distributions.csv", "pvalues.csv", "histograms.csv"] {
        assert_eq!(
            read(&scan_a.join(file)),
            read(&scan_b.join(file)),
            "{file} differs between scan reruns"
        );
    }
    let pvalues = String::from_utf8(read(&scan_a.join("pvalues.csv"))).unwrap();
    let header = pvalues.lines().next().unwrap();
    assert!(header.starts_with("coord,x0,"));
    assert_eq!(header.split(',').count(), 65);
    assert_eq!(pvalues.lines().count(), 65);
}

#[test]
fn train_refuses_mismatched_system() {
    let base = tempfile::tempdir().unwrap();
    let data = base.path().join("data");
    gen_tiny_dataset(&data, false);

    let out = pulsecorr(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        base.path().join("run").to_str().unwrap(),
        "--epochs",
        "1",
        "--gamma",
        "0.4",
    ]);
    assert!(!out.status.success(), "training on a mismatched system must fail");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("incompatible"), "stderr: {stderr}");
}

#[test]
fn invalid_inputs_exit_nonzero() {
    let base = tempfile::tempdir().unwrap();

    let out = pulsecorr(&[
        "gen-data",
        "--out",
        base.path().join("x").to_str().unwrap(),
        "--drift",
        "sq",
    ]);
    assert!(!out.status.success());

    let out = pulsecorr(&[
        "eval",
        "--checkpoint",
        base.path().join("missing.json").to_str().unwrap(),
        "--data",
        base.path().to_str().unwrap(),
        "--out",
        base.path().join("y").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn config_file_drives_the_run_and_unknown_keys_fail() {
    let base = tempfile::tempdir().unwrap();
    let config_path = base.path().join("exp.toml");
    std::fs::write(
        &config_path,
        "[system]\ngamma = 0.2\n\n[dataset]\ntrain_count = 2\ntest_count = 1\nseed = 5\n",
    )
    .unwrap();
    let out_dir = base.path().join("data");
    assert_success(&pulsecorr(&[
        "gen-data",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let manifest = String::from_utf8(read(&out_dir.join("manifest.json"))).unwrap();
    assert!(manifest.contains("\"train\": 2"));
    // The echoed config holds the fully-resolved values.
    let echoed = String::from_utf8(read(&out_dir.join("config.toml"))).unwrap();
    assert!(echoed.contains("train_count = 2"));
    assert!(echoed.contains("gamma = 0.2"));

    std::fs::write(&config_path, "[system]\nbogus = 1\n").unwrap();
    let out = pulsecorr(&[
        "gen-data",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        base.path().join("z").to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "unknown config keys must be rejected");
}
