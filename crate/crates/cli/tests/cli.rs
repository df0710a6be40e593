//! End-to-end checks of the `ddlab` binary: output determinism across
//! thread counts, the theory table, and config error reporting.

use std::io::Write;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddlab"))
}

fn write_cfg(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn sweep_output_is_byte_identical_across_thread_counts() {
    let cfg = write_cfg(
        r#"{"sweep":"samples","p":8,"grid":[16,32,48],"sigma2":0.25,
            "estimator":"dropout_spectral:0.8","gamma_policy":"fixed:0.8",
            "trials":50,"seed":7}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in [1usize, 2, 4].iter().enumerate() {
        for format in ["csv", "json"] {
            let out = dir.path().join(format!("out_{i}.{format}"));
            let status = bin()
                .args([
                    "sweep-samples",
                    "--config",
                    cfg.path().to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--format",
                    format,
                    "--threads",
                    &threads.to_string(),
                ])
                .status()
                .unwrap();
            assert!(status.success());
            outputs.push((format, std::fs::read(out).unwrap()));
        }
    }
    for chunk in outputs.chunks(2).skip(1) {
        assert_eq!(chunk[0].1, outputs[0].1, "csv differs across thread counts");
        assert_eq!(chunk[1].1, outputs[1].1, "json differs across thread counts");
    }
}

#[test]
fn csv_goes_to_stdout_with_version_header() {
    let cfg = write_cfg(
        r#"{"sweep":"spectrum","p":20,"grid":[25,50],"trials":3,"seed":1,"sigma2":0.0}"#,
    );
    let out = bin()
        .args(["spectrum", "--config", cfg.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# ddlab.results.v1");
    assert!(lines.next().unwrap().starts_with("sweep,axis,n,p,k,gamma"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn theory_table_pins_known_values() {
    let out = bin()
        .args([
            "theory", "--n", "1000", "--p", "500", "--sigma2", "0.25", "--b2", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.799679"), "{text}");
    assert!(text.contains("lambda_opt            : 125"), "{text}");
    assert!(text.contains("0.450321"), "{text}");

    let thr = bin()
        .args(["theory", "--n", "500", "--p", "500", "--sigma2", "0.25"])
        .output()
        .unwrap();
    assert!(thr.status.success());
    let text = String::from_utf8(thr.stdout).unwrap();
    assert!(text.contains("undefined at interpolation threshold"), "{text}");

    let under = bin()
        .args(["theory", "--n", "100", "--p", "500", "--sigma2", "0.25"])
        .output()
        .unwrap();
    let text = String::from_utf8(under.stdout).unwrap();
    assert!(text.contains("0.761450"), "{text}");
    assert!(text.contains("1.097710"), "{text}");
}

#[test]
fn unknown_config_field_suggests_key_and_fails() {
    let cfg = write_cfg(r#"{"sweep":"samples","p":8,"grid":[16],"sigma2":0.25,"gama":1}"#);
    let out = bin()
        .args(["sweep-samples", "--config", cfg.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("gama") && err.contains("gamma_policy"), "{err}");
}

#[test]
fn verify_single_check_passes() {
    let out = bin()
        .args(["verify", "--only", "taylor-monotone"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[PASS] taylor-monotone"), "{text}");
}

#[test]
fn env_var_sets_threads_without_changing_output() {
    let cfg = write_cfg(
        r#"{"sweep":"samples","p":6,"grid":[12,24],"sigma2":0.1,
            "estimator":"ols","trials":20,"seed":3}"#,
    );
    let base = bin()
        .args(["sweep-samples", "--config", cfg.path().to_str().unwrap()])
        .output()
        .unwrap();
    let with_env = bin()
        .args(["sweep-samples", "--config", cfg.path().to_str().unwrap()])
        .env("DDLAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(base.status.success() && with_env.status.success());
    assert_eq!(base.stdout, with_env.stdout);
}
