use std::path::Path;
use std::process::{Command, Output};

fn featsel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featsel"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn synth(dir: &Path) {
    let out = featsel(
        &["synth", "--out", "data.csv", "--n0", "40", "--n1", "40", "--features", "50", "--n-informative", "3", "--delta", "1.5", "--seed", "4"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_filter_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert!(data.starts_with("f0,f1,"));
    assert_eq!(data.lines().count(), 81);

    let out = featsel(&["filter", "--data", "data.csv", "--label-col", "label", "--grid", "1,2,3,5", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "curve.csv", "ecdf.csv", "trace.csv", "plots/ecdf.svg", "plots/curve.svg", "plots/trace.svg"] {
        assert!(dir.path().join("res").join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.starts_with("key,value\nexperiment,filter\n"));
    assert!(summary.lines().any(|l| l.starts_with("final_test_mce,0.")));
}

#[test]
fn wrapper_from_config_file_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    std::fs::write(
        dir.path().join("run.conf"),
        "data = data.csv\nlabel_col = label\nprefilter_k = 12\nfolds = 4\nclassifier = lda\nstop = range-min\nmax_size = 5\n",
    )
    .unwrap();
    for (out_dir, threads) in [("a", "1"), ("b", "3")] {
        let out = featsel(&["wrapper", "--config", "run.conf", "--out", out_dir, "--threads", threads], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["summary.csv", "trace.csv", "plots/trace.svg"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let trace = std::fs::read_to_string(dir.path().join("a/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = featsel(&["wrapper", "--data", "d.csv", "--label-col", "y", "--folds", "1"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("folds") && err.contains('1'), "{err}");

    let out = featsel(&["filter", "--data", "missing.csv", "--label-col", "y"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = featsel(&["filter", "--frobnicate"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = featsel(&["--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("filter") && text.contains("wrapper") && text.contains("synth"));
}
