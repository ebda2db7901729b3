use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn weanpred(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weanpred"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

const SMALL: &str =
    "synth.n_success = 8\nsynth.n_failure = 6\nbo.iterations = 12\nbo.init_random = 4\ncv.repetitions = 3\n";

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_twice_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("small.cfg"), SMALL).unwrap();
    for out in ["a", "b"] {
        let o = weanpred(
            &["--config", "small.cfg", "--seed", "3", "--out", out, "run"],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (
        read_dir_sorted(&tmp.path().join("a")),
        read_dir_sorted(&tmp.path().join("b")),
    );
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "eval_report.csv",
            "eval_report.json",
            "features.csv",
            "model.nusvm",
            "optimization_trace.csv",
            "run_manifest.txt",
            "selection.csv"
        ]
    );
    assert_eq!(a, b);
    let report = String::from_utf8(a[0].1.clone()).unwrap();
    assert!(report.starts_with("# config="));
    assert!(report.contains(" seed=3\n"));
}

#[test]
fn staged_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("small.cfg"), SMALL).unwrap();
    let ok = |args: &[&str]| {
        let o = weanpred(args, dir);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    ok(&["--config", "small.cfg", "--out", "cohort", "synth"]);
    ok(&["--out", "o", "wrangle", "--manifest", "cohort/manifest.csv"]);
    ok(&["--out", "o", "spectrogram", "--manifest", "cohort/manifest.csv"]);
    ok(&["--out", "o", "features", "--manifest", "cohort/manifest.csv"]);
    ok(&["--out", "o", "select", "--features", "o/features.csv"]);
    let best = ok(&[
        "--config",
        "small.cfg",
        "--out",
        "o",
        "optimize",
        "--features",
        "o/features.csv",
    ]);
    assert!(best.starts_with("best "));
    let eval = ok(&[
        "--config",
        "small.cfg",
        "--out",
        "o",
        "evaluate",
        "--features",
        "o/features.csv",
        "--kernel",
        "linear",
    ]);
    assert!(eval.contains("auc,"));
    let diag = ok(&["--out", "o", "compare-interp"]);
    assert!(diag.contains("artifact_linear,"));
    assert!(dir.join("o/wrangled/P001/RR.csv").is_file());
    assert!(dir.join("o/spectrograms/P014/VT.csv").is_file());
    assert!(dir.join("o/interp_psd.csv").is_file());
}

#[test]
fn errors_name_the_stage_and_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let o = weanpred(&["select", "--features", "missing.csv"], dir);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stage `select`") && err.contains("missing.csv"), "{err}");

    fs::write(dir.join("bad.cfg"), "select.k = zero\n").unwrap();
    let o = weanpred(&["--config", "bad.cfg", "compare-interp"], dir);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `config`"));

    fs::write(dir.join("tiny.cfg"), "synth.n_success = 2\nsynth.n_failure = 1\n").unwrap();
    let o = weanpred(&["--config", "tiny.cfg", "run"], dir);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `validate`"));

    let o = weanpred(&["evaluate", "--features", "x.csv", "--kernel", "sigmoid"], dir);
    assert!(!o.status.success());
}
