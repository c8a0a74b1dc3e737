use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optsort(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optsort"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn small_scenario(dir: &Path) {
    let out = optsort(
        &[
            "generate",
            "--destinations",
            "12",
            "--chutes",
            "4",
            "--load",
            "400",
            "--waves",
            "2",
            "--wave-size",
            "120",
            "--seed",
            "5",
            "--kind",
            "restricted",
            "--out",
            "s.toml",
        ],
        dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_then_run_writes_every_report() {
    let tmp = tempfile::tempdir().unwrap();
    small_scenario(tmp.path());
    let out = optsort(
        &[
            "run",
            "--scenario",
            "s.toml",
            "--emit-trace",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("OPTSORT"));
    for f in [
        "kpi.csv",
        "plan.toml",
        "staffing.csv",
        "allocation_wave0.csv",
        "allocation_wave1.csv",
        "trace_wave0.csv",
        "report.txt",
    ] {
        assert!(tmp.path().join("o").join(f).is_file(), "missing {f}");
    }
    let kpi = fs::read_to_string(tmp.path().join("o/kpi.csv")).unwrap();
    assert!(kpi.starts_with("algo,scenario,cap_bar,Rc,Rj,St_min,pph,blockages\n"));
}

#[test]
fn greedy_run_has_no_cap_bar() {
    let tmp = tempfile::tempdir().unwrap();
    small_scenario(tmp.path());
    let out = optsort(
        &[
            "run",
            "--scenario",
            "s.toml",
            "--algo",
            "greedy",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let kpi = fs::read_to_string(tmp.path().join("o/kpi.csv")).unwrap();
    assert!(
        kpi.lines()
            .nth(1)
            .unwrap()
            .starts_with("greedy,restricted,,"),
        "{kpi}"
    );
}

#[test]
fn sweep_tune_and_compare_write_their_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    small_scenario(tmp.path());
    let sweep = optsort(
        &[
            "sweep",
            "--scenario",
            "s.toml",
            "--seeds",
            "1..4",
            "--efficiency-range",
            "0.8,1.2",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );
    assert_eq!(
        fs::read_to_string(tmp.path().join("o/sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    let tune = optsort(
        &[
            "tune",
            "--scenario",
            "s.toml",
            "--max-iters",
            "3",
            "--out-dir",
            "o",
        ],
        tmp.path(),
    );
    assert!(
        tune.status.success(),
        "{}",
        String::from_utf8_lossy(&tune.stderr)
    );
    assert!(tmp.path().join("o/tuning.csv").is_file());
    let cmp = optsort(
        &[
            "compare",
            "--scenario",
            "s.toml",
            "--cap-bar",
            "2,3",
            "--out-dir",
            "c",
        ],
        tmp.path(),
    );
    assert!(cmp.status.success());
    assert_eq!(
        fs::read_to_string(tmp.path().join("c/kpi.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = optsort(&["run", "--scenario", "nope.toml"], tmp.path());
    assert_eq!(missing.status.code(), Some(5));
    fs::write(tmp.path().join("bad.toml"), "name = 1\n").unwrap();
    let bad = optsort(&["run", "--scenario", "bad.toml"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    let over = optsort(
        &[
            "generate",
            "--destinations",
            "10",
            "--chutes",
            "2",
            "--load",
            "100000",
            "--out",
            "x.toml",
        ],
        tmp.path(),
    );
    assert!(String::from_utf8_lossy(&over.stderr).contains("warning"));
}
