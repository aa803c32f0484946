use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clinic-window"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let base = include_str!("../../../configs/default.toml");
    let text = base
        .replace(
            "lambdas = [18.0, 19.0, 19.9, 19.99]",
            &format!("lambdas = [19.0{extra}]"),
        )
        .replace("k_max = 1000", "k_max = 200")
        .replace("reference = { cap = 1000 }", "reference = \"exact\"");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn tables_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let status = bin()
            .args(["tables", "--delay-map", "both", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        runs.push(files(&out));
    }
    assert!(runs[0].iter().any(|(n, _)| n.ends_with("windows_mm.csv")));
    assert!(runs[0].iter().any(|(n, _)| n.starts_with("slots")));
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn unstable_exact_reference_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    // lambda = 25 exceeds mu, so the unbounded reference does not exist.
    let cfg = small_config(tmp.path(), ", 25.0");
    let out = bin()
        .arg("tables")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn strict_run_succeeds_when_every_cell_solves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("o");
    let status = bin()
        .args(["tables", "--strict", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let log = fs::read_to_string(out.join("runlog.jsonl")).unwrap();
    assert!(log.lines().count() > 0);
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "mu = -1.0\n").unwrap();
    let out = bin()
        .args(["tables", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn curves_have_one_column_per_showup() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("curves")
        .arg("--out")
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(tmp.path().join("curves.csv")).unwrap();
    let header = text.lines().next().unwrap();
    for name in ["K0.2", "K0.4", "K0.6", "G", "GS", "PE"] {
        assert!(header.split(',').any(|h| h == name), "{header}");
    }
    assert_eq!(text.lines().count(), 1 + 366);
}
