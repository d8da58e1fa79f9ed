use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn wedgecheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wedgecheck"))
        .args(args)
        .env_remove("WEDGE_WORKERS")
        .output()
        .expect("binary runs")
}

fn run_with(cfg: &str, args: &[&str]) -> Output {
    let path = config(cfg);
    let mut all = vec!["--config", path.to_str().unwrap()];
    all.extend_from_slice(args);
    wedgecheck(&all)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn dbar_spectrum_is_one_row() {
    let out = run_with("dbar_identity.toml", &["spectrum", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "re,im,mult,chain_lengths\n0,0,1,1\n");
}

#[test]
fn weight_line_exits_one_and_names_the_condition() {
    for cmd in ["spectrum", "check"] {
        let out = run_with("weight_line.toml", &[cmd]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("(9.2)"), "{cmd}");
    }
}

#[test]
fn verdicts_and_exit_codes() {
    let out = run_with("dbar_identity.toml", &["check"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["lopatinskii"]["pass"], false);
    assert_eq!(v["atiyah_bott"]["note"], "Rank equality is necessary, not sufficient");

    let out = run_with("dbar_aps.toml", &["check"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);

    let out = run_with("flat_counterexample.toml", &["check"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(9.3)"));
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[fiber]\nkind = \"point\"\nrank = 0\n").unwrap();
    assert_eq!(wedgecheck(&["--config", bad.to_str().unwrap(), "spectrum"]).status.code(), Some(2));
    assert_eq!(wedgecheck(&["spectrum"]).status.code(), Some(2));
    assert_eq!(wedgecheck(&["--config", "/nonexistent.toml", "check"]).status.code(), Some(2));

    let path = config("dbar_aps.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_wedgecheck"))
        .args(["--config", path.to_str().unwrap(), "spectrum"])
        .env("WEDGE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn workers_do_not_change_reports() {
    let path = config("dbar_aps.toml");
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_wedgecheck"))
            .args(["--config", path.to_str().unwrap(), "check"])
            .env("WEDGE_WORKERS", workers)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("3"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn reports_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = run_with("jordan_aps.toml", &["check", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (a, b) = (read_dir_sorted(dirs[0].path()), read_dir_sorted(dirs[1].path()));
    assert!(a.iter().any(|(n, _)| n.ends_with(".json")));
    assert!(a.iter().any(|(n, _)| n == "roots_plane.csv"));
    assert_eq!(a, b);
}

#[test]
fn oracle_subcommands_pass() {
    for (cfg, args) in [
        ("dbar_identity.toml", vec!["kernel", "--eta=-1", "--oracle"]),
        ("jordan_aps.toml", vec!["pairing", "--oracle"]),
        ("dbar_aps.toml", vec!["trace", "--oracle"]),
        ("dbar_aps.toml", vec!["symbols", "homog"]),
        ("dbar_aps.toml", vec!["symbols", "extend"]),
    ] {
        let out = run_with(cfg, &args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
