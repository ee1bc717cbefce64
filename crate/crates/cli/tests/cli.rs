use std::path::Path;
use std::process::{Command, Output};

fn nsbke(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nsbke"));
    cmd.args(args).env_remove("NSBKE_OUT");
    if let Some(dir) = out {
        cmd.env("NSBKE_OUT", dir);
    }
    cmd.output().unwrap()
}

const SMALL: &[&str] = &["--half", "10", "--dt", "0.05", "--paths", "200", "--mc-dt", "0.01"];

#[test]
fn solve_writes_results_into_env_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--preset", "E2", "--horizon", "1", "--method", "pde,mc"];
    args.extend_from_slice(SMALL);
    let out = nsbke(&args, Some(tmp.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "summary.json", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("E2") && stdout.contains("PDE") && stdout.contains("MC"), "{stdout}");

    let cmp = nsbke(&["compare", tmp.path().join("summary.json").to_str().unwrap(), "--abs", "0.1"], None);
    assert_eq!(cmp.status.code(), Some(0), "{}", String::from_utf8_lossy(&cmp.stdout));
}

#[test]
fn obstacle_preset_switches_model() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["--out", tmp.path().to_str().unwrap(), "solve", "--preset", "E2'", "--horizon", "1", "--method", "pde"];
    args.extend_from_slice(SMALL);
    let out = nsbke(&args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("E2'"));
}

#[test]
fn compare_without_pairs_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--preset", "E1", "--long-run", "--method", "pde"];
    args.extend_from_slice(SMALL);
    assert!(nsbke(&args, Some(tmp.path())).status.success());
    let cmp = nsbke(&["compare", tmp.path().join("summary.json").to_str().unwrap()], None);
    assert_eq!(cmp.status.code(), Some(2));
}

#[test]
fn print_config_is_loadable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsbke(&["reproduce", "table2", "--print-config", "--half", "40"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("half_i = 40"), "{text}");
    let path = tmp.path().join("t2.toml");
    std::fs::write(&path, &text).unwrap();
    let again = nsbke(&["reproduce", "table2", "--config", path.to_str().unwrap(), "--print-config"], None);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn bad_input_fails() {
    assert!(!nsbke(&["solve", "--preset", "nope"], None).status.success());
    assert!(!nsbke(&["reproduce", "custom"], None).status.success());
    assert!(!nsbke(&["solve", "--preset", "E1", "--long-run", "--bound", "-1"], None).status.success());
}
