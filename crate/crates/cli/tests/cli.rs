use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chordrep(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordrep"))
        .args(args)
        .current_dir(cwd)
        .env("CHORDREP_WORKERS", "1")
        .output()
        .expect("binary runs")
}

const SMALL: &str = "nodes = 20\nbits = 16\nitems_per_node = 3\nfetches = 100\nrepeats = 2\nseed = 7\n";

#[test]
fn simulate_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL).unwrap();
    let out = chordrep(
        &["simulate", "run.conf", "--set", "algorithm=dyn-block", "-o", "run.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("#meta,version=") && lines[0].contains(",seeds=7 8,config="));
    assert!(lines[1].starts_with("seed,fetches,"));
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("7,100,") && lines[3].starts_with("8,100,"));
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!("{SMALL}axis = s\nvalues = 1,4\nalgorithms = dhash,dyn-successor\noutput = a.csv\n");
    fs::write(dir.path().join("fig6.spec"), spec).unwrap();
    assert!(chordrep(&["sweep", "fig6.spec"], dir.path()).status.success());
    assert!(chordrep(&["sweep", "fig6.spec", "-o", "b.csv"], dir.path())
        .status
        .success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 2 + 4);
}

#[test]
fn override_changes_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL).unwrap();
    let meta = |extra: &[&str]| {
        let mut args = vec!["simulate", "run.conf"];
        args.extend_from_slice(extra);
        let out = chordrep(&args, dir.path());
        assert!(out.status.success());
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(meta(&[]), meta(&[]));
    assert_ne!(meta(&[]), meta(&["--set", "fetches=101"]));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.conf"), "nodes = 1\n").unwrap();
    fs::write(dir.path().join("empty.spec"), "axis = s\nvalues =\n").unwrap();
    fs::write(dir.path().join("order.spec"), "axis = nodes\nvalues = 100,50\n").unwrap();
    assert_eq!(chordrep(&["simulate", "bad.conf"], dir.path()).status.code(), Some(2));
    assert_eq!(
        chordrep(&["simulate", "missing.conf"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(chordrep(&["sweep", "empty.spec"], dir.path()).status.code(), Some(2));
    assert_eq!(chordrep(&["sweep", "order.spec"], dir.path()).status.code(), Some(2));
    assert_eq!(chordrep(&["analyze", "fig9"], dir.path()).status.code(), Some(2));
    assert_eq!(
        chordrep(&["analyze", "fig1", "samples=3"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(chordrep(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_chordrep"))
        .args(["analyze", "probes"])
        .env("CHORDREP_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_probes_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = chordrep(&["analyze", "probes", "s=1,2"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("seeds=none"));
    assert_eq!(&lines[1..], ["s,expected_probes", "1,2", "2,1.3333333333333333"]);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chordrep(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
