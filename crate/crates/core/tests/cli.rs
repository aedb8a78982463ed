use std::path::Path;
use std::process::{Command, Output};

fn vfmm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfmm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn vfmm")
}

#[test]
fn single_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = vfmm(
        &[
            "single", "--n", "100", "--levels", "3", "--p", "8", "--seed", "1", "--distribution", "uniform_random",
            "--kernel", "point", "--out-dir", "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["velocities.csv", "error_report.csv", "error_map.csv"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max_rel=") && stdout.contains("fmm/direct="), "{stdout}");
}

#[test]
fn single_high_order_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = vfmm(&["single", "--n", "1000", "--levels", "3", "--p", "30"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rel: f64 = stdout
        .split_whitespace()
        .find_map(|w| w.strip_prefix("max_rel="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rel <= 1e-10, "{stdout}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["single", "--levels", "1"][..],
        &["single", "--kernel", "lamb"],
        &["single", "--distribution", "ring"],
        &["single", "--n", "10", "--kernel", "gaussian", "--sigma", "0"],
        &["frobnicate"],
    ] {
        assert_eq!(vfmm(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    std::fs::write(dir.path().join("bad.cfg"), "n = 10\nlevels = 2\np = 2\nseeds = 1\nwidth = 3\n").unwrap();
    let out = vfmm(&["sweep", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(vfmm(&["single", "--particles", "missing.csv"], dir.path()).status.code(), Some(3));
    assert_eq!(vfmm(&["sweep", "missing.cfg"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("bad.csv"), "x,y,gamma,sigma\n0.1,0.2,oops,0\n").unwrap();
    assert_eq!(vfmm(&["single", "--particles", "bad.csv"], dir.path()).status.code(), Some(3));
}

#[test]
fn gen_then_single_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = vfmm(
        &["gen", "--distribution", "two_patches", "--n", "300", "--seed", "3", "--sigma", "0.01", "--out", "p.csv"],
        dir.path(),
    );
    assert_eq!(g.status.code(), Some(0));
    let s = vfmm(
        &["single", "--particles", "p.csv", "--kernel", "gaussian", "--levels", "3", "--p", "10", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stderr));
    let vel = std::fs::read_to_string(dir.path().join("o/velocities.csv")).unwrap();
    assert_eq!(vel.lines().count(), 301);
}

#[test]
fn sweep_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "n = 100\nlevels = 2, 3\np = 2, 4, 6\nseeds = 1, 2\noracle = always\nout = out/s.csv\n",
    )
    .unwrap();
    let first = vfmm(&["sweep", "s.cfg", "--maps", "--jobs", "3"], dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = dir.path().join("out/s.csv");
    let before = std::fs::read(&csv).unwrap();
    assert_eq!(String::from_utf8_lossy(&before).lines().count(), 13);
    let maps = std::fs::read_dir(dir.path().join("out/s.csv.maps")).unwrap().count();
    assert_eq!(maps, 12);

    let again = vfmm(&["sweep", "s.cfg", "--resume"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stdout).contains("0 computed"));
    assert_eq!(std::fs::read(&csv).unwrap(), before);

    std::fs::write(
        dir.path().join("s.cfg"),
        "n = 100\nlevels = 2, 3\np = 2, 4, 8\nseeds = 1, 2\noracle = always\nout = out/s.csv\n",
    )
    .unwrap();
    assert_eq!(vfmm(&["sweep", "s.cfg", "--resume"], dir.path()).status.code(), Some(2));
}

#[test]
fn timing_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = vfmm(
        &["timing", "--n", "256,512,1024", "--reps", "1", "--direct-cutoff", "512", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,l,p,t_fmm_ms,t_direct_ms,direct_extrapolated");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].ends_with("true"));
}
