use std::path::Path;
use std::process::{Command, Output};

fn flucmob(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flucmob"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn validate_passes_every_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = flucmob(&["validate"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn run_prints_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = flucmob(&["ssep", "--seed", "3", "--set", "n=8", "--set", "replicas=10"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("model,d,n,grid_m,"));
    assert!(lines.next().unwrap().starts_with("ssep,1,8,,0.1,0.01,"));
    assert!(lines.next().is_none());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_h = flucmob(&["ssep", "--seed", "1", "--set", "h=0.2"], dir.path());
    assert_eq!(bad_h.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_h.stderr).contains("0 < h < t"));

    std::fs::write(dir.path().join("c.cfg"), "seed = 1\nbogus = 3\n").unwrap();
    let unknown = flucmob(&["ssep", "--config", "c.cfg"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("bogus"));

    let no_seed = flucmob(&["brownian"], dir.path());
    assert_eq!(no_seed.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = flucmob(&["ssep", "--config", "nowhere.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = brownian\nn = 100, 200\nh = 0.04, 0.01\nreplicas = 30\nseed = 8\n";
    std::fs::write(dir.path().join("s.cfg"), cfg).unwrap();
    for (w, name) in [("1", "a"), ("3", "b")] {
        let out = flucmob(
            &["sweep", "--config", "s.cfg", "--workers", w, "--out", &format!("{name}.csv"), "--manifest", &format!("{name}.manifest")],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
    let manifest = std::fs::read_to_string(dir.path().join("a.manifest")).unwrap();
    assert!(manifest.contains("config.seed = 8"));
    assert!(manifest.contains("records = 4"));
}

#[test]
fn report_fits_and_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = brownian\nn = 500\nh = 0.01, 0.02, 0.04, 0.08\nreplicas = 40\nseed = 5\n";
    std::fs::write(dir.path().join("r.cfg"), cfg).unwrap();
    let run = flucmob(&["sweep", "--config", "r.cfg", "--out", "r.csv"], dir.path());
    assert!(run.status.success());
    let rep = flucmob(&["report", "r.csv", "--plots", "plots"], dir.path());
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));
    let text = String::from_utf8(rep.stdout).unwrap();
    assert!(text.contains("slope"), "{text}");
    let dat: Vec<_> = std::fs::read_dir(dir.path().join("plots")).unwrap().collect();
    assert!(!dat.is_empty());
}
