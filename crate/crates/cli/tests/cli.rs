use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn boundtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = boundtrack(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn simulate_writes_one_file_per_replica_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim_length = 100\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate", "--config", s(&cfg), "--replicas", "2", "--seed", "7", "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--replicas", "2", "--seed", "7", "--out", s(&b)]);
    for r in ["series_000.csv", "series_001.csv"] {
        assert_eq!(data_rows(&a.join(r)), 100);
        assert_eq!(fs::read(a.join(r)).unwrap(), fs::read(b.join(r)).unwrap());
    }
    assert!(!a.join("series_002.csv").exists());
    assert_ne!(
        fs::read(a.join("series_000.csv")).unwrap(),
        fs::read(a.join("series_001.csv")).unwrap()
    );
    let header = fs::read_to_string(a.join("series_000.csv")).unwrap();
    assert!(header.starts_with("t,x,b_true\n1,"));
}

#[test]
fn malformed_data_reports_line_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "t,x\n1,0.5\n2,oops\n3,0.4\n").unwrap();
    let out = boundtrack(&["track", "--data", s(&data), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_method_and_bad_config_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "t,x\n1,0.5\n").unwrap();
    let out = boundtrack(&["track", "--data", s(&data), "--method", "sgd", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown method"));
    let cfg = write_config(dir.path(), "learning_speed = 3\n");
    let out = boundtrack(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim_length = 300\nongd_m = 1\nongd_eta = 1e7\n");
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let data = dir.path().join("series_000.csv");
    let out = boundtrack(&["track", "--config", s(&cfg), "--data", s(&data), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

fn first_times(path: &Path) -> Vec<i64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn tracking_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim_length = 2100\nngd_iterations = 100\nongd_m = 50\n");
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let data = dir.path().join("series_000.csv");
    for m in ["ongd", "rmle_b", "rmle_1", "ngd"] {
        ok(&["track", "--config", s(&cfg), "--data", s(&data), "--method", m, "--out", s(dir.path())]);
    }
    // t is 1-based: with p = 1 and m = 50 the first update happens at 0-based index 50
    assert_eq!(first_times(&dir.path().join("trajectory_ongd.csv"))[0], 51);
    assert_eq!(first_times(&dir.path().join("trajectory_rmle_b.csv"))[0], 1000);
    let ngd = fs::read_to_string(dir.path().join("trajectory_ngd.csv")).unwrap();
    let rows: Vec<&str> = ngd.lines().skip(1).collect();
    assert!(rows[0].starts_with("1000,"));
    let params = |l: &str| l.split(',').skip(1).take(4).collect::<Vec<_>>().join(",");
    let changes: Vec<&str> = rows
        .windows(2)
        .filter(|w| params(w[0]) != params(w[1]))
        .map(|w| w[1].split(',').next().unwrap())
        .collect();
    assert_eq!(changes, vec!["1500", "2000"]);
}

#[test]
fn full_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim_length = 1500\nforecast_start = 1200\nrmle_warmup = 500\nngd_iterations = 200\n",
    );
    let c = s(&cfg);
    ok(&["simulate", "--config", c, "--out", s(dir.path())]);
    let data = dir.path().join("series_000.csv");
    let d = s(&data);
    let out = dir.path().join("run");
    ok(&["track", "--config", c, "--data", d, "--method", "ongd", "--out", s(&out)]);
    let traj = out.join("trajectory_ongd.csv");
    ok(&["forecast", "--config", c, "--data", d, "--method", "ongd", "--trajectory", s(&traj), "--out", s(&out)]);
    for m in ["climatology", "persistence", "ideal", "rmle_b"] {
        ok(&["forecast", "--config", c, "--data", d, "--method", m, "--out", s(&out)]);
    }
    let mut files = Vec::new();
    for m in ["ongd", "climatology", "persistence", "ideal", "rmle_b"] {
        let f = out.join(format!("forecasts_{m}.csv"));
        assert_eq!(data_rows(&f), 300);
        let text = fs::read_to_string(&f).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1200,1201,"));
        files.push(f);
    }
    let eval = dir.path().join("eval");
    let mut args = vec!["evaluate", "--config", c, "--data", d, "--out", s(&eval)];
    for f in &files {
        args.push("--forecasts");
        args.push(s(f));
    }
    let stdout = ok(&args);
    assert!(stdout.contains("ongd: mean CRPS"));
    let report = fs::read_to_string(eval.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 6);
    let pit: u64 = fs::read_to_string(eval.join("pit_ongd.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(pit, 300);
    assert_eq!(data_rows(&eval.join("crps_climatology.csv")), 300);
    assert!(data_rows(&eval.join("marginal_ideal.csv")) > 10);
    let imp = fs::read_to_string(eval.join("improvements.csv")).unwrap();
    assert!(imp.contains("ongd,climatology,"));

    // rerunning forecast from the same inputs gives identical bytes
    let again = dir.path().join("again");
    ok(&["forecast", "--config", c, "--data", d, "--method", "ongd", "--trajectory", s(&traj), "--out", s(&again)]);
    assert_eq!(
        fs::read(out.join("forecasts_ongd.csv")).unwrap(),
        fs::read(again.join("forecasts_ongd.csv")).unwrap()
    );
}

#[test]
fn misaligned_trajectory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim_length = 400\nforecast_start = 300\n");
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let traj = dir.path().join("traj.csv");
    fs::write(&traj, "t,lambda_1,sigma2,nu,b_hat,b_tilde,loss\n9999,0.9,1,1.5,1,1,0\n").unwrap();
    let data = dir.path().join("series_000.csv");
    let out = boundtrack(&[
        "forecast", "--config", s(&cfg), "--data", s(&data), "--trajectory", s(&traj), "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn backtest_writes_choice_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim_length = 3000\nvalidation_start = 1000\ntest_start = 2000\ngrid_m = 20, 50\ngrid_eta = 0.001\n",
    );
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let data = dir.path().join("series_000.csv");
    let stdout = ok(&["backtest", "--config", s(&cfg), "--data", s(&data), "--out", s(dir.path())]);
    assert!(stdout.contains("chosen"));
    assert_eq!(data_rows(&dir.path().join("grid.csv")), 2);
    let chosen = fs::read_to_string(dir.path().join("chosen.csv")).unwrap();
    assert!(chosen.contains("test_crps_pct"));
    assert_eq!(data_rows(&dir.path().join("crps_ongd.csv")), 1000);
    let cfg = write_config(dir.path(), "sim_length = 3000\ngrid_m = \n");
    let out = boundtrack(&["backtest", "--config", s(&cfg), "--data", s(&data), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
