//! End-to-end tests of the `rado` binary: subcommands, exit codes, file
//! interfaces.

use std::path::Path;
use std::process::{Command, Output};

use rado_core::geometry::Pose2;
use rado_core::sim::scenario::rectangle_cluster_world;
use rado_core::trajectory::{write_tum, Trajectory};

fn rado(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rado"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_world(path: &Path) {
    rectangle_cluster_world::<f64>(15.0, 15.0, 3.0, 8, 5).save_csv(path).unwrap();
}

fn write_slow_loop_trajectory(path: &Path, sweeps: usize) {
    let mut traj: Trajectory<f64> = Trajectory::new();
    for i in 0..sweeps {
        let t = i as f64 * 0.25;
        traj.push(t, Pose2::new(0.4 * t, 0.0, 0.0)).unwrap();
    }
    write_tum(&traj, path).unwrap();
}

#[test]
fn dump_config_round_trips() {
    let out = rado(&["dump-config"]);
    assert!(out.status.success());
    let dumped = String::from_utf8(out.stdout).unwrap();
    assert!(dumped.contains("filter.k = 12"));
    assert!(dumped.contains("surface.smoothing = none"));

    // feeding the dump back as a config file must be accepted unchanged
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("defaults.cfg");
    std::fs::write(&cfg_path, &dumped).unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = rado(&[
        "run",
        "--input",
        empty.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    // config parses fine; the failure is the empty input dir
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr.contains("no sweeps found"), "stderr: {stderr}");
}

#[test]
fn run_on_empty_directory_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = rado(&["run", "--input", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no sweeps found"));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = rado(&[
        "run",
        "--input",
        dir.path().to_str().unwrap(),
        "--set",
        "filter.bogus=1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown config key"));
}

#[test]
fn simulate_run_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let world_path = dir.path().join("world.csv");
    let traj_path = dir.path().join("path.tum");
    let seq_dir = dir.path().join("seq");
    let run_dir = dir.path().join("run");
    write_world(&world_path);
    write_slow_loop_trajectory(&traj_path, 30);

    let out = rado(&[
        "simulate",
        "--world",
        world_path.to_str().unwrap(),
        "--traj",
        traj_path.to_str().unwrap(),
        "--out",
        seq_dir.to_str().unwrap(),
        "--set",
        "sim.range_bins=400",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let count = std::fs::read_dir(&seq_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "rps"))
        .count();
    assert_eq!(count, 30);
    assert!(seq_dir.join("gt.tum").exists());

    let out = rado(&[
        "run",
        "--input",
        seq_dir.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--set",
        "filter.k=8",
        "--set",
        "filter.z_min=180",
        "--set",
        "surface.resolution=1.2",
        "--set",
        "surface.min_points=4",
        "--set",
        "register.radius=2.0",
        "--set",
        "register.huber_delta=0.05",
        "--set",
        "icp.max_corr_dist=0.2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trajectory = std::fs::read_to_string(run_dir.join("trajectory.tum")).unwrap();
    assert_eq!(trajectory.lines().count(), 30);
    let diagnostics = std::fs::read_to_string(run_dir.join("diagnostics.csv")).unwrap();
    assert!(diagnostics
        .starts_with("sweep,timestamp_s,correspondences,final_cost,icp_fitness,keyframe,fallback"));
    assert_eq!(diagnostics.lines().count(), 31);

    let metrics_path = dir.path().join("metrics.csv");
    let out = rado(&[
        "eval",
        "--est",
        run_dir.join("trajectory.tum").to_str().unwrap(),
        "--gt",
        seq_dir.join("gt.tum").to_str().unwrap(),
        "--out",
        metrics_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(&metrics_path).unwrap();
    assert!(metrics.starts_with("metric,value,unit"));
    assert!(metrics.contains("rpe,"));
    assert!(metrics.contains("ate,"));
}

#[test]
fn eval_identical_trajectories_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.tum");
    write_slow_loop_trajectory(&path, 20);
    let metrics_path = dir.path().join("m.csv");
    let out = rado(&[
        "eval",
        "--est",
        path.to_str().unwrap(),
        "--gt",
        path.to_str().unwrap(),
        "--out",
        metrics_path.to_str().unwrap(),
        "--segments",
        "1.0",
        "--segments-csv",
        dir.path().join("seg.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(&metrics_path).unwrap();
    for line in metrics.lines().skip(1) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(value.abs() < 1e-9, "nonzero metric: {line}");
    }
    assert!(dir.path().join("seg.csv").exists());
}

#[test]
fn eval_mismatched_timestamps_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.tum");
    let b = dir.path().join("b.tum");
    let mut ta: Trajectory<f64> = Trajectory::new();
    let mut tb: Trajectory<f64> = Trajectory::new();
    for i in 0..5 {
        ta.push(i as f64, Pose2::identity()).unwrap();
        tb.push(1000.0 + i as f64, Pose2::identity()).unwrap();
    }
    write_tum(&ta, &a).unwrap();
    write_tum(&tb, &b).unwrap();
    let out = rado(&["eval", "--est", a.to_str().unwrap(), "--gt", b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_explicit_short_segments_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.tum");
    write_slow_loop_trajectory(&path, 10);
    // path is ~0.9 m long; explicit 100 m segments cannot be computed
    let out = rado(&[
        "eval",
        "--est",
        path.to_str().unwrap(),
        "--gt",
        path.to_str().unwrap(),
        "--segments",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("too short"));
}
