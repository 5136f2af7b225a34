//! Subcommand implementations. Each returns the process exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use rado_core::eval::{ate, kitti_errors, rpe, EvalError};
use rado_core::odometry::OdometryState;
use rado_core::sim::{generate_sequence, World};
use rado_core::sweep_io::load_sweep;
use rado_core::trajectory::{format_sig9, read_tum, write_tum, Trajectory};

use crate::config::RunConfig;

/// Runs odometry over every `.rps` file in `input`, lexicographic order.
pub fn cmd_run(input: &Path, out_dir: &Path, config: &RunConfig) -> Result<u8> {
    let mut sweep_files: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("cannot read input directory {}", input.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "rps"))
        .collect();
    sweep_files.sort();
    if sweep_files.is_empty() {
        bail!("no sweeps found in {}", input.display());
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let trajectory_path = out_dir.join("trajectory.tum");
    let diagnostics_path = out_dir.join("diagnostics.csv");

    let mut state = OdometryState::new(config.odometry_config());
    let mut trajectory: Trajectory<f64> = Trajectory::new();
    let mut diagnostics = BufWriter::new(
        File::create(&diagnostics_path)
            .with_context(|| format!("cannot write {}", diagnostics_path.display()))?,
    );
    writeln!(
        diagnostics,
        "sweep,timestamp_s,correspondences,final_cost,icp_fitness,keyframe,fallback"
    )?;

    let mut fallbacks = 0usize;
    let mut keyframes = 0usize;
    for path in &sweep_files {
        let sweep =
            load_sweep(path).with_context(|| format!("loading {}", path.display()))?;
        let (pose, diag) = state
            .process_sweep(&sweep)
            .with_context(|| format!("processing {}", path.display()))?;
        trajectory.push(diag.timestamp_s, pose)?;
        fallbacks += diag.registration_fallback as usize;
        keyframes += diag.keyframe_created as usize;
        writeln!(
            diagnostics,
            "{},{},{},{},{},{},{}",
            diag.sweep_index,
            format_sig9(diag.timestamp_s),
            diag.correspondence_count,
            format_sig9(diag.final_cost),
            diag.icp_fitness.map(format_sig9).unwrap_or_default(),
            diag.keyframe_created as u8,
            diag.registration_fallback as u8,
        )?;
    }
    diagnostics.flush()?;
    write_tum(&trajectory, &trajectory_path)?;

    println!(
        "processed {} sweeps: {} keyframes, {} registration fallbacks",
        sweep_files.len(),
        keyframes,
        fallbacks
    );
    println!("wrote {}", trajectory_path.display());
    println!("wrote {}", diagnostics_path.display());

    if fallbacks * 2 > sweep_files.len() {
        eprintln!("warning: more than half of the sweeps fell back to the motion prediction");
        return Ok(2);
    }
    Ok(0)
}

/// Compares an estimated TUM trajectory against ground truth.
pub fn cmd_eval(
    est_path: &Path,
    gt_path: &Path,
    out_path: &Path,
    segments_csv: Option<&Path>,
    config: &RunConfig,
    segments_explicit: bool,
) -> Result<u8> {
    let est: Trajectory<f64> = read_tum(est_path)
        .with_context(|| format!("reading estimate {}", est_path.display()))?;
    let gt: Trajectory<f64> =
        read_tum(gt_path).with_context(|| format!("reading ground truth {}", gt_path.display()))?;

    let mut rows: Vec<(String, f64, &str)> = Vec::new();

    let kitti = kitti_errors(&est, &gt, &config.eval_segments);
    match kitti {
        Ok(ref errors) => {
            rows.push(("translation_error".into(), errors.translation_percent, "percent"));
            rows.push(("rotation_error".into(), errors.deg_per_100m, "deg/100m"));
        }
        Err(EvalError::TrajectoryTooShort { .. }) if !segments_explicit => {
            eprintln!(
                "note: trajectory shorter than the smallest segment length; skipping the \
                 translation/rotation error metrics (pass --segments for shorter segments)"
            );
        }
        Err(e) => return Err(e.into()),
    }

    rows.push(("rpe".into(), rpe(&est, &gt, config.eval_rpe_delta)?, "cm"));
    rows.push(("ate".into(), ate(&est, &gt)?, "m"));

    let mut writer = BufWriter::new(
        File::create(out_path).with_context(|| format!("cannot write {}", out_path.display()))?,
    );
    writeln!(writer, "metric,value,unit")?;
    for (metric, value, unit) in &rows {
        writeln!(writer, "{},{},{}", metric, format_sig9(*value), unit)?;
        println!("{metric} {} {unit}", format_sig9(*value));
    }
    writer.flush()?;
    println!("wrote {}", out_path.display());

    if let (Some(path), Ok(errors)) = (segments_csv, &kitti) {
        let mut writer = BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        writeln!(writer, "start_index,length_m,translation_frac,rotation_rad_per_m")?;
        for seg in &errors.segments {
            writeln!(
                writer,
                "{},{},{},{}",
                seg.start_index,
                format_sig9(seg.length_m),
                format_sig9(seg.translation_frac),
                format_sig9(seg.rotation_rad_per_m),
            )?;
        }
        writer.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

/// Renders a sweep sequence for a world and ground-truth trajectory.
pub fn cmd_simulate(
    world_path: &Path,
    traj_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<u8> {
    let world: World<f64> = World::load_csv(world_path)
        .with_context(|| format!("reading world {}", world_path.display()))?;
    let trajectory: Trajectory<f64> = read_tum(traj_path)
        .with_context(|| format!("reading trajectory {}", traj_path.display()))?;
    generate_sequence(&world, &trajectory, &config.sim_config(), out_dir)?;
    println!(
        "wrote {} sweeps and gt.tum to {}",
        trajectory.len(),
        out_dir.display()
    );
    Ok(0)
}
