//! Timestamped SE(2) pose sequences and the TUM text format.
//!
//! A TUM line is `timestamp x y 0 0 0 sin(theta/2) cos(theta/2)` with
//! space-separated fields at nine significant digits, i.e. a planar pose as
//! a 3D position plus yaw-only quaternion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::geometry::{wrap_angle, Pose2};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedPose<T = f64> {
    pub timestamp_s: T,
    pub pose: Pose2<T>,
}

/// Pose sequence with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory<T = f64> {
    poses: Vec<TimedPose<T>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("timestamps must be strictly increasing (violation at index {0})")]
    NonMonotonic(usize),
}

impl<T: Real> Trajectory<T> {
    pub fn new() -> Self {
        Self { poses: Vec::new() }
    }

    pub fn from_poses(poses: Vec<TimedPose<T>>) -> Result<Self, TrajectoryError> {
        for (i, pair) in poses.windows(2).enumerate() {
            if !(pair[1].timestamp_s > pair[0].timestamp_s) {
                return Err(TrajectoryError::NonMonotonic(i + 1));
            }
        }
        Ok(Self { poses })
    }

    pub fn push(&mut self, timestamp_s: T, pose: Pose2<T>) -> Result<(), TrajectoryError> {
        if let Some(last) = self.poses.last() {
            if !(timestamp_s > last.timestamp_s) {
                return Err(TrajectoryError::NonMonotonic(self.poses.len()));
            }
        }
        self.poses.push(TimedPose { timestamp_s, pose });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[TimedPose<T>] {
        &self.poses
    }

    pub fn get(&self, index: usize) -> &TimedPose<T> {
        &self.poses[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TimedPose<T>> {
        self.poses.iter()
    }
}

/// Formats a value with nine significant digits in plain decimal.
pub fn format_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0.000000000".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = (8 - exponent).clamp(0, 17) as usize;
    format!("{value:.decimals$}")
}

/// Writes a trajectory in TUM format.
pub fn write_tum<T: Real>(trajectory: &Trajectory<T>, path: &Path) -> Result<(), TrajectoryError> {
    let mut writer = BufWriter::new(File::create(path)?);
    for tp in trajectory.iter() {
        let half = tp.pose.theta().to_f64_lossy() * 0.5;
        writeln!(
            writer,
            "{} {} {} 0 0 0 {} {}",
            format_sig9(tp.timestamp_s.to_f64_lossy()),
            format_sig9(tp.pose.x().to_f64_lossy()),
            format_sig9(tp.pose.y().to_f64_lossy()),
            format_sig9(half.sin()),
            format_sig9(half.cos()),
        )?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a TUM trajectory; lines starting with `#` and blank lines are
/// skipped. Only the planar components are used: yaw comes from the (qz, qw)
/// pair.
pub fn read_tum<T: Real>(path: &Path) -> Result<Trajectory<T>, TrajectoryError> {
    let reader = BufReader::new(File::open(path)?);
    let mut trajectory = Trajectory::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(TrajectoryError::Parse {
                line: line_no + 1,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 8];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| TrajectoryError::Parse {
                line: line_no + 1,
                reason: format!("not a number: {field:?}"),
            })?;
        }
        let theta = wrap_angle(2.0 * values[6].atan2(values[7]));
        trajectory
            .push(T::of(values[0]), Pose2::new(T::of(values[1]), T::of(values[2]), T::of(theta)))
            .map_err(|_| TrajectoryError::NonMonotonic(trajectory.len()))?;
    }
    Ok(trajectory)
}
