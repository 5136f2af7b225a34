//! Trajectory error metrics: KITTI-style segment errors, RPE and ATE.

use crate::geometry::Pose2;
use crate::register::rigid_align;
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Maximum timestamp difference when associating estimate and ground truth.
pub const TIMESTAMP_TOLERANCE_S: f64 = 0.05;

/// KITTI convention: segment lengths 100..800 m in 100 m steps.
pub const KITTI_SEGMENTS_M: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no timestamp associations within {TIMESTAMP_TOLERANCE_S} s")]
    NoAssociations,
    #[error("trajectory too short: path length {path_length:.3} m, need {required:.3} m")]
    TrajectoryTooShort { path_length: f64, required: f64 },
    #[error("not enough associated poses: have {found}, need {required}")]
    NotEnoughPoses { found: usize, required: usize },
}

/// Greedy one-to-one association of estimate poses to the nearest ground
/// truth timestamp within tolerance. Returns index pairs (est, gt) and the
/// number of skipped estimate poses.
pub fn associate<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
) -> (Vec<(usize, usize)>, usize) {
    let tol = T::of(TIMESTAMP_TOLERANCE_S);
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    let mut j = 0usize;
    for (i, tp) in est.iter().enumerate() {
        if j >= gt.len() {
            skipped += 1;
            continue;
        }
        let t = tp.timestamp_s;
        while j + 1 < gt.len()
            && (gt.get(j + 1).timestamp_s - t).abs() <= (gt.get(j).timestamp_s - t).abs()
        {
            j += 1;
        }
        if (gt.get(j).timestamp_s - t).abs() <= tol {
            pairs.push((i, j));
            j += 1;
        } else {
            skipped += 1;
        }
    }
    (pairs, skipped)
}

/// Per-segment relative error, kept for reporting.
#[derive(Clone, Copy, Debug)]
pub struct SegmentError<T = f64> {
    pub start_index: usize,
    pub length_m: T,
    /// Translation error as a fraction of the segment length.
    pub translation_frac: T,
    /// Rotation error in radians per meter.
    pub rotation_rad_per_m: T,
}

#[derive(Clone, Debug)]
pub struct KittiErrors<T = f64> {
    pub translation_percent: T,
    pub deg_per_100m: T,
    pub segments: Vec<SegmentError<T>>,
}

/// KITTI odometry errors: for every start pose and every segment length,
/// the relative-pose error between segment endpoints, normalized by the
/// nominal length and averaged.
pub fn kitti_errors<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    segment_lengths_m: &[T],
) -> Result<KittiErrors<T>, EvalError> {
    let (pairs, _) = associate(est, gt);
    if pairs.len() < 2 {
        return Err(EvalError::NoAssociations);
    }

    // cumulative ground-truth path length over the associated poses
    let mut dist = Vec::with_capacity(pairs.len());
    dist.push(T::zero());
    for w in pairs.windows(2) {
        let a = gt.get(w[0].1).pose.translation();
        let b = gt.get(w[1].1).pose.translation();
        let last = *dist.last().unwrap();
        dist.push(last + (b - a).norm());
    }
    let total = *dist.last().unwrap();
    let required = segment_lengths_m
        .iter()
        .copied()
        .fold(T::infinity(), |acc, l| acc.min(l));
    if total < required {
        return Err(EvalError::TrajectoryTooShort {
            path_length: total.to_f64_lossy(),
            required: required.to_f64_lossy(),
        });
    }

    let mut segments = Vec::new();
    for start in 0..pairs.len() {
        for &length in segment_lengths_m {
            // first index whose path distance from `start` reaches the length
            let end = dist.partition_point(|&d| d - dist[start] < length);
            if end >= dist.len() {
                continue;
            }
            let (ei, gi) = pairs[start];
            let (ej, gj) = pairs[end];
            let rel_gt = gt.get(gi).pose.delta_to(&gt.get(gj).pose);
            let rel_est = est.get(ei).pose.delta_to(&est.get(ej).pose);
            let error = rel_gt.inverse().compose(&rel_est);
            segments.push(SegmentError {
                start_index: start,
                length_m: length,
                translation_frac: error.translation().norm() / length,
                rotation_rad_per_m: error.theta().abs() / length,
            });
        }
    }
    if segments.is_empty() {
        return Err(EvalError::TrajectoryTooShort {
            path_length: total.to_f64_lossy(),
            required: required.to_f64_lossy(),
        });
    }

    let n = T::of_usize(segments.len());
    let t_mean: T = segments.iter().map(|s| s.translation_frac).sum::<T>() / n;
    let r_mean: T = segments.iter().map(|s| s.rotation_rad_per_m).sum::<T>() / n;
    Ok(KittiErrors {
        translation_percent: t_mean * T::of(100.0),
        deg_per_100m: r_mean * T::of(180.0 / std::f64::consts::PI) * T::of(100.0),
        segments,
    })
}

/// Relative pose error over a fixed frame delta, as the RMS of the
/// translation of `(gt_i^-1 gt_{i+d})^-1 (est_i^-1 est_{i+d})`, in
/// centimeters.
pub fn rpe<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    delta_frames: usize,
) -> Result<T, EvalError> {
    assert!(delta_frames >= 1);
    let (pairs, _) = associate(est, gt);
    if pairs.len() < delta_frames + 1 {
        return Err(EvalError::NotEnoughPoses {
            found: pairs.len(),
            required: delta_frames + 1,
        });
    }
    let mut sum_sq = T::zero();
    let count = pairs.len() - delta_frames;
    for i in 0..count {
        let (ei, gi) = pairs[i];
        let (ej, gj) = pairs[i + delta_frames];
        let rel_gt = gt.get(gi).pose.delta_to(&gt.get(gj).pose);
        let rel_est = est.get(ei).pose.delta_to(&est.get(ej).pose);
        let error = rel_gt.inverse().compose(&rel_est);
        sum_sq += error.translation().norm_sq();
    }
    let rmse_m = (sum_sq / T::of_usize(count)).sqrt();
    Ok(rmse_m * T::of(100.0))
}

/// Absolute trajectory error: RMSE of positions after the best rigid SE(2)
/// alignment of the estimate onto the ground truth, in meters.
pub fn ate<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<T, EvalError> {
    let (pairs, _) = associate(est, gt);
    if pairs.len() < 2 {
        return Err(EvalError::NotEnoughPoses { found: pairs.len(), required: 2 });
    }
    let src: Vec<_> = pairs.iter().map(|&(i, _)| est.get(i).pose.translation()).collect();
    let dst: Vec<_> = pairs.iter().map(|&(_, j)| gt.get(j).pose.translation()).collect();
    let alignment = rigid_align(&src, &dst);
    let mut sum_sq = T::zero();
    for (s, d) in src.iter().zip(&dst) {
        sum_sq += (alignment.transform(*s) - *d).norm_sq();
    }
    Ok((sum_sq / T::of_usize(pairs.len())).sqrt())
}

/// Applies a rigid transform to every pose of a trajectory (left
/// composition), keeping timestamps.
pub fn transform_trajectory<T: Real>(trajectory: &Trajectory<T>, t: &Pose2<T>) -> Trajectory<T> {
    let mut out = Trajectory::new();
    for tp in trajectory.iter() {
        out.push(tp.timestamp_s, t.compose(&tp.pose)).expect("timestamps preserved");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn straight_line(n: usize, spacing: f64, scale: f64) -> Trajectory<f64> {
        let mut traj = Trajectory::new();
        for i in 0..n {
            traj.push(i as f64, Pose2::new(i as f64 * spacing * scale, 0.0, 0.0)).unwrap();
        }
        traj
    }

    #[test]
    fn identical_trajectories_have_zero_errors() {
        let gt = straight_line(201, 1.0, 1.0);
        let est = gt.clone();
        let k = kitti_errors(&est, &gt, &[100.0]).unwrap();
        assert_relative_eq!(k.translation_percent, 0.0, epsilon = 1e-12);
        assert_relative_eq!(k.deg_per_100m, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rpe(&est, &gt, 1).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ate(&est, &gt).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn kitti_ignores_constant_offset() {
        let gt = straight_line(201, 1.0, 1.0);
        let offset = Pose2::new(10.0, -20.0, 0.0);
        let est = transform_trajectory(&gt, &offset);
        let k = kitti_errors(&est, &gt, &[100.0]).unwrap();
        assert_relative_eq!(k.translation_percent, 0.0, epsilon = 1e-9);
        assert_relative_eq!(k.deg_per_100m, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn one_percent_drift_measures_one_percent() {
        // 1000 m ground truth at 1 m/s, estimate stretched 1% along track
        let gt = straight_line(1001, 1.0, 1.0);
        let est = straight_line(1001, 1.0, 1.01);
        let k = kitti_errors(&est, &gt, &KITTI_SEGMENTS_M).unwrap();
        assert_relative_eq!(k.translation_percent, 1.0, epsilon = 1e-6);
        assert_relative_eq!(k.deg_per_100m, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn too_short_trajectory_errors() {
        let gt = straight_line(50, 1.0, 1.0);
        let est = gt.clone();
        let err = kitti_errors(&est, &gt, &[100.0]).unwrap_err();
        assert!(err.to_string().contains("trajectory too short"));
    }

    #[test]
    fn rpe_gauge_invariance() {
        let gt = straight_line(20, 1.0, 1.0);
        let est = transform_trajectory(&gt, &Pose2::new(5.0, 3.0, 1.2));
        assert_relative_eq!(rpe(&est, &gt, 1).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rpe_two_pose_hand_value() {
        // single relative step mismatched by 0.05 m -> 5 cm
        let mut gt = Trajectory::new();
        gt.push(0.0, Pose2::new(0.0, 0.0, 0.0)).unwrap();
        gt.push(1.0, Pose2::new(1.0, 0.0, 0.0)).unwrap();
        let mut est = Trajectory::new();
        est.push(0.0, Pose2::new(0.0, 0.0, 0.0)).unwrap();
        est.push(1.0, Pose2::new(1.05, 0.0, 0.0)).unwrap();
        assert_relative_eq!(rpe(&est, &gt, 1).unwrap(), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn ate_removes_rigid_transform() {
        let mut gt = Trajectory::new();
        for i in 0..40 {
            let a = i as f64 * 0.3;
            gt.push(i as f64, Pose2::new(a.cos() * 5.0, a.sin() * 3.0, a)).unwrap();
        }
        let est = transform_trajectory(&gt, &Pose2::new(-7.0, 2.0, 0.9));
        assert_relative_eq!(ate(&est, &gt).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn ate_three_pose_hand_value() {
        // symmetric displacement: optimal alignment leaves rmse h*sqrt(2)/3
        let mut gt = Trajectory::new();
        gt.push(0.0, Pose2::new(-1.0, 0.0, 0.0)).unwrap();
        gt.push(1.0, Pose2::new(0.0, 0.0, 0.0)).unwrap();
        gt.push(2.0, Pose2::new(1.0, 0.0, 0.0)).unwrap();
        let mut est = Trajectory::new();
        est.push(0.0, Pose2::new(-1.0, 0.0, 0.0)).unwrap();
        est.push(1.0, Pose2::new(0.0, 0.3, 0.0)).unwrap();
        est.push(2.0, Pose2::new(1.0, 0.0, 0.0)).unwrap();
        let expected = 0.3 * std::f64::consts::SQRT_2 / 3.0;
        assert_relative_eq!(ate(&est, &gt).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn association_skips_mismatched_timestamps() {
        let mut gt = Trajectory::new();
        gt.push(0.0, Pose2::identity()).unwrap();
        gt.push(1.0, Pose2::identity()).unwrap();
        let mut est = Trajectory::new();
        est.push(0.01, Pose2::identity()).unwrap();
        est.push(0.5, Pose2::identity()).unwrap();
        est.push(1.01, Pose2::identity()).unwrap();
        let (pairs, skipped) = associate(&est, &gt);
        assert_eq!(pairs, vec![(0, 0), (2, 1)]);
        assert_eq!(skipped, 1);
    }
}
