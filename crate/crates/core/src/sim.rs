//! Synthetic spinning-radar simulator.
//!
//! Worlds are sets of point landmarks (walls are dense landmark chains).
//! Each azimuth of a sweep is rendered at its own capture time from the
//! interpolated robot pose, so sweeps are motion-distorted by construction,
//! with the same per-azimuth timing the motion-compensation stage inverts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Pose2, Vec2};
use crate::motion::azimuth_time_offset;
use crate::scalar::Real;
use crate::sweep_io::{save_sweep, PolarSweep, SweepError};
use crate::trajectory::{write_tum, Trajectory, TrajectoryError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmark<T = f64> {
    pub pos: Vec2<T>,
    /// Peak intensity deposited at the landmark's range bin, 1..=255.
    pub reflectivity: T,
}

/// Point-landmark world.
#[derive(Clone, Debug, Default)]
pub struct World<T = f64> {
    landmarks: Vec<Landmark<T>>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("world parse error on line {line}: {reason}")]
    WorldParse { line: usize, reason: String },
    #[error("reflectivity out of range [1, 255] at landmark {0}")]
    BadReflectivity(usize),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("trajectory must contain at least one pose")]
    EmptyTrajectory,
}

impl<T: Real> World<T> {
    pub fn new(landmarks: Vec<Landmark<T>>) -> Result<Self, SimError> {
        for (i, lm) in landmarks.iter().enumerate() {
            if !(lm.reflectivity >= T::one() && lm.reflectivity <= T::of(255.0)) {
                return Err(SimError::BadReflectivity(i));
            }
        }
        Ok(Self { landmarks })
    }

    pub fn landmarks(&self) -> &[Landmark<T>] {
        &self.landmarks
    }

    /// Axis-aligned bounding rectangle of the landmarks.
    pub fn bounds(&self) -> Option<(Vec2<T>, Vec2<T>)> {
        let first = self.landmarks.first()?;
        let mut min = first.pos;
        let mut max = first.pos;
        for lm in &self.landmarks {
            min.x = min.x.min(lm.pos.x);
            min.y = min.y.min(lm.pos.y);
            max.x = max.x.max(lm.pos.x);
            max.y = max.y.max(lm.pos.y);
        }
        Some((min, max))
    }

    /// Reads `x,y,reflectivity` CSV lines; `#` comments and blanks allowed.
    pub fn load_csv(path: &Path) -> Result<Self, SimError> {
        let reader = BufReader::new(File::open(path)?);
        let mut landmarks = Vec::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(SimError::WorldParse {
                    line: line_no + 1,
                    reason: format!("expected x,y,reflectivity, got {} fields", fields.len()),
                });
            }
            let mut values = [0.0f64; 3];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| SimError::WorldParse {
                    line: line_no + 1,
                    reason: format!("not a number: {field:?}"),
                })?;
            }
            landmarks.push(Landmark {
                pos: Vec2::new(T::of(values[0]), T::of(values[1])),
                reflectivity: T::of(values[2]),
            });
        }
        Self::new(landmarks)
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut writer = BufWriter::new(File::create(path)?);
        for lm in &self.landmarks {
            writeln!(
                writer,
                "{},{},{}",
                lm.pos.x.to_f64_lossy(),
                lm.pos.y.to_f64_lossy(),
                lm.reflectivity.to_f64_lossy()
            )?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimConfig<T = f64> {
    pub azimuth_count: usize,
    pub range_bin_count: usize,
    pub range_resolution_m: T,
    pub sweep_duration_s: T,
    /// Additive Gaussian intensity noise, standard deviation.
    pub noise_std: T,
    /// Per-bin probability of a salt-speckle replacement.
    pub speckle_prob: T,
    pub seed: u64,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            azimuth_count: 400,
            range_bin_count: 1000,
            range_resolution_m: T::of(0.1),
            sweep_duration_s: T::of(0.25),
            noise_std: T::of(5.0),
            speckle_prob: T::of(0.01),
            seed: 42,
        }
    }
}

/// Standard normal sampler over a uniform bit source (Box-Muller pairs).
struct GaussSampler {
    spare: Option<f64>,
}

impl GaussSampler {
    fn new() -> Self {
        Self { spare: None }
    }

    fn sample<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Renders one sweep of `world` seen from `pose_fn`, distorted by the
/// robot's own motion across the sweep window.
///
/// Landmarks deposit a Gaussian range profile (sigma = 1 bin) at their range
/// bin on the azimuth whose bearing is nearest; landmarks beyond the last
/// range bin are ignored. Additive Gaussian noise and salt speckle follow,
/// then values are rounded and clamped to the 8-bit grid. Deterministic for
/// a fixed seed.
pub fn render_sweep<T: Real, F: Fn(T) -> Pose2<T>>(
    world: &World<T>,
    pose_fn: F,
    center_time_s: T,
    cfg: &SimConfig<T>,
) -> PolarSweep<T> {
    let n_a = cfg.azimuth_count;
    let n_r = cfg.range_bin_count;
    let gamma = cfg.range_resolution_m;
    let max_range = T::of_usize(n_r) * gamma;
    let mut grid = vec![T::zero(); n_a * n_r];

    let two_pi = T::PI() + T::PI();
    let bins_per_radian = T::of_usize(n_a) / two_pi;
    for a in 0..n_a {
        let t_a = center_time_s + azimuth_time_offset(a, n_a, cfg.sweep_duration_s);
        let inverse_pose = pose_fn(t_a).inverse();
        let row = &mut grid[a * n_r..(a + 1) * n_r];
        for lm in world.landmarks() {
            let local = inverse_pose.transform(lm.pos);
            let range = local.norm();
            if !(range > T::zero()) || range >= max_range {
                continue;
            }
            let mut bearing = local.y.atan2(local.x);
            if bearing < T::zero() {
                bearing += two_pi;
            }
            let bin = (bearing * bins_per_radian).round().to_f64_lossy() as usize % n_a;
            if bin != a {
                continue;
            }
            let center_bin = range / gamma;
            let center_f64 = center_bin.to_f64_lossy();
            let lo = (center_f64 - 4.0).ceil().max(0.0) as usize;
            let hi = ((center_f64 + 4.0).floor() as usize).min(n_r - 1);
            for (b, slot) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = T::of_usize(b) - center_bin;
                *slot += lm.reflectivity * (-(d * d) * T::of(0.5)).exp();
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gauss = GaussSampler::new();
    let draw_noise = cfg.noise_std > T::zero();
    let draw_speckle = cfg.speckle_prob > T::zero();
    for value in &mut grid {
        if draw_noise {
            *value += cfg.noise_std * T::of(gauss.sample(&mut rng));
        }
        if draw_speckle && T::of(rng.gen::<f64>()) < cfg.speckle_prob {
            *value = T::of(rng.gen::<f64>() * 255.0);
        }
        *value = value.round().max(T::zero()).min(T::of(255.0));
    }

    PolarSweep::new(grid, n_a, n_r, gamma, cfg.sweep_duration_s, center_time_s)
        .expect("simulator output satisfies sweep invariants")
}

/// Pose at an arbitrary time, interpolated (or extrapolated at the ends)
/// between trajectory samples with the constant-velocity convention used by
/// the motion-compensation stage.
pub fn interpolate_pose<T: Real>(trajectory: &Trajectory<T>, time: T) -> Pose2<T> {
    let poses = trajectory.poses();
    assert!(!poses.is_empty(), "cannot interpolate an empty trajectory");
    if poses.len() == 1 {
        return poses[0].pose;
    }
    // segment whose start is the last sample at or before `time`
    let mut k = poses.partition_point(|tp| tp.timestamp_s <= time);
    k = k.saturating_sub(1).min(poses.len() - 2);
    let a = &poses[k];
    let b = &poses[k + 1];
    let s = (time - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
    let rel = a.pose.delta_to(&b.pose);
    let scaled = Pose2::new(rel.x() * s, rel.y() * s, rel.theta() * s);
    a.pose.compose(&scaled)
}

/// Renders one sweep per trajectory pose into `out_dir` as zero-padded
/// `NNNNNN.rps` files plus the ground truth as `gt.tum`.
pub fn generate_sequence<T: Real>(
    world: &World<T>,
    trajectory: &Trajectory<T>,
    cfg: &SimConfig<T>,
    out_dir: &Path,
) -> Result<(), SimError> {
    if trajectory.is_empty() {
        return Err(SimError::EmptyTrajectory);
    }
    std::fs::create_dir_all(out_dir)?;
    for (i, tp) in trajectory.iter().enumerate() {
        let mut sweep_cfg = *cfg;
        sweep_cfg.seed = cfg.seed.wrapping_add(i as u64);
        let sweep = render_sweep(
            world,
            |t| interpolate_pose(trajectory, t),
            tp.timestamp_s,
            &sweep_cfg,
        );
        save_sweep(&sweep, &out_dir.join(format!("{i:06}.rps")))?;
    }
    write_tum(trajectory, &out_dir.join("gt.tum"))?;
    Ok(())
}

pub mod scenario {
    //! Ready-made worlds and trajectories for closed-loop verification.
    //!
    //! Walls are chains of compact bright scatterer clusters (fence panels,
    //! reflectors) rather than uniform continuous lines: point-to-point
    //! matching needs world-anchored surface points, and a featureless
    //! uniform wall is degenerate for any translation component parallel to
    //! it. Isolated post clusters between path and walls act as unambiguous
    //! anchors, like poles and parked cars in urban radar scenes.

    use super::{Landmark, World};
    use crate::geometry::{Pose2, Vec2};
    use crate::scalar::Real;
    use crate::trajectory::Trajectory;

    struct SplitMix(u64);

    impl SplitMix {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn push_cluster<T: Real>(
        landmarks: &mut Vec<Landmark<T>>,
        center: Vec2<f64>,
        along: Vec2<f64>,
        reflectivity: f64,
        points: usize,
        rng: &mut SplitMix,
    ) {
        let half_span = 0.18;
        for k in 0..points {
            let frac = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.5 };
            let offset = (frac * 2.0 - 1.0) * half_span + (rng.next() - 0.5) * 0.06;
            let perp = (rng.next() - 0.5) * 0.15;
            let pos = Vec2::new(
                center.x + along.x * offset - along.y * perp,
                center.y + along.y * offset + along.x * perp,
            );
            landmarks.push(Landmark {
                pos: Vec2::new(T::of(pos.x), T::of(pos.y)),
                reflectivity: T::of(reflectivity),
            });
        }
    }

    fn wall_chain<T: Real>(
        landmarks: &mut Vec<Landmark<T>>,
        from: Vec2<f64>,
        to: Vec2<f64>,
        gap: f64,
        cluster_points: usize,
        rng: &mut SplitMix,
    ) {
        let span = to - from;
        let length = span.norm();
        let dir = span.scale(1.0 / length);
        let mut s = rng.next() * gap * 0.5;
        while s <= length {
            let reflectivity = 235.0 + rng.next() * 20.0;
            push_cluster(landmarks, from + dir.scale(s), dir, reflectivity, cluster_points, rng);
            s += gap * (0.8 + 0.4 * rng.next());
        }
    }

    /// Rectangular wall world (axis-aligned, centered at the origin) made of
    /// scatterer clusters, with isolated post clusters on two interior
    /// rings. `half_width`/`half_height` are the wall half-extents.
    pub fn rectangle_cluster_world<T: Real>(
        half_width: f64,
        half_height: f64,
        cluster_gap: f64,
        posts: usize,
        seed: u64,
    ) -> World<T> {
        let mut rng = SplitMix(seed);
        let mut landmarks = Vec::new();
        let (a, b) = (half_width, half_height);
        let corners =
            [Vec2::new(-a, -b), Vec2::new(a, -b), Vec2::new(a, b), Vec2::new(-a, b)];
        for i in 0..4 {
            wall_chain(&mut landmarks, corners[i], corners[(i + 1) % 4], cluster_gap, 3, &mut rng);
        }
        for i in 0..posts {
            let angle = (i as f64 + rng.next() * 0.4) / posts as f64 * std::f64::consts::TAU;
            let scale = if i % 2 == 0 { 0.35 } else { 0.87 };
            let center = Vec2::new(
                angle.cos() * a * scale + (rng.next() - 0.5) * 1.5,
                angle.sin() * b * scale + (rng.next() - 0.5) * 1.5,
            );
            let along = Vec2::new(angle.cos(), angle.sin()).perp();
            push_cluster(&mut landmarks, center, along, 240.0 + rng.next() * 15.0, 3, &mut rng);
        }
        World::new(landmarks).expect("generated reflectivities are in range")
    }

    /// As [`rectangle_cluster_world`], but the y = -half_height wall carries
    /// denser, more populous clusters: a strong per-cell point-count
    /// imbalance without changing the anchor character of the scene.
    pub fn rectangle_cluster_world_dense_side<T: Real>(
        half_width: f64,
        half_height: f64,
        cluster_gap: f64,
        dense_gap: f64,
        posts: usize,
        seed: u64,
    ) -> World<T> {
        let mut rng = SplitMix(seed);
        let mut landmarks = Vec::new();
        let (a, b) = (half_width, half_height);
        let corners =
            [Vec2::new(-a, -b), Vec2::new(a, -b), Vec2::new(a, b), Vec2::new(-a, b)];
        // south wall first (matches the plain builder's wall order)
        wall_chain(&mut landmarks, corners[0], corners[1], dense_gap, 9, &mut rng);
        for i in 1..4 {
            wall_chain(&mut landmarks, corners[i], corners[(i + 1) % 4], cluster_gap, 3, &mut rng);
        }
        // roadside objects close to the dense wall: their smoothing
        // neighborhoods mix with the high-count wall cells
        let mut s = -a + 3.0;
        while s <= a - 3.0 {
            push_cluster(
                &mut landmarks,
                Vec2::new(s, -b + 1.6),
                Vec2::new(1.0, 0.0),
                240.0 + rng.next() * 15.0,
                3,
                &mut rng,
            );
            s += 6.5 + rng.next() * 1.5;
        }
        for i in 0..posts {
            let angle = (i as f64 + rng.next() * 0.4) / posts as f64 * std::f64::consts::TAU;
            let scale = if i % 2 == 0 { 0.35 } else { 0.87 };
            let center = Vec2::new(
                angle.cos() * a * scale + (rng.next() - 0.5) * 1.5,
                angle.sin() * b * scale + (rng.next() - 0.5) * 1.5,
            );
            let along = Vec2::new(angle.cos(), angle.sin()).perp();
            push_cluster(&mut landmarks, center, along, 240.0 + rng.next() * 15.0, 3, &mut rng);
        }
        World::new(landmarks).expect("generated reflectivities are in range")
    }

    /// Rounded-rectangle loop trajectory, counter-clockwise, starting at
    /// rest on the right side and ramping to cruise speed over `ramp_s`.
    /// One pose per sweep at `interval_s` spacing; the loop closes after
    /// `sweep_count` sweeps.
    pub fn rounded_rectangle_trajectory<T: Real>(
        half_width: f64,
        half_height: f64,
        corner_radius: f64,
        sweep_count: usize,
        interval_s: f64,
        ramp_s: f64,
    ) -> Trajectory<T> {
        let (a, b, r) = (half_width, half_height, corner_radius);
        assert!(r < a && r < b);
        let perimeter = 4.0 * (a - r) + 4.0 * (b - r) + std::f64::consts::TAU * r;
        let total_time = (sweep_count - 1) as f64 * interval_s;
        // distance with a linear ramp to cruise speed equals the perimeter
        let cruise = perimeter / (total_time - ramp_s * 0.5);

        let arc = std::f64::consts::FRAC_PI_2 * r;
        // segments (length, kind) starting at (a, 0) heading +y, CCW
        enum Kind {
            Straight,
            Arc,
        }
        let segments = [
            (b - r, Kind::Straight),
            (arc, Kind::Arc),
            (2.0 * (a - r), Kind::Straight),
            (arc, Kind::Arc),
            (2.0 * (b - r), Kind::Straight),
            (arc, Kind::Arc),
            (2.0 * (a - r), Kind::Straight),
            (arc, Kind::Arc),
            (b - r, Kind::Straight),
        ];

        let pose_at = |distance: f64| -> Pose2<f64> {
            let mut pos = Vec2::new(a, 0.0);
            let mut heading = std::f64::consts::FRAC_PI_2;
            let mut remaining = distance.clamp(0.0, perimeter);
            for (length, kind) in &segments {
                let step = remaining.min(*length);
                match kind {
                    Kind::Straight => {
                        pos = pos + Vec2::new(heading.cos(), heading.sin()).scale(step);
                    }
                    Kind::Arc => {
                        let turn = step / r;
                        let center =
                            pos + Vec2::new(heading.cos(), heading.sin()).perp().scale(r);
                        let start_angle = (pos - center).y.atan2((pos - center).x);
                        let end_angle = start_angle + turn;
                        pos = center + Vec2::new(end_angle.cos(), end_angle.sin()).scale(r);
                        heading += turn;
                    }
                }
                remaining -= step;
                if remaining <= 0.0 {
                    break;
                }
            }
            Pose2::new(pos.x, pos.y, heading)
        };

        let mut trajectory = Trajectory::new();
        for i in 0..sweep_count {
            let t = i as f64 * interval_s;
            let distance = if t < ramp_s {
                cruise * t * t / (2.0 * ramp_s)
            } else {
                cruise * (ramp_s * 0.5 + (t - ramp_s))
            };
            let pose = pose_at(distance);
            trajectory
                .push(T::of(t), Pose2::new(T::of(pose.x()), T::of(pose.y()), T::of(pose.theta())))
                .expect("strictly increasing sweep times");
        }
        trajectory
    }
}
