//! Per-sweep odometry pipeline: filter, compensate, extract surface points,
//! register against the keyframe window, refine with ICP, update velocity
//! and keyframes.

use std::collections::VecDeque;

use crate::geometry::{Pose2, Vec2, Velocity2};
use crate::motion::{compensate, CompensationConfig};
use crate::prefilter::{k_strongest_filter, FilterConfig};
use crate::register::{icp_refine, register, RegistrationConfig};
use crate::scalar::Real;
use crate::surface::{build_surface_points, SurfaceConfig, SurfacePointSet};
use crate::sweep_io::PolarSweep;

/// Surface-point set of a past scan together with its estimated pose.
#[derive(Clone, Debug)]
pub struct Keyframe<T = f64> {
    pub surface_points: SurfacePointSet<T>,
    pub pose: Pose2<T>,
    pub timestamp_s: T,
}

/// Sliding window of keyframes, newest last, oldest evicted first.
#[derive(Clone, Debug)]
pub struct KeyframeWindow<T = f64> {
    frames: VecDeque<Keyframe<T>>,
    capacity: usize,
}

impl<T: Real> KeyframeWindow<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "keyframe window needs capacity >= 1");
        Self { frames: VecDeque::with_capacity(capacity + 1), capacity }
    }

    pub fn push(&mut self, keyframe: Keyframe<T>) {
        if let Some(last) = self.frames.back() {
            debug_assert!(keyframe.timestamp_s > last.timestamp_s);
        }
        self.frames.push_back(keyframe);
        while self.frames.len() > self.capacity {
            self.frames.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Keyframe<T>> {
        self.frames.iter()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IcpConfig<T = f64> {
    pub enabled: bool,
    /// Mean squared inlier distance must stay below this to accept.
    pub fitness_threshold: T,
    pub max_corr_dist_m: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for IcpConfig<T> {
    fn default() -> Self {
        Self {
            enabled: true,
            fitness_threshold: T::one(),
            max_corr_dist_m: T::of(2.0),
            max_iterations: 30,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdometryConfig<T = f64> {
    pub filter: FilterConfig<T>,
    pub motion: CompensationConfig,
    pub surface: SurfaceConfig<T>,
    pub register: RegistrationConfig<T>,
    pub icp: IcpConfig<T>,
    pub keyframe_min_translation_m: T,
    pub keyframe_min_rotation_rad: T,
    pub window_size: usize,
}

impl<T: Real> Default for OdometryConfig<T> {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            motion: CompensationConfig::default(),
            surface: SurfaceConfig::default(),
            register: RegistrationConfig::default(),
            icp: IcpConfig::default(),
            keyframe_min_translation_m: T::of(1.5),
            keyframe_min_rotation_rad: T::of(5.0f64.to_radians()),
            window_size: 4,
        }
    }
}

/// Per-sweep pipeline record, one row of the diagnostics CSV.
#[derive(Clone, Copy, Debug)]
pub struct SweepDiagnostics<T = f64> {
    pub sweep_index: usize,
    pub timestamp_s: T,
    pub correspondence_count: usize,
    pub final_cost: T,
    /// None when refinement did not run (disabled or first sweep).
    pub icp_fitness: Option<T>,
    pub icp_accepted: bool,
    pub keyframe_created: bool,
    /// Registration degenerated; pose fell back to the motion prediction.
    pub registration_fallback: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum OdometryError {
    #[error("sweeps must arrive in strictly increasing time order")]
    NonMonotonicTimestamp,
}

/// True when the motion since the last keyframe exceeds either threshold.
pub fn should_create_keyframe<T: Real>(
    last_keyframe_pose: &Pose2<T>,
    pose: &Pose2<T>,
    min_translation_m: T,
    min_rotation_rad: T,
) -> bool {
    let rel = last_keyframe_pose.delta_to(pose);
    rel.translation().norm() > min_translation_m || rel.theta().abs() > min_rotation_rad
}

/// Mutable odometry pipeline state; feed sweeps in time order.
pub struct OdometryState<T = f64> {
    config: OdometryConfig<T>,
    window: KeyframeWindow<T>,
    previous_pose: Option<Pose2<T>>,
    previous_relative: Pose2<T>,
    velocity: Velocity2<T>,
    previous_means: Vec<Vec2<T>>,
    previous_time: Option<T>,
    last_keyframe_pose: Pose2<T>,
    sweep_index: usize,
}

impl<T: Real> OdometryState<T> {
    pub fn new(config: OdometryConfig<T>) -> Self {
        let window = KeyframeWindow::new(config.window_size);
        Self {
            config,
            window,
            previous_pose: None,
            previous_relative: Pose2::identity(),
            velocity: Velocity2::zero(),
            previous_means: Vec::new(),
            previous_time: None,
            last_keyframe_pose: Pose2::identity(),
            sweep_index: 0,
        }
    }

    pub fn config(&self) -> &OdometryConfig<T> {
        &self.config
    }

    pub fn velocity(&self) -> Velocity2<T> {
        self.velocity
    }

    pub fn keyframes(&self) -> &KeyframeWindow<T> {
        &self.window
    }

    /// Runs the full pipeline on one sweep, returning the estimated pose of
    /// the sweep center in the odometry frame.
    pub fn process_sweep(
        &mut self,
        sweep: &PolarSweep<T>,
    ) -> Result<(Pose2<T>, SweepDiagnostics<T>), OdometryError> {
        let time = sweep.sweep_center_time_s();
        if let Some(prev) = self.previous_time {
            if !(time > prev) {
                return Err(OdometryError::NonMonotonicTimestamp);
            }
        }

        let cloud = k_strongest_filter(sweep, &self.config.filter);
        let cloud = if self.config.motion.enabled {
            compensate(&cloud, &self.velocity, sweep.sweep_duration_s(), sweep.azimuth_count())
        } else {
            cloud
        };
        let (surface, _drops) = build_surface_points(
            &cloud,
            self.config.surface.resolution_m,
            self.config.filter.z_min,
            self.config.surface.min_points,
            self.config.surface.smoothing,
            Vec2::zero(),
        );

        let index = self.sweep_index;
        self.sweep_index += 1;

        let Some(previous_pose) = self.previous_pose else {
            // first sweep bootstraps the odometry frame and keyframe 0
            let pose = Pose2::identity();
            self.previous_means = surface.means();
            self.window.push(Keyframe {
                surface_points: surface,
                pose,
                timestamp_s: time,
            });
            self.previous_pose = Some(pose);
            self.previous_time = Some(time);
            self.last_keyframe_pose = pose;
            let diagnostics = SweepDiagnostics {
                sweep_index: index,
                timestamp_s: time,
                correspondence_count: 0,
                final_cost: T::zero(),
                icp_fitness: None,
                icp_accepted: false,
                keyframe_created: true,
                registration_fallback: false,
            };
            return Ok((pose, diagnostics));
        };

        let guess = previous_pose.compose(&self.previous_relative);
        let keyframe_refs: Vec<(&SurfacePointSet<T>, Pose2<T>)> =
            self.window.iter().map(|kf| (&kf.surface_points, kf.pose)).collect();

        let (mut pose, correspondence_count, final_cost, fallback) = if surface.is_empty() {
            (guess, 0, T::infinity(), true)
        } else {
            match register(&surface, &keyframe_refs, &guess, &self.config.register) {
                Ok(result) => {
                    (result.pose, result.correspondence_count, result.final_cost, false)
                }
                Err(_) => (guess, 0, T::infinity(), true),
            }
        };

        let mut icp_fitness = None;
        let mut icp_accepted = false;
        if self.config.icp.enabled {
            let relative_initial = previous_pose.delta_to(&pose);
            let current_means = surface.means();
            let outcome = icp_refine(
                &current_means,
                &self.previous_means,
                relative_initial,
                self.config.icp.fitness_threshold,
                self.config.icp.max_corr_dist_m,
                self.config.icp.max_iterations,
                self.config.register.min_correspondences,
            );
            icp_fitness = Some(outcome.fitness);
            icp_accepted = outcome.accepted;
            if outcome.accepted {
                pose = previous_pose.compose(&outcome.pose);
            }
        }

        let dt = time - self.previous_time.expect("set after first sweep");
        let relative = previous_pose.delta_to(&pose);
        self.velocity = Velocity2::from_pose_delta(&relative, dt);

        let keyframe_created = should_create_keyframe(
            &self.last_keyframe_pose,
            &pose,
            self.config.keyframe_min_translation_m,
            self.config.keyframe_min_rotation_rad,
        );
        self.previous_means = surface.means();
        if keyframe_created {
            self.window.push(Keyframe { surface_points: surface, pose, timestamp_s: time });
            self.last_keyframe_pose = pose;
        }

        self.previous_relative = relative;
        self.previous_pose = Some(pose);
        self.previous_time = Some(time);

        let diagnostics = SweepDiagnostics {
            sweep_index: index,
            timestamp_s: time,
            correspondence_count,
            final_cost,
            icp_fitness,
            icp_accepted,
            keyframe_created,
            registration_fallback: fallback,
        };
        Ok((pose, diagnostics))
    }
}
