//! Runtime configuration: flat `section.key = value` files with `#`
//! comments, plus `--set section.key=value` overrides. Every key has a
//! default; unknown keys are errors.

use anyhow::{anyhow, bail, Context, Result};
use std::path::Path;

use rado_core::odometry::{IcpConfig, OdometryConfig};
use rado_core::prefilter::FilterConfig;
use rado_core::register::RegistrationConfig;
use rado_core::sim::SimConfig;
use rado_core::surface::{SmoothingMode, SurfaceConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub filter_k: usize,
    pub filter_z_min: f64,
    pub filter_min_range_bin: usize,
    pub motion_compensate: bool,
    pub surface_resolution: f64,
    pub surface_min_points: usize,
    pub surface_smoothing: SmoothingMode,
    pub register_radius: f64,
    pub register_huber_delta: f64,
    pub register_max_iters: usize,
    pub register_tol: f64,
    pub register_min_corr: usize,
    pub icp_enabled: bool,
    pub icp_fitness_threshold: f64,
    pub icp_max_corr_dist: f64,
    pub icp_max_iters: usize,
    pub odometry_window_size: usize,
    pub odometry_keyframe_min_translation: f64,
    pub odometry_keyframe_min_rotation_deg: f64,
    pub sim_azimuth_count: usize,
    pub sim_range_bins: usize,
    pub sim_range_resolution: f64,
    pub sim_sweep_duration: f64,
    pub sim_noise_std: f64,
    pub sim_speckle_prob: f64,
    pub sim_seed: u64,
    pub eval_rpe_delta: usize,
    pub eval_segments: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filter_k: 12,
            filter_z_min: 55.0,
            filter_min_range_bin: 0,
            motion_compensate: true,
            surface_resolution: 3.5,
            surface_min_points: 2,
            surface_smoothing: SmoothingMode::None,
            register_radius: 3.5,
            register_huber_delta: 0.1,
            register_max_iters: 50,
            register_tol: 1e-8,
            register_min_corr: 10,
            icp_enabled: true,
            icp_fitness_threshold: 1.0,
            icp_max_corr_dist: 2.0,
            icp_max_iters: 30,
            odometry_window_size: 4,
            odometry_keyframe_min_translation: 1.5,
            odometry_keyframe_min_rotation_deg: 5.0,
            sim_azimuth_count: 400,
            sim_range_bins: 1000,
            sim_range_resolution: 0.1,
            sim_sweep_duration: 0.25,
            sim_noise_std: 5.0,
            sim_speckle_prob: 0.01,
            sim_seed: 42,
            eval_rpe_delta: 1,
            eval_segments: vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0],
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional config file, then `--set` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut config = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            config.apply_text(&text)?;
        }
        for entry in overrides {
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects section.key=value, got {entry:?}"))?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", line_no + 1))?;
            self.apply(key.trim(), value.trim())
                .with_context(|| format!("line {}", line_no + 1))?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<F: std::str::FromStr>(key: &str, value: &str) -> Result<F> {
            value.parse().map_err(|_| anyhow!("invalid value for {key}: {value:?}"))
        }
        match key {
            "filter.k" => self.filter_k = parse(key, value)?,
            "filter.z_min" => self.filter_z_min = parse(key, value)?,
            "filter.min_range_bin" => self.filter_min_range_bin = parse(key, value)?,
            "motion.compensate" => self.motion_compensate = parse(key, value)?,
            "surface.resolution" => self.surface_resolution = parse(key, value)?,
            "surface.min_points" => self.surface_min_points = parse(key, value)?,
            "surface.smoothing" => {
                self.surface_smoothing = SmoothingMode::parse(value)
                    .ok_or_else(|| anyhow!("surface.smoothing must be none, gaussian or symmetric"))?
            }
            "register.radius" => self.register_radius = parse(key, value)?,
            "register.huber_delta" => self.register_huber_delta = parse(key, value)?,
            "register.max_iters" => self.register_max_iters = parse(key, value)?,
            "register.tol" => self.register_tol = parse(key, value)?,
            "register.min_corr" => self.register_min_corr = parse(key, value)?,
            "icp.enabled" => self.icp_enabled = parse(key, value)?,
            "icp.fitness_threshold" => self.icp_fitness_threshold = parse(key, value)?,
            "icp.max_corr_dist" => self.icp_max_corr_dist = parse(key, value)?,
            "icp.max_iters" => self.icp_max_iters = parse(key, value)?,
            "odometry.window_size" => self.odometry_window_size = parse(key, value)?,
            "odometry.keyframe_min_translation" => {
                self.odometry_keyframe_min_translation = parse(key, value)?
            }
            "odometry.keyframe_min_rotation_deg" => {
                self.odometry_keyframe_min_rotation_deg = parse(key, value)?
            }
            "sim.azimuth_count" => self.sim_azimuth_count = parse(key, value)?,
            "sim.range_bins" => self.sim_range_bins = parse(key, value)?,
            "sim.range_resolution" => self.sim_range_resolution = parse(key, value)?,
            "sim.sweep_duration" => self.sim_sweep_duration = parse(key, value)?,
            "sim.noise_std" => self.sim_noise_std = parse(key, value)?,
            "sim.speckle_prob" => self.sim_speckle_prob = parse(key, value)?,
            "sim.seed" => self.sim_seed = parse(key, value)?,
            "eval.rpe_delta" => self.eval_rpe_delta = parse(key, value)?,
            "eval.segments" => {
                let mut segments = Vec::new();
                for part in value.split(',') {
                    segments.push(parse::<f64>(key, part.trim())?);
                }
                if segments.is_empty() || segments.iter().any(|s| !(*s > 0.0)) {
                    bail!("eval.segments must be a comma-separated list of positive lengths");
                }
                self.eval_segments = segments;
            }
            _ => bail!("unknown config key: {key}"),
        }
        Ok(())
    }

    /// All keys and values in file syntax; parses back to the same config.
    pub fn dump(&self) -> String {
        let segments: Vec<String> =
            self.eval_segments.iter().map(|s| s.to_string()).collect();
        format!(
            "filter.k = {}\n\
             filter.z_min = {}\n\
             filter.min_range_bin = {}\n\
             motion.compensate = {}\n\
             surface.resolution = {}\n\
             surface.min_points = {}\n\
             surface.smoothing = {}\n\
             register.radius = {}\n\
             register.huber_delta = {}\n\
             register.max_iters = {}\n\
             register.tol = {}\n\
             register.min_corr = {}\n\
             icp.enabled = {}\n\
             icp.fitness_threshold = {}\n\
             icp.max_corr_dist = {}\n\
             icp.max_iters = {}\n\
             odometry.window_size = {}\n\
             odometry.keyframe_min_translation = {}\n\
             odometry.keyframe_min_rotation_deg = {}\n\
             sim.azimuth_count = {}\n\
             sim.range_bins = {}\n\
             sim.range_resolution = {}\n\
             sim.sweep_duration = {}\n\
             sim.noise_std = {}\n\
             sim.speckle_prob = {}\n\
             sim.seed = {}\n\
             eval.rpe_delta = {}\n\
             eval.segments = {}\n",
            self.filter_k,
            self.filter_z_min,
            self.filter_min_range_bin,
            self.motion_compensate,
            self.surface_resolution,
            self.surface_min_points,
            self.surface_smoothing.name(),
            self.register_radius,
            self.register_huber_delta,
            self.register_max_iters,
            self.register_tol,
            self.register_min_corr,
            self.icp_enabled,
            self.icp_fitness_threshold,
            self.icp_max_corr_dist,
            self.icp_max_iters,
            self.odometry_window_size,
            self.odometry_keyframe_min_translation,
            self.odometry_keyframe_min_rotation_deg,
            self.sim_azimuth_count,
            self.sim_range_bins,
            self.sim_range_resolution,
            self.sim_sweep_duration,
            self.sim_noise_std,
            self.sim_speckle_prob,
            self.sim_seed,
            self.eval_rpe_delta,
            segments.join(","),
        )
    }

    pub fn odometry_config(&self) -> OdometryConfig<f64> {
        OdometryConfig {
            filter: FilterConfig {
                k_strongest: self.filter_k,
                z_min: self.filter_z_min,
                min_range_bin: self.filter_min_range_bin,
            },
            motion: rado_core::motion::CompensationConfig { enabled: self.motion_compensate },
            surface: SurfaceConfig {
                resolution_m: self.surface_resolution,
                min_points: self.surface_min_points,
                smoothing: self.surface_smoothing,
            },
            register: RegistrationConfig {
                correspondence_radius_m: self.register_radius,
                huber_delta: self.register_huber_delta,
                max_iterations: self.register_max_iters,
                convergence_tol: self.register_tol,
                min_correspondences: self.register_min_corr,
            },
            icp: IcpConfig {
                enabled: self.icp_enabled,
                fitness_threshold: self.icp_fitness_threshold,
                max_corr_dist_m: self.icp_max_corr_dist,
                max_iterations: self.icp_max_iters,
            },
            keyframe_min_translation_m: self.odometry_keyframe_min_translation,
            keyframe_min_rotation_rad: self.odometry_keyframe_min_rotation_deg.to_radians(),
            window_size: self.odometry_window_size,
        }
    }

    pub fn sim_config(&self) -> SimConfig<f64> {
        SimConfig {
            azimuth_count: self.sim_azimuth_count,
            range_bin_count: self.sim_range_bins,
            range_resolution_m: self.sim_range_resolution,
            sweep_duration_s: self.sim_sweep_duration,
            noise_std: self.sim_noise_std,
            speckle_prob: self.sim_speckle_prob,
            seed: self.sim_seed,
        }
    }
}
