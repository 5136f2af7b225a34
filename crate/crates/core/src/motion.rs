//! Motion-distortion compensation for filtered point clouds.
//!
//! Azimuths of a spinning radar are captured at different instants while the
//! sensor moves. Each point is projected into the sweep-center frame using
//! the previous velocity estimate under a constant-velocity model.

use crate::geometry::Velocity2;
use crate::prefilter::PointCloud2;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct CompensationConfig {
    pub enabled: bool,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

/// Time offset of azimuth bin `a` relative to the sweep center.
///
/// Spans `[-duration/2, duration/2)` over `a in [0, n_a)`.
pub fn azimuth_time_offset<T: Real>(a: usize, n_a: usize, sweep_duration_s: T) -> T {
    let half = T::of_usize(n_a) * T::of(0.5);
    (T::of_usize(a) - half) * sweep_duration_s / T::of_usize(n_a)
}

/// Projects every point into the sweep-center frame.
///
/// A point captured at offset `dt` is mapped by the constant-velocity
/// displacement over `dt`: rotation by `dt * omega`, then translation by
/// `dt * (vx, vy)`. Intensity and azimuth index are preserved.
pub fn compensate<T: Real>(
    cloud: &PointCloud2<T>,
    velocity: &Velocity2<T>,
    sweep_duration_s: T,
    azimuth_count: usize,
) -> PointCloud2<T> {
    let mut out = cloud.clone();
    for point in &mut out.points {
        let dt = azimuth_time_offset(point.azimuth_index, azimuth_count, sweep_duration_s);
        point.pos = velocity.integrate(dt).transform(point.pos);
    }
    out
}
