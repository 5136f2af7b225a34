//! Per-azimuth k-strongest filtering and polar-to-Cartesian conversion.

use crate::geometry::Vec2;
use crate::scalar::Real;
use crate::sweep_io::PolarSweep;

/// Parameters of the k-strongest filter.
#[derive(Clone, Copy, Debug)]
pub struct FilterConfig<T = f64> {
    /// Range bins kept per azimuth.
    pub k_strongest: usize,
    /// Noise floor: only intensities strictly above it survive.
    pub z_min: T,
    /// Bins below this index are discarded (sensor blind zone).
    pub min_range_bin: usize,
}

impl<T: Real> Default for FilterConfig<T> {
    fn default() -> Self {
        Self { k_strongest: 12, z_min: T::of(55.0), min_range_bin: 0 }
    }
}

/// One filtered radar return in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarPoint<T = f64> {
    pub pos: Vec2<T>,
    pub intensity: T,
    pub azimuth_index: usize,
}

/// Cartesian point cloud with per-point intensity and source azimuth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud2<T = f64> {
    pub points: Vec<RadarPoint<T>>,
}

impl<T: Real> PointCloud2<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2<T>> {
        self.points.iter().map(|p| p.pos).collect()
    }
}

/// Bearing of azimuth bin `a` out of `n_a`, in radians.
pub fn azimuth_angle<T: Real>(a: usize, n_a: usize) -> T {
    // a/n_a first keeps theta exact for dyadic fractions of the circle
    (T::of_usize(a) / T::of_usize(n_a)) * T::PI() * T::of(2.0)
}

/// Converts a (range bin, azimuth bin) pair to sensor-frame coordinates.
pub fn bin_to_point<T: Real>(range_bin: usize, azimuth: usize, n_a: usize, gamma: T) -> Vec2<T> {
    let theta = azimuth_angle::<T>(azimuth, n_a);
    let range = T::of_usize(range_bin) * gamma;
    Vec2::new(range * theta.cos(), range * theta.sin())
}

/// Keeps, per azimuth, at most `k` bins with the highest power returns above
/// the noise floor, and converts them to Cartesian points.
///
/// Ties at equal intensity keep the lower range bin. Output is ordered by
/// azimuth, then ascending range bin within each azimuth. An empty cloud is a
/// valid result.
pub fn k_strongest_filter<T: Real>(sweep: &PolarSweep<T>, cfg: &FilterConfig<T>) -> PointCloud2<T> {
    let n_a = sweep.azimuth_count();
    let gamma = sweep.range_resolution_m();
    let mut points = Vec::new();
    let mut candidates: Vec<(usize, T)> = Vec::new();

    for a in 0..n_a {
        let row = sweep.row(a);
        candidates.clear();
        for (d, &z) in row.iter().enumerate().skip(cfg.min_range_bin) {
            if z > cfg.z_min {
                candidates.push((d, z));
            }
        }
        // descending intensity, lower bin first on ties
        candidates.sort_by(|(da, za), (db, zb)| {
            zb.partial_cmp(za).expect("intensities are finite").then(da.cmp(db))
        });
        candidates.truncate(cfg.k_strongest);
        candidates.sort_by_key(|(d, _)| *d);

        for &(d, z) in &candidates {
            points.push(RadarPoint {
                pos: bin_to_point(d, a, n_a, gamma),
                intensity: z,
                azimuth_index: a,
            });
        }
    }

    PointCloud2 { points }
}
