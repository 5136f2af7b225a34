//! Sparse oriented-surface-point extraction on a regular grid.
//!
//! Every occupied grid cell gathers the points within one cell size of its
//! geometric center (so a point can contribute to several cells), computes
//! intensity-weighted first and second moments, optionally smooths them over
//! the 3x3 cell neighborhood, and derives a surface normal from the smallest
//! eigenvector of the covariance.

use std::collections::BTreeMap;

use crate::geometry::{SymMat2, Vec2};
use crate::prefilter::PointCloud2;
use crate::scalar::Real;

/// Eigenvalue-ratio floor below which a covariance counts as isotropic and
/// the cell is dropped (the normal direction would be arbitrary).
pub const ISOTROPY_EPS: f64 = 1e-6;

/// Smoothing applied to per-cell statistics before normal extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SmoothingMode {
    #[default]
    None,
    Gaussian,
    SymmetricGaussian,
}

impl SmoothingMode {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "none" => Some(Self::None),
            "gaussian" => Some(Self::Gaussian),
            "symmetric" => Some(Self::SymmetricGaussian),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gaussian => "gaussian",
            Self::SymmetricGaussian => "symmetric",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SurfaceConfig<T = f64> {
    /// Grid cell size and gather radius, meters.
    pub resolution_m: T,
    /// Minimum gathered points for a cell to produce a statistic.
    pub min_points: usize,
    pub smoothing: SmoothingMode,
}

impl<T: Real> Default for SurfaceConfig<T> {
    fn default() -> Self {
        Self { resolution_m: T::of(3.5), min_points: 2, smoothing: SmoothingMode::None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SurfaceError {
    #[error("zero total weight: all intensities at or below the noise floor")]
    ZeroTotalWeight,
}

/// Intensity-weighted moments of one cell neighborhood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats<T = f64> {
    pub mean: Vec2<T>,
    pub cov: SymMat2<T>,
    pub count: usize,
}

/// Oriented surface point: local mean, unit normal, covariance and shape.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint<T = f64> {
    pub mean: Vec2<T>,
    /// Unit normal, sign-oriented toward the sensor origin.
    pub normal: Vec2<T>,
    pub covariance: SymMat2<T>,
    /// Number of radar returns behind the statistic.
    pub point_count: usize,
    /// log(1 + lambda_max / lambda_min) of the covariance.
    pub planarity: T,
}

/// Sparse set of surface points with a grid index over their means.
#[derive(Clone, Debug, Default)]
pub struct SurfacePointSet<T = f64> {
    points: Vec<SurfacePoint<T>>,
    grid_resolution_m: T,
    cell_index: BTreeMap<(i64, i64), Vec<usize>>,
}

/// Cells dropped during extraction, for diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SurfaceDrops {
    pub below_min_points: usize,
    pub isotropic: usize,
    pub zero_weight: usize,
}

impl<T: Real> SurfacePointSet<T> {
    /// Builds a set from already-computed surface points, indexing each by
    /// the grid cell of its mean.
    pub fn from_points(points: Vec<SurfacePoint<T>>, grid_resolution_m: T) -> Self {
        let mut cell_index: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (idx, p) in points.iter().enumerate() {
            cell_index.entry(grid_cell(p.mean, grid_resolution_m)).or_default().push(idx);
        }
        Self { points, grid_resolution_m, cell_index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SurfacePoint<T>] {
        &self.points
    }

    pub fn grid_resolution_m(&self) -> T {
        self.grid_resolution_m
    }

    pub fn means(&self) -> Vec<Vec2<T>> {
        self.points.iter().map(|p| p.mean).collect()
    }

    /// Visits every point whose mean lies within `radius` of `query`,
    /// passing (index, point, squared distance).
    pub fn for_each_in_radius<F: FnMut(usize, &SurfacePoint<T>, T)>(
        &self,
        query: Vec2<T>,
        radius: T,
        mut visit: F,
    ) {
        let r = self.grid_resolution_m;
        let radius_sq = radius * radius;
        let i0 = grid_coord((query.x - radius) / r);
        let i1 = grid_coord((query.x + radius) / r);
        let j0 = grid_coord((query.y - radius) / r);
        let j1 = grid_coord((query.y + radius) / r);
        for i in i0..=i1 {
            for (_, indices) in self.cell_index.range((i, j0)..=(i, j1)) {
                for &idx in indices {
                    let p = &self.points[idx];
                    let d = (p.mean - query).norm_sq();
                    if d <= radius_sq {
                        visit(idx, p, d);
                    }
                }
            }
        }
    }
}

fn grid_coord<T: Real>(scaled: T) -> i64 {
    scaled.floor().to_f64_lossy() as i64
}

/// Grid cell containing a point, for cell size `r`.
pub fn grid_cell<T: Real>(p: Vec2<T>, r: T) -> (i64, i64) {
    (grid_coord(p.x / r), grid_coord(p.y / r))
}

/// Intensity-weighted mean and covariance of one point set.
///
/// Weights are `intensity - z_min`, clamped at zero and normalized to sum
/// one. Errors when the total weight vanishes.
pub fn compute_cell_statistics<T: Real>(
    points: &[Vec2<T>],
    intensities: &[T],
    z_min: T,
) -> Result<CellStats<T>, SurfaceError> {
    debug_assert_eq!(points.len(), intensities.len());
    let weights: Vec<T> = intensities.iter().map(|&z| (z - z_min).max(T::zero())).collect();
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(SurfaceError::ZeroTotalWeight);
    }

    let mut mean = Vec2::zero();
    for (p, &w) in points.iter().zip(&weights) {
        mean = mean + p.scale(w);
    }
    mean = mean.scale(T::one() / total);

    let mut cov = SymMat2::zero();
    for (p, &w) in points.iter().zip(&weights) {
        cov = cov.add(SymMat2::outer(*p - mean).scale(w));
    }
    cov = cov.scale(T::one() / total);

    Ok(CellStats { mean, cov, count: points.len() })
}

fn kernel_weight<T: Real>(di: i64, dj: i64) -> T {
    const GK: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];
    T::of(GK[(di + 1) as usize][(dj + 1) as usize] / 16.0)
}

/// Moment-matched mixture of one cell's 3x3 neighborhood, with effective
/// weights proportional to kernel weight times point count.
///
/// Written in centered form so that a uniform neighborhood (and a lone
/// center cell) reproduces the input bit-exactly.
fn smooth_cell<T: Real>(
    grid: &BTreeMap<(i64, i64), CellStats<T>>,
    cell: (i64, i64),
    center: &CellStats<T>,
) -> CellStats<T> {
    let mut members: Vec<(T, &CellStats<T>)> = Vec::with_capacity(9);
    let mut total = T::zero();
    for di in -1..=1 {
        for dj in -1..=1 {
            if let Some(stats) = grid.get(&(cell.0 + di, cell.1 + dj)) {
                let w = kernel_weight::<T>(di, dj) * T::of_usize(stats.count);
                members.push((w, stats));
                total += w;
            }
        }
    }

    let mut mean_shift = Vec2::zero();
    for (w, s) in &members {
        mean_shift = mean_shift + (s.mean - center.mean).scale(*w / total);
    }
    let mean = center.mean + mean_shift;

    let mut cov_shift = SymMat2::zero();
    for (w, s) in &members {
        let centered = s.mean - mean;
        let term = s.cov.sub(center.cov).add(SymMat2::outer(centered));
        cov_shift = cov_shift.add(term.scale(*w / total));
    }
    let cov = center.cov.add(cov_shift);

    CellStats { mean, cov, count: center.count }
}

/// Applies Gaussian-kernel smoothing to every cell of a statistics grid.
pub fn gaussian_smooth<T: Real>(
    grid: &BTreeMap<(i64, i64), CellStats<T>>,
) -> BTreeMap<(i64, i64), CellStats<T>> {
    grid.iter().map(|(&cell, stats)| (cell, smooth_cell(grid, cell, stats))).collect()
}

/// Checks the occupancy-symmetry condition on a k x k weight grid.
///
/// Smoothing is permitted only when every weight and its point reflection
/// through the center are either both positive or both zero.
pub fn symmetric_gate<T: Real>(weights: &[T], k: usize) -> bool {
    debug_assert_eq!(weights.len(), k * k);
    debug_assert_eq!(k % 2, 1);
    for i in 0..k {
        for j in 0..k {
            let w = weights[i * k + j];
            let mirrored = weights[(k - 1 - i) * k + (k - 1 - j)];
            let both_positive = w > T::zero() && mirrored > T::zero();
            let both_zero = w == T::zero() && mirrored == T::zero();
            if !(both_positive || both_zero) {
                return false;
            }
        }
    }
    true
}

/// Gaussian smoothing gated per cell by [`symmetric_gate`]; gated-out cells
/// keep their unsmoothed statistics.
pub fn symmetric_gaussian_smooth<T: Real>(
    grid: &BTreeMap<(i64, i64), CellStats<T>>,
) -> BTreeMap<(i64, i64), CellStats<T>> {
    grid.iter()
        .map(|(&cell, stats)| {
            let mut weights = [T::zero(); 9];
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    if let Some(s) = grid.get(&(cell.0 + di, cell.1 + dj)) {
                        weights[((di + 1) * 3 + (dj + 1)) as usize] =
                            kernel_weight::<T>(di, dj) * T::of_usize(s.count);
                    }
                }
            }
            if symmetric_gate(&weights, 3) {
                (cell, smooth_cell(grid, cell, stats))
            } else {
                (cell, *stats)
            }
        })
        .collect()
}

/// Ratio lambda_max / lambda_min with a relative floor on the denominator so
/// rank-deficient covariances stay finite.
fn eigen_ratio<T: Real>(max: T, min: T) -> T {
    if !(max > T::zero()) {
        return T::one();
    }
    let denom = min.abs().max(max * T::epsilon());
    (max / denom).abs()
}

/// Per-cell statistics grid of a point cloud, before smoothing. Shared by
/// the extraction pipeline and the brute-force oracles in tests.
pub fn cell_statistics_grid<T: Real>(
    cloud: &PointCloud2<T>,
    resolution_m: T,
    z_min: T,
    min_points: usize,
    drops: &mut SurfaceDrops,
) -> BTreeMap<(i64, i64), CellStats<T>> {
    let r = resolution_m;
    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (idx, point) in cloud.points.iter().enumerate() {
        buckets.entry(grid_cell(point.pos, r)).or_default().push(idx);
    }

    let mut grid = BTreeMap::new();
    let radius_sq = r * r;
    let half = T::of(0.5);
    for &cell in buckets.keys() {
        let centroid = Vec2::new(
            (T::of(cell.0 as f64) + half) * r,
            (T::of(cell.1 as f64) + half) * r,
        );
        let mut positions = Vec::new();
        let mut intensities = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(indices) = buckets.get(&(cell.0 + di, cell.1 + dj)) {
                    for &idx in indices {
                        let p = &cloud.points[idx];
                        if (p.pos - centroid).norm_sq() <= radius_sq {
                            positions.push(p.pos);
                            intensities.push(p.intensity);
                        }
                    }
                }
            }
        }
        if positions.len() < min_points {
            drops.below_min_points += 1;
            continue;
        }
        match compute_cell_statistics(&positions, &intensities, z_min) {
            Ok(stats) => {
                grid.insert(cell, stats);
            }
            Err(SurfaceError::ZeroTotalWeight) => drops.zero_weight += 1,
        }
    }
    grid
}

/// Extracts the oriented-surface-point set of a point cloud.
///
/// Normals point toward `sensor_origin`; cells whose covariance stays
/// isotropic after smoothing are dropped and counted in the returned
/// [`SurfaceDrops`].
pub fn build_surface_points<T: Real>(
    cloud: &PointCloud2<T>,
    resolution_m: T,
    z_min: T,
    min_points: usize,
    mode: SmoothingMode,
    sensor_origin: Vec2<T>,
) -> (SurfacePointSet<T>, SurfaceDrops) {
    let mut drops = SurfaceDrops::default();
    let grid = cell_statistics_grid(cloud, resolution_m, z_min, min_points, &mut drops);

    let final_grid = match mode {
        SmoothingMode::None => grid,
        SmoothingMode::Gaussian => gaussian_smooth(&grid),
        SmoothingMode::SymmetricGaussian => symmetric_gaussian_smooth(&grid),
    };

    let mut set = SurfacePointSet {
        points: Vec::with_capacity(final_grid.len()),
        grid_resolution_m: resolution_m,
        cell_index: BTreeMap::new(),
    };
    let isotropy_gate = T::one() + T::of(ISOTROPY_EPS);
    for stats in final_grid.values() {
        let eigen = stats.cov.eigen();
        if eigen_ratio(eigen.max, eigen.min) < isotropy_gate {
            drops.isotropic += 1;
            continue;
        }
        let mut normal = eigen.vec_min;
        if normal.dot(sensor_origin - stats.mean) < T::zero() {
            normal = -normal;
        }
        let planarity = (T::one() + eigen_ratio(eigen.max, eigen.min)).ln();
        let idx = set.points.len();
        set.points.push(SurfacePoint {
            mean: stats.mean,
            normal,
            covariance: stats.cov,
            point_count: stats.count,
            planarity,
        });
        set.cell_index
            .entry(grid_cell(stats.mean, resolution_m))
            .or_default()
            .push(idx);
    }
    (set, drops)
}
