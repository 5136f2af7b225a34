//! Scan-to-multi-keyframe registration and ICP pose refinement.
//!
//! Registration minimizes, over the SE(2) parameters (x, y, theta) of the
//! current scan,
//!
//! ```text
//! f = sum_k sum_(i,j) w_ij * L_delta( || mu_kj - (R_theta mu_ti + t) ||^2 )
//! ```
//!
//! by Gauss-Newton with correspondences re-found every iteration. `L_delta`
//! is a Huber loss applied to the squared residual norm, C^1 at the branch
//! point so the composition stays differentiable. Residual weights `w_ij`
//! combine planarity similarity, detection-count similarity and normal
//! agreement of the matched surface points.

use std::collections::BTreeMap;

use crate::geometry::{Pose2, Vec2};
use crate::scalar::Real;
use crate::surface::{grid_cell, SurfacePoint, SurfacePointSet};

#[derive(Clone, Copy, Debug)]
pub struct RegistrationConfig<T = f64> {
    pub correspondence_radius_m: T,
    pub huber_delta: T,
    pub max_iterations: usize,
    /// Parameter-step norm below which the solve counts as converged.
    pub convergence_tol: T,
    pub min_correspondences: usize,
}

impl<T: Real> Default for RegistrationConfig<T> {
    fn default() -> Self {
        Self {
            correspondence_radius_m: T::of(3.5),
            huber_delta: T::of(0.1),
            max_iterations: 50,
            convergence_tol: T::of(1e-8),
            min_correspondences: 10,
        }
    }
}

/// One scan-point-to-keyframe-point match.
#[derive(Clone, Copy, Debug)]
pub struct Correspondence<T = f64> {
    pub keyframe_index: usize,
    pub source_index: usize,
    pub target_index: usize,
    /// Similarity weight in [0, 3].
    pub weight: T,
}

#[derive(Clone, Copy, Debug)]
pub struct RegistrationResult<T = f64> {
    /// Pose of the scan in the odometry frame.
    pub pose: Pose2<T>,
    pub final_cost: T,
    pub iterations: usize,
    pub correspondence_count: usize,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RegisterError {
    #[error("registration degenerate: {found} correspondences, need {required}")]
    Degenerate { found: usize, required: usize },
}

/// Huber loss on a squared residual norm: `s` below `delta^2`, then
/// `2 delta sqrt(s) - delta^2`. Continuous with continuous derivative.
pub fn huber_loss<T: Real>(residual_sq: T, delta: T) -> T {
    let delta_sq = delta * delta;
    if residual_sq <= delta_sq {
        residual_sq
    } else {
        T::of(2.0) * delta * residual_sq.sqrt() - delta_sq
    }
}

/// d/ds of [`huber_loss`].
fn huber_derivative<T: Real>(residual_sq: T, delta: T) -> T {
    let delta_sq = delta * delta;
    if residual_sq <= delta_sq {
        T::one()
    } else {
        delta / residual_sq.sqrt()
    }
}

/// Ratio similarity 2 min(a,b) / (a+b); equal inputs (including both zero)
/// count as identical.
pub fn similarity<T: Real>(a: T, b: T) -> T {
    if a == b {
        return T::one();
    }
    let sum = a + b;
    if sum == T::zero() {
        return T::one();
    }
    T::of(2.0) * a.min(b) / sum
}

/// Similarity weight of a matched pair of surface points, per planarity,
/// detection count and normal direction. Normals are assumed already
/// expressed in a common frame.
pub fn residual_weight<T: Real>(src: &SurfacePoint<T>, tgt: &SurfacePoint<T>) -> T {
    let planarity = similarity(src.planarity, tgt.planarity);
    let counts = similarity(T::of_usize(src.point_count), T::of_usize(tgt.point_count));
    let direction = src.normal.dot(tgt.normal).max(T::zero()).min(T::one());
    planarity + counts + direction
}

/// Finds, for every scan point and every keyframe, the nearest keyframe
/// surface point within `radius` (in the odometry frame) whose normal agrees
/// with the transformed scan normal. Distance ties keep the lower target
/// index.
pub fn find_correspondences<T: Real>(
    scan: &SurfacePointSet<T>,
    keyframes: &[(&SurfacePointSet<T>, Pose2<T>)],
    guess: &Pose2<T>,
    radius: T,
) -> Vec<Correspondence<T>> {
    let mut out = Vec::new();
    for (k, (kf_set, kf_pose)) in keyframes.iter().enumerate() {
        // work in the keyframe frame; distances and normal dots are invariant
        let rel = kf_pose.inverse().compose(guess);
        let rel_rot = rel.rotation();
        for (i, sp) in scan.points().iter().enumerate() {
            let query = rel.transform(sp.mean);
            let normal = rel_rot.apply(sp.normal);
            let mut best: Option<(usize, T)> = None;
            kf_set.for_each_in_radius(query, radius, |j, tp, dist_sq| {
                if normal.dot(tp.normal) > T::zero() {
                    let better = match best {
                        None => true,
                        Some((bj, bd)) => dist_sq < bd || (dist_sq == bd && j < bj),
                    };
                    if better {
                        best = Some((j, dist_sq));
                    }
                }
            });
            if let Some((j, _)) = best {
                let mut transformed_src = *sp;
                transformed_src.normal = normal;
                let weight = residual_weight(&transformed_src, &kf_set.points()[j]);
                out.push(Correspondence {
                    keyframe_index: k,
                    source_index: i,
                    target_index: j,
                    weight,
                });
            }
        }
    }
    out
}

/// Flattened cost term: scan-frame source mean, odometry-frame target mean.
struct CostTerm<T> {
    src: Vec2<T>,
    tgt: Vec2<T>,
    weight: T,
}

fn flatten_terms<T: Real>(
    scan: &SurfacePointSet<T>,
    keyframes: &[(&SurfacePointSet<T>, Pose2<T>)],
    correspondences: &[Correspondence<T>],
) -> Vec<CostTerm<T>> {
    correspondences
        .iter()
        .map(|c| {
            let (kf_set, kf_pose) = &keyframes[c.keyframe_index];
            CostTerm {
                src: scan.points()[c.source_index].mean,
                tgt: kf_pose.transform(kf_set.points()[c.target_index].mean),
                weight: c.weight,
            }
        })
        .collect()
}

fn cost_of_terms<T: Real>(terms: &[CostTerm<T>], pose: &Pose2<T>, delta: T) -> T {
    let rot = pose.rotation();
    let t = pose.translation();
    let mut cost = T::zero();
    for term in terms {
        let e = term.tgt - (rot.apply(term.src) + t);
        cost += term.weight * huber_loss(e.norm_sq(), delta);
    }
    cost
}

/// Registration cost for a fixed correspondence set, at an arbitrary pose.
pub fn registration_cost<T: Real>(
    scan: &SurfacePointSet<T>,
    keyframes: &[(&SurfacePointSet<T>, Pose2<T>)],
    correspondences: &[Correspondence<T>],
    pose: &Pose2<T>,
    huber_delta: T,
) -> T {
    cost_of_terms(&flatten_terms(scan, keyframes, correspondences), pose, huber_delta)
}

/// Analytic gradient of [`registration_cost`] with respect to (x, y, theta).
pub fn registration_gradient<T: Real>(
    scan: &SurfacePointSet<T>,
    keyframes: &[(&SurfacePointSet<T>, Pose2<T>)],
    correspondences: &[Correspondence<T>],
    pose: &Pose2<T>,
    huber_delta: T,
) -> [T; 3] {
    let terms = flatten_terms(scan, keyframes, correspondences);
    let (_, gradient, _) = linearize(&terms, pose, huber_delta);
    gradient
}

/// Cost, gradient and Gauss-Newton Hessian approximation at `pose`.
fn linearize<T: Real>(
    terms: &[CostTerm<T>],
    pose: &Pose2<T>,
    delta: T,
) -> (T, [T; 3], [[T; 3]; 3]) {
    let rot = pose.rotation();
    let t = pose.translation();
    let two = T::of(2.0);
    let mut cost = T::zero();
    let mut g = [T::zero(); 3];
    let mut h = [[T::zero(); 3]; 3];
    for term in terms {
        let e = term.tgt - (rot.apply(term.src) + t);
        let s = e.norm_sq();
        cost += term.weight * huber_loss(s, delta);
        // de/d(x,y) = -I, de/dtheta = -R'(theta) src
        let dtheta = rot.derivative_apply(term.src);
        let c = two * term.weight * huber_derivative(s, delta);
        g[0] -= c * e.x;
        g[1] -= c * e.y;
        g[2] -= c * dtheta.dot(e);
        h[0][0] += c;
        h[1][1] += c;
        h[0][2] += c * dtheta.x;
        h[1][2] += c * dtheta.y;
        h[2][2] += c * dtheta.norm_sq();
    }
    h[2][0] = h[0][2];
    h[2][1] = h[1][2];
    h[1][0] = h[0][1];
    (cost, g, h)
}

/// Solves a 3x3 linear system by Gaussian elimination with partial pivoting.
fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&r1, &r2| {
                a[r1][col].abs().partial_cmp(&a[r2][col].abs()).expect("finite entries")
            })
            .unwrap();
        if a[pivot_row][col].abs() <= T::zero() {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut sum = b[row];
        for k in row + 1..3 {
            sum = sum - a[row][k] * x[k];
        }
        if a[row][row] == T::zero() {
            return None;
        }
        x[row] = sum / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Registers a scan against a window of keyframes starting from `guess`.
///
/// Correspondences are re-found every iteration; steps that do not decrease
/// the cost are halved up to eight times. Errors when any iteration finds
/// fewer than `min_correspondences` matches.
pub fn register<T: Real>(
    scan: &SurfacePointSet<T>,
    keyframes: &[(&SurfacePointSet<T>, Pose2<T>)],
    guess: &Pose2<T>,
    cfg: &RegistrationConfig<T>,
) -> Result<RegistrationResult<T>, RegisterError> {
    let mut pose = *guess;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let correspondences =
            find_correspondences(scan, keyframes, &pose, cfg.correspondence_radius_m);
        if correspondences.len() < cfg.min_correspondences {
            return Err(RegisterError::Degenerate {
                found: correspondences.len(),
                required: cfg.min_correspondences,
            });
        }
        let terms = flatten_terms(scan, keyframes, &correspondences);
        let (cost, gradient, hessian) = linearize(&terms, &pose, cfg.huber_delta);
        let Some(step) = solve3(hessian, [-gradient[0], -gradient[1], -gradient[2]]) else {
            break;
        };
        let step_norm = (step[0] * step[0] + step[1] * step[1] + step[2] * step[2]).sqrt();
        if step_norm < cfg.convergence_tol {
            converged = true;
            break;
        }

        let mut alpha = T::one();
        let mut improved = false;
        for _ in 0..=8 {
            let candidate = Pose2::new(
                pose.x() + alpha * step[0],
                pose.y() + alpha * step[1],
                pose.theta() + alpha * step[2],
            );
            if cost_of_terms(&terms, &candidate, cfg.huber_delta) < cost {
                pose = candidate;
                improved = true;
                break;
            }
            alpha = alpha * T::of(0.5);
        }
        if !improved {
            break;
        }
        if alpha * step_norm < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let correspondences =
        find_correspondences(scan, keyframes, &pose, cfg.correspondence_radius_m);
    let final_cost = registration_cost(scan, keyframes, &correspondences, &pose, cfg.huber_delta);
    Ok(RegistrationResult {
        pose,
        final_cost,
        iterations,
        correspondence_count: correspondences.len(),
        converged,
    })
}

/// Closed-form rigid alignment (rotation + translation) minimizing the sum
/// of squared distances from transformed `src` to `dst`.
pub fn rigid_align<T: Real>(src: &[Vec2<T>], dst: &[Vec2<T>]) -> Pose2<T> {
    debug_assert_eq!(src.len(), dst.len());
    debug_assert!(!src.is_empty());
    let n = T::of_usize(src.len());
    let mut mu_s = Vec2::zero();
    let mut mu_d = Vec2::zero();
    for (s, d) in src.iter().zip(dst) {
        mu_s = mu_s + *s;
        mu_d = mu_d + *d;
    }
    mu_s = mu_s.scale(T::one() / n);
    mu_d = mu_d.scale(T::one() / n);

    let mut dot = T::zero();
    let mut cross = T::zero();
    for (s, d) in src.iter().zip(dst) {
        let a = *s - mu_s;
        let b = *d - mu_d;
        dot += a.dot(b);
        cross += a.cross(b);
    }
    let theta = cross.atan2(dot);
    let rot = crate::geometry::Rot2::from_angle(theta);
    let t = mu_d - rot.apply(mu_s);
    Pose2::new(t.x, t.y, theta)
}

/// Outcome of ICP-based pose refinement.
#[derive(Clone, Copy, Debug)]
pub struct IcpOutcome<T = f64> {
    /// Refined relative pose when accepted, the initial guess otherwise.
    pub pose: Pose2<T>,
    /// Mean squared distance over the final inlier correspondences.
    pub fitness: T,
    pub accepted: bool,
}

/// Uniform-grid index over a fixed point set, for radius-bounded
/// nearest-neighbor queries.
struct PointGrid<'a, T> {
    points: &'a [Vec2<T>],
    cell_size: T,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

impl<'a, T: Real> PointGrid<'a, T> {
    fn build(points: &'a [Vec2<T>], cell_size: T) -> Self {
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(grid_cell(*p, cell_size)).or_default().push(i);
        }
        Self { points, cell_size, cells }
    }

    /// Nearest point within `radius` of `query`; `radius` must not exceed
    /// the cell size. Ties keep the lower index.
    fn nearest(&self, query: Vec2<T>, radius: T) -> Option<(usize, T)> {
        let (ci, cj) = grid_cell(query, self.cell_size);
        let radius_sq = radius * radius;
        let mut best: Option<(usize, T)> = None;
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(indices) = self.cells.get(&(ci + di, cj + dj)) {
                    for &idx in indices {
                        let d = (self.points[idx] - query).norm_sq();
                        if d <= radius_sq {
                            let better = match best {
                                None => true,
                                Some((bi, bd)) => d < bd || (d == bd && idx < bi),
                            };
                            if better {
                                best = Some((idx, d));
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Classical point-to-point ICP between the surface-point means of two
/// temporally consecutive scans.
///
/// `initial` maps the current scan into the previous scan's frame. The
/// refined pose is returned only when the Euclidean fitness (mean squared
/// inlier distance) stays below `fitness_threshold` and enough inliers
/// support it; otherwise `initial` is returned unchanged.
pub fn icp_refine<T: Real>(
    current_means: &[Vec2<T>],
    previous_means: &[Vec2<T>],
    initial: Pose2<T>,
    fitness_threshold: T,
    max_corr_dist: T,
    max_iterations: usize,
    min_correspondences: usize,
) -> IcpOutcome<T> {
    if current_means.is_empty() || previous_means.is_empty() {
        return IcpOutcome { pose: initial, fitness: T::infinity(), accepted: false };
    }
    let grid = PointGrid::build(previous_means, max_corr_dist);
    let mut pose = initial;

    for _ in 0..max_iterations {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for p in current_means {
            if let Some((j, _)) = grid.nearest(pose.transform(*p), max_corr_dist) {
                src.push(*p);
                dst.push(previous_means[j]);
            }
        }
        if src.len() < 2 {
            break;
        }
        let refined = rigid_align(&src, &dst);
        if !refined.is_finite() {
            break;
        }
        let delta = pose.delta_to(&refined);
        pose = refined;
        let change = delta.translation().norm_sq() + delta.theta() * delta.theta();
        if change < T::of(1e-20) {
            break;
        }
    }

    let mut inliers = 0usize;
    let mut sum_sq = T::zero();
    for p in current_means {
        if let Some((_, d)) = grid.nearest(pose.transform(*p), max_corr_dist) {
            inliers += 1;
            sum_sq += d;
        }
    }
    if inliers == 0 {
        return IcpOutcome { pose: initial, fitness: T::infinity(), accepted: false };
    }
    let fitness = sum_sq / T::of_usize(inliers);
    let accepted = fitness < fitness_threshold && inliers >= min_correspondences;
    IcpOutcome { pose: if accepted { pose } else { initial }, fitness, accepted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefilter::{PointCloud2, RadarPoint};
    use crate::surface::{build_surface_points, SmoothingMode};
    use approx::assert_relative_eq;

    /// Deterministic scene with structure along several walls.
    fn test_scene() -> SurfacePointSet<f64> {
        let mut points = Vec::new();
        for i in 0..60 {
            let s = i as f64 * 0.5;
            points.push((10.0 + s, 12.0, 150.0)); // wall along x
            points.push((-14.0, -5.0 + s * 0.7, 180.0)); // wall along y
            points.push((5.0 + s * 0.6, -18.0 + s * 0.2, 120.0)); // oblique wall
        }
        let cloud = PointCloud2 {
            points: points
                .iter()
                .map(|&(x, y, z)| RadarPoint {
                    pos: Vec2::new(x, y),
                    intensity: z,
                    azimuth_index: 0,
                })
                .collect(),
        };
        let (set, _) =
            build_surface_points(&cloud, 3.5, 55.0, 2, SmoothingMode::None, Vec2::zero());
        assert!(set.len() >= 15);
        set
    }

    fn transform_set(set: &SurfacePointSet<f64>, pose: &Pose2<f64>) -> SurfacePointSet<f64> {
        // move means, rotate normals and covariances (R C R^T)
        let rot = pose.rotation();
        let rebuilt: Vec<SurfacePoint<f64>> = set
            .points()
            .iter()
            .map(|p| {
                let mut q = *p;
                q.mean = pose.transform(p.mean);
                q.normal = rot.apply(p.normal);
                let c = p.covariance;
                let (cs, sn) = (rot.cos, rot.sin);
                let xx = cs * (cs * c.xx - sn * c.xy) - sn * (cs * c.xy - sn * c.yy);
                let xy = cs * (sn * c.xx + cs * c.xy) - sn * (sn * c.xy + cs * c.yy);
                let yy = sn * (sn * c.xx + cs * c.xy) + cs * (sn * c.xy + cs * c.yy);
                q.covariance = crate::geometry::SymMat2::new(xx, xy, yy);
                q
            })
            .collect();
        SurfacePointSet::from_points(rebuilt, set.grid_resolution_m())
    }

    #[test]
    fn huber_branches() {
        let delta = 0.5f64;
        assert_eq!(huber_loss(0.0, delta), 0.0);
        let at_knee = delta * delta;
        assert_relative_eq!(huber_loss(at_knee, delta), at_knee, epsilon = 1e-15);
        // outlier branch at s = 4 delta^2: 2 d * 2d - d^2 = 3 d^2
        assert_relative_eq!(
            huber_loss(4.0 * delta * delta, delta),
            3.0 * delta * delta,
            epsilon = 1e-15
        );
    }

    #[test]
    fn huber_monotone_and_below_quadratic() {
        let delta = 0.3f64;
        let mut prev = -1.0;
        for i in 0..200 {
            let s = i as f64 * 0.01;
            let l = huber_loss(s, delta);
            assert!(l >= prev);
            if s > delta * delta {
                assert!(l <= s + 1e-15);
            }
            prev = l;
        }
    }

    #[test]
    fn similarity_basic_values() {
        assert_eq!(similarity(1.0, 1.0), 1.0);
        assert_eq!(similarity(0.0, 0.0), 1.0);
        assert_relative_eq!(similarity(1.0, 3.0), 0.5);
    }

    fn unit_point(count: usize, planarity: f64, normal: Vec2<f64>) -> SurfacePoint<f64> {
        SurfacePoint {
            mean: Vec2::zero(),
            normal,
            covariance: crate::geometry::SymMat2::new(1.0, 0.0, 0.01),
            point_count: count,
            planarity,
        }
    }

    #[test]
    fn residual_weight_identical_points_is_three() {
        let p = unit_point(4, 2.0, Vec2::new(0.0, 1.0));
        assert_relative_eq!(residual_weight(&p, &p), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_weight_count_similarity() {
        let a = unit_point(1, 2.0, Vec2::new(0.0, 1.0));
        let b = unit_point(3, 2.0, Vec2::new(0.0, 1.0));
        // 1 + 2*1/(1+3) + 1 = 2.5
        assert_relative_eq!(residual_weight(&a, &b), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn residual_weight_clamps_antiparallel_normals() {
        let a = unit_point(2, 1.0, Vec2::new(0.0, 1.0));
        let b = unit_point(2, 1.0, Vec2::new(0.0, -1.0));
        assert_relative_eq!(residual_weight(&a, &b), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn self_correspondences_have_weight_three() {
        let set = test_scene();
        let kf = [(&set, Pose2::identity())];
        let corr = find_correspondences(&set, &kf, &Pose2::identity(), 3.5);
        assert_eq!(corr.len(), set.len());
        for c in &corr {
            assert_eq!(c.source_index, c.target_index);
            assert_relative_eq!(c.weight, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_radius_yields_no_correspondences() {
        let set = test_scene();
        let far = Pose2::new(500.0, 500.0, 0.0);
        let kf = [(&set, far)];
        let corr = find_correspondences(&set, &kf, &Pose2::identity(), 3.5);
        assert!(corr.is_empty());
    }

    #[test]
    fn correspondences_match_brute_force_search() {
        let set = test_scene();
        let kf_pose = Pose2::new(0.8, -0.4, 0.05);
        let guess = Pose2::new(0.5, 0.1, 0.02);
        let kf = [(&set, kf_pose)];
        let radius = 3.5;
        let fast = find_correspondences(&set, &kf, &guess, radius);

        // exhaustive all-pairs oracle in the odometry frame
        let mut slow = Vec::new();
        let guess_rot = guess.rotation();
        let kf_rot = kf_pose.rotation();
        for (i, sp) in set.points().iter().enumerate() {
            let q = guess.transform(sp.mean);
            let n_src = guess_rot.apply(sp.normal);
            let mut best: Option<(usize, f64)> = None;
            for (j, tp) in set.points().iter().enumerate() {
                let target = kf_pose.transform(tp.mean);
                let d = (target - q).norm_sq();
                if d <= radius * radius && n_src.dot(kf_rot.apply(tp.normal)) > 0.0 {
                    let better = match best {
                        None => true,
                        Some((bj, bd)) => d < bd || (d == bd && j < bj),
                    };
                    if better {
                        best = Some((j, d));
                    }
                }
            }
            if let Some((j, _)) = best {
                slow.push((i, j));
            }
        }
        let fast_pairs: Vec<(usize, usize)> =
            fast.iter().map(|c| (c.source_index, c.target_index)).collect();
        assert_eq!(fast_pairs, slow);
    }

    #[test]
    fn register_self_is_fixed_point() {
        let set = test_scene();
        let kf = [(&set, Pose2::identity())];
        let res =
            register(&set, &kf, &Pose2::identity(), &RegistrationConfig::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 2);
        assert!(res.final_cost <= 1e-12);
        assert_relative_eq!(res.pose.x(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.pose.y(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.pose.theta(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn register_recovers_unit_translation() {
        let set = test_scene();
        let truth = Pose2::new(1.0, 0.0, 0.0);
        let keyframe = transform_set(&set, &truth);
        let kf = [(&keyframe, Pose2::identity())];
        let res =
            register(&set, &kf, &Pose2::identity(), &RegistrationConfig::default()).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.pose.x(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(res.pose.y(), 0.0, epsilon = 1e-6);
        assert_relative_eq!(res.pose.theta(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn truth_cost_below_random_perturbations() {
        let set = test_scene();
        let truth = Pose2::new(0.4, -0.7, 0.03);
        let keyframe = transform_set(&set, &truth);
        let kf = [(&keyframe, Pose2::identity())];
        let corr = find_correspondences(&set, &kf, &truth, 3.5);
        let cost_truth = registration_cost(&set, &kf, &corr, &truth, 0.1);

        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let p = Pose2::new(
                truth.x() + (next() - 0.5),
                truth.y() + (next() - 0.5),
                truth.theta() + (next() - 0.5) * (10.0f64).to_radians() / 5.0,
            );
            let c = registration_cost(&set, &kf, &corr, &p, 0.1);
            assert!(cost_truth <= c + 1e-12, "perturbation beat the truth: {c} < {cost_truth}");
        }
    }

    #[test]
    fn degenerate_when_too_few_matches() {
        let set = test_scene();
        let far = Pose2::new(500.0, 0.0, 0.0);
        let kf = [(&set, far)];
        let err = register(&set, &kf, &Pose2::identity(), &RegistrationConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("registration degenerate"));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let set = test_scene();
        let kf_pose = Pose2::new(0.3, 0.2, -0.04);
        let keyframe = transform_set(&set, &kf_pose);
        let kf = [(&keyframe, Pose2::new(-0.1, 0.05, 0.01))];
        let pose = Pose2::new(0.25, -0.15, 0.02);
        let corr = find_correspondences(&set, &kf, &pose, 3.5);
        assert!(corr.len() >= 10);
        let delta = 0.1;
        let analytic = registration_gradient(&set, &kf, &corr, &pose, delta);

        let h = 1e-6;
        let eval = |x: f64, y: f64, th: f64| {
            registration_cost(&set, &kf, &corr, &Pose2::new(x, y, th), delta)
        };
        let fd = [
            (eval(pose.x() + h, pose.y(), pose.theta())
                - eval(pose.x() - h, pose.y(), pose.theta()))
                / (2.0 * h),
            (eval(pose.x(), pose.y() + h, pose.theta())
                - eval(pose.x(), pose.y() - h, pose.theta()))
                / (2.0 * h),
            (eval(pose.x(), pose.y(), pose.theta() + h)
                - eval(pose.x(), pose.y(), pose.theta() - h))
                / (2.0 * h),
        ];
        for (a, f) in analytic.iter().zip(&fd) {
            let scale = f.abs().max(1e-6);
            assert!((a - f).abs() / scale < 1e-4, "analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn register_is_deterministic() {
        let set = test_scene();
        let truth = Pose2::new(0.6, 0.3, 0.04);
        let keyframe = transform_set(&set, &truth);
        let kf = [(&keyframe, Pose2::identity())];
        let a = register(&set, &kf, &Pose2::identity(), &RegistrationConfig::default()).unwrap();
        let b = register(&set, &kf, &Pose2::identity(), &RegistrationConfig::default()).unwrap();
        assert_eq!(a.pose.params(), b.pose.params());
        assert_eq!(a.final_cost, b.final_cost);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn icp_identical_clouds_is_identity() {
        let pts: Vec<Vec2<f64>> = (0..50)
            .map(|i| Vec2::new((i % 10) as f64 * 1.1, (i / 10) as f64 * 1.3))
            .collect();
        let out = icp_refine(&pts, &pts, Pose2::identity(), 1.0, 2.0, 30, 10);
        assert!(out.accepted);
        assert_eq!(out.fitness, 0.0);
        assert_eq!(out.pose.params(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn icp_recovers_rigid_shift() {
        let pts: Vec<Vec2<f64>> = (0..60)
            .map(|i| {
                let a = i as f64 * 0.21;
                Vec2::new(10.0 * a.cos(), 7.0 * a.sin())
            })
            .collect();
        let shift = Pose2::new(0.3, -0.2, 0.0);
        let previous: Vec<Vec2<f64>> = pts.iter().map(|p| shift.transform(*p)).collect();
        let out = icp_refine(&pts, &previous, Pose2::identity(), 1.0, 2.0, 30, 10);
        assert!(out.accepted);
        assert_relative_eq!(out.pose.x(), 0.3, epsilon = 1e-6);
        assert_relative_eq!(out.pose.y(), -0.2, epsilon = 1e-6);
        assert_relative_eq!(out.pose.theta(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn icp_rejection_returns_initial_bit_exactly() {
        let current: Vec<Vec2<f64>> = (0..20).map(|i| Vec2::new(i as f64, 0.0)).collect();
        // previous cloud far enough that matched distances stay large
        let previous: Vec<Vec2<f64>> =
            (0..20).map(|i| Vec2::new(i as f64 + 1.4, 1.4)).collect();
        let initial = Pose2::new(0.123456, -0.654321, 0.111);
        let out = icp_refine(&current, &previous, initial, 1.0, 2.0, 0, 10);
        // zero iterations: fitness evaluated at the initial pose, approx 2*1.4^2 > 1
        assert!(out.fitness >= 1.0);
        assert!(!out.accepted);
        assert_eq!(out.pose.params(), initial.params());
    }

    #[test]
    fn icp_empty_cloud_rejects() {
        let pts: Vec<Vec2<f64>> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let initial = Pose2::new(1.0, 2.0, 0.5);
        let out = icp_refine(&[], &pts, initial, 1.0, 2.0, 30, 10);
        assert!(!out.accepted);
        assert_eq!(out.pose.params(), initial.params());
        assert!(out.fitness.is_infinite());
    }

    #[test]
    fn rigid_align_recovers_exact_transform() {
        let src: Vec<Vec2<f64>> =
            (0..12).map(|i| Vec2::new((i as f64 * 1.7).sin() * 5.0, i as f64 * 0.9)).collect();
        let truth = Pose2::new(2.0, -1.0, 0.6);
        let dst: Vec<Vec2<f64>> = src.iter().map(|p| truth.transform(*p)).collect();
        let est = rigid_align(&src, &dst);
        assert_relative_eq!(est.x(), truth.x(), epsilon = 1e-10);
        assert_relative_eq!(est.y(), truth.y(), epsilon = 1e-10);
        assert_relative_eq!(est.theta(), truth.theta(), epsilon = 1e-10);
    }
}
