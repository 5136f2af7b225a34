//! Minimal 2D geometry: vectors, symmetric 2x2 matrices, SE(2) poses.

use crate::scalar::Real;

/// Normalizes an angle to the half-open interval (-pi, pi].
pub fn wrap_angle<T: Real>(angle: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = angle % two_pi;
    if a <= -T::PI() {
        a += two_pi;
    } else if a > T::PI() {
        a -= two_pi;
    }
    a
}

/// Column vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self { x: T::zero(), y: T::zero() }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product (z component of the 3D cross).
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self { x: self.x * s, y: self.y * s }
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Self {
        Self { x: -self.y, y: self.x }
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self { x: self.x / n, y: self.y / n }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> std::ops::Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl<T: Real> std::ops::Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

impl<T: Real> std::ops::Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y }
    }
}

/// Symmetric 2x2 matrix, stored as its upper triangle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat2<T = f64> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> SymMat2<T> {
    pub fn new(xx: T, xy: T, yy: T) -> Self {
        Self { xx, xy, yy }
    }

    pub fn zero() -> Self {
        Self { xx: T::zero(), xy: T::zero(), yy: T::zero() }
    }

    /// Outer product v v^T.
    pub fn outer(v: Vec2<T>) -> Self {
        Self { xx: v.x * v.x, xy: v.x * v.y, yy: v.y * v.y }
    }

    pub fn add(self, other: Self) -> Self {
        Self {
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    pub fn sub(self, other: Self) -> Self {
        Self {
            xx: self.xx - other.xx,
            xy: self.xy - other.xy,
            yy: self.yy - other.yy,
        }
    }

    pub fn scale(self, s: T) -> Self {
        Self { xx: self.xx * s, xy: self.xy * s, yy: self.yy * s }
    }

    pub fn apply(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn trace(self) -> T {
        self.xx + self.yy
    }

    pub fn det(self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues sorted descending, plus the unit eigenvector of the
    /// smallest eigenvalue. The other eigenvector is its quarter turn.
    pub fn eigen(self) -> Eigen2<T> {
        let half = T::of(0.5);
        let mid = (self.xx + self.yy) * half;
        let delta = (self.xx - self.yy) * half;
        let radius = (delta * delta + self.xy * self.xy).sqrt();
        let max = mid + radius;
        let min = mid - radius;

        let vec_min = if self.xy == T::zero() {
            if self.xx <= self.yy {
                Vec2::new(T::one(), T::zero())
            } else {
                Vec2::new(T::zero(), T::one())
            }
        } else {
            // (max - yy, xy) is an eigenvector of `max`; its perp belongs to `min`.
            Vec2::new(max - self.yy, self.xy).normalized().perp()
        };

        Eigen2 { max, min, vec_min }
    }
}

/// Result of a symmetric 2x2 eigen-decomposition.
#[derive(Clone, Copy, Debug)]
pub struct Eigen2<T> {
    pub max: T,
    pub min: T,
    /// Unit eigenvector of `min`.
    pub vec_min: Vec2<T>,
}

impl<T: Real> Eigen2<T> {
    /// Unit eigenvector of `max`.
    pub fn vec_max(&self) -> Vec2<T> {
        self.vec_min.perp()
    }
}

/// Plane rotation as cached (cos, sin).
#[derive(Clone, Copy, Debug)]
pub struct Rot2<T = f64> {
    pub cos: T,
    pub sin: T,
}

impl<T: Real> Rot2<T> {
    pub fn from_angle(theta: T) -> Self {
        Self { cos: theta.cos(), sin: theta.sin() }
    }

    pub fn apply(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }

    pub fn inverse(self) -> Self {
        Self { cos: self.cos, sin: -self.sin }
    }

    /// d/dtheta of R(theta) v, equal to R(theta) applied to the perp of v.
    pub fn derivative_apply(self, v: Vec2<T>) -> Vec2<T> {
        self.apply(v.perp())
    }
}

/// Planar rigid transform: rotation by `theta` followed by translation.
///
/// `theta` is kept in (-pi, pi] by every constructor and composition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose2<T = f64> {
    x: T,
    y: T,
    theta: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn identity() -> Self {
        Self { x: T::zero(), y: T::zero(), theta: T::zero() }
    }

    pub fn x(&self) -> T {
        self.x
    }

    pub fn y(&self) -> T {
        self.y
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn translation(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Rot2<T> {
        Rot2::from_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Parameter vector (x, y, theta).
    pub fn params(&self) -> [T; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn transform(&self, p: Vec2<T>) -> Vec2<T> {
        self.rotation().apply(p) + self.translation()
    }

    /// `self` then `other`, i.e. the transform mapping via `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let t = self.rotation().apply(other.translation()) + self.translation();
        Self::new(t.x, t.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation().inverse();
        let t = rot_inv.apply(-self.translation());
        Self::new(t.x, t.y, -self.theta)
    }

    /// Relative transform taking `self` to `other`: `self^-1 * other`.
    pub fn delta_to(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }
}

/// Planar twist: linear velocity in the body frame plus yaw rate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Velocity2<T = f64> {
    pub vx: T,
    pub vy: T,
    pub omega: T,
}

impl<T: Real> Velocity2<T> {
    pub fn new(vx: T, vy: T, omega: T) -> Self {
        Self { vx, vy, omega }
    }

    pub fn zero() -> Self {
        Self { vx: T::zero(), vy: T::zero(), omega: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    /// Constant-velocity displacement over `dt`, as rotation-then-translation.
    pub fn integrate(&self, dt: T) -> Pose2<T> {
        Pose2::new(self.vx * dt, self.vy * dt, self.omega * dt)
    }

    /// Inverse of [`Velocity2::integrate`]: velocity explaining a relative
    /// pose over `dt`.
    pub fn from_pose_delta(delta: &Pose2<T>, dt: T) -> Self {
        Self { vx: delta.x() / dt, vy: delta.y() / dt, omega: delta.theta() / dt }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_half_open_interval() {
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(0.1), 0.1);
        assert_relative_eq!(
            wrap_angle(2.0 * std::f64::consts::PI + 0.1),
            0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pose_compose_inverse_is_identity() {
        let a = Pose2::new(1.0, -2.0, 0.7);
        let id = a.compose(&a.inverse());
        assert_relative_eq!(id.x(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(id.y(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(id.theta(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pose_transform_matches_compose() {
        let a = Pose2::new(0.3, 1.1, -1.2);
        let b = Pose2::new(-0.5, 0.2, 2.0);
        let p = Vec2::new(2.0, -3.0);
        let via_compose = a.compose(&b).transform(p);
        let via_chain = a.transform(b.transform(p));
        assert_relative_eq!(via_compose.x, via_chain.x, epsilon = 1e-12);
        assert_relative_eq!(via_compose.y, via_chain.y, epsilon = 1e-12);
    }

    #[test]
    fn eigen_recovers_axis_aligned() {
        let m = SymMat2::new(4.0, 0.0, 1.0);
        let e = m.eigen();
        assert_eq!(e.max, 4.0);
        assert_eq!(e.min, 1.0);
        assert_eq!(e.vec_min, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = SymMat2::new(2.0, 0.8, 1.3);
        let e = m.eigen();
        let vmin = e.vec_min;
        let vmax = e.vec_max();
        let rebuilt = SymMat2::outer(vmax).scale(e.max).add(SymMat2::outer(vmin).scale(e.min));
        assert_relative_eq!(rebuilt.xx, m.xx, epsilon = 1e-12);
        assert_relative_eq!(rebuilt.xy, m.xy, epsilon = 1e-12);
        assert_relative_eq!(rebuilt.yy, m.yy, epsilon = 1e-12);
        // eigenvector pair is orthonormal by construction
        assert_relative_eq!(vmin.dot(vmax), 0.0, epsilon = 1e-15);
        assert_relative_eq!(vmin.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn velocity_integrate_round_trip() {
        let v = Velocity2::new(1.5, -0.2, 0.3);
        let pose = v.integrate(0.25);
        let back = Velocity2::from_pose_delta(&pose, 0.25);
        assert_relative_eq!(back.vx, v.vx, epsilon = 1e-12);
        assert_relative_eq!(back.vy, v.vy, epsilon = 1e-12);
        assert_relative_eq!(back.omega, v.omega, epsilon = 1e-12);
    }
}
