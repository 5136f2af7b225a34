//! 2D spinning-radar odometry.
//!
//! The pipeline turns polar power-return sweeps into an SE(2) trajectory:
//! per-azimuth k-strongest filtering, motion compensation, oriented
//! surface-point extraction with optional kernel smoothing, robust
//! scan-to-multi-keyframe registration, and ICP-based pose refinement.
//! A synthetic sweep simulator and a trajectory-metric evaluator close the
//! loop for end-to-end verification without real sensor data.
//!
//! All numeric code is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the default type parameter and the aliases below
//! pick `f64`.

pub mod eval;
pub mod geometry;
pub mod motion;
pub mod odometry;
pub mod prefilter;
pub mod register;
pub mod scalar;
pub mod sim;
pub mod surface;
pub mod sweep_io;
pub mod trajectory;

pub use scalar::Real;

pub type Vec2D = geometry::Vec2<f64>;
pub type Pose2D = geometry::Pose2<f64>;
pub type Velocity2D = geometry::Velocity2<f64>;
pub type PointCloud2D = prefilter::PointCloud2<f64>;
