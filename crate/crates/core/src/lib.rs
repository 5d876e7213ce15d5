//! Multi-ray spatial intersection for point measurement from posed views.
//!
//! A 3D point is estimated as the least-squares intersection of two or more
//! viewing rays. Besides the point itself every intersection reports its
//! residuals, the a posteriori standard deviation of unit weight, the
//! redundancy of the adjustment and the covariance of the estimate, from
//! which an error ellipsoid can be derived.
//!
//! Modules:
//!
//! - [`geometry`]: rays, system assembly, the least-squares solve and its
//!   uncertainty.
//! - [`camera`]: pinhole camera model turning pixel picks into rays.
//! - [`sim`]: Monte Carlo measurement campaigns and accuracy statistics.
//! - [`session`]: measurement sessions and their on-disk format.
//! - [`project`]: posed-image projects and their manifests.
//! - [`formats`]: rays files, point CSVs and session exports.
//! - [`scene`]: synthetic marker projects for exercising the whole pipeline.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod formats;
pub mod geometry;
pub mod project;
pub mod scene;
pub mod session;
pub mod sim;

pub use camera::{project_point, ray_from_pixel, Camera, Intrinsics, PixelPick, Pose, Projection};
pub use geometry::{
    build_system, ellipsoid_from_covariance, intersect_rays, ErrorEllipsoid, GeometryError,
    IntersectionResult, LinearSystem, Ray, SystemMode, Vec3,
};
