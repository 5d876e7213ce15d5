//! Least-squares intersection of viewing rays.
//!
//! Each ray `(C, d)` constrains the unknown point `P` through
//! `(P - C) × d = 0`. Two ways of turning that into rows of a linear system
//! are supported, see [`SystemMode`]. The stacked system `A x = b` is solved
//! in the least-squares sense through a Householder QR decomposition of `A`,
//! whose triangular factor also yields `(AᵀA)⁻¹` for the covariance.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// World coordinates in meters.
pub type Vec3 = Vector3<f64>;

/// Maximum deviation of a ray direction from unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Largest accepted condition number of the normal matrix `AᵀA`.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigenvalues of a covariance below this are rejected as indefinite.
pub const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("at least two rays are required, got {got}")]
    FewerThanTwoRays { got: usize },
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("degenerate geometry (condition number {condition:e})")]
    DegenerateGeometry { condition: f64 },
    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("invalid confidence scale {0}")]
    InvalidConfidenceScale(f64),
}

pub(crate) fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// A viewing ray: camera center plus unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RayRepr", into = "RayRepr")]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

#[derive(Serialize, Deserialize)]
struct RayRepr {
    origin: [f64; 3],
    direction: [f64; 3],
}

impl From<Ray> for RayRepr {
    fn from(ray: Ray) -> Self {
        RayRepr {
            origin: ray.origin.into(),
            direction: ray.direction.into(),
        }
    }
}

impl TryFrom<RayRepr> for Ray {
    type Error = GeometryError;

    fn try_from(repr: RayRepr) -> Result<Self, Self::Error> {
        Ray::from_stored(repr.origin.into(), repr.direction.into())
    }
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        Self::check(&origin, &direction)?;
        let norm = direction.norm();
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    /// Like [`Ray::new`], but keeps a direction that is already unit length
    /// to within 1e-12 untouched so that stored rays reload bit for bit.
    pub fn from_stored(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        Self::check(&origin, &direction)?;
        if (direction.norm() - 1.0).abs() <= 1e-12 {
            Ok(Self { origin, direction })
        } else {
            Self::new(origin, direction)
        }
    }

    fn check(origin: &Vec3, direction: &Vec3) -> Result<(), GeometryError> {
        if !is_finite(origin) {
            return Err(GeometryError::InvalidRay("origin is not finite".into()));
        }
        if !is_finite(direction) {
            return Err(GeometryError::InvalidRay("direction is not finite".into()));
        }
        let norm = direction.norm();
        if !(norm > f64::MIN_POSITIVE) || !norm.is_finite() {
            return Err(GeometryError::InvalidRay("direction has zero length".into()));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Perpendicular distance from `point` to the infinite line of the ray.
    pub fn distance_to(&self, point: &Vec3) -> f64 {
        (point - self.origin).cross(&self.direction).norm()
    }
}

/// How each ray is turned into rows of the linear system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemMode {
    /// Two of the three cross-product equations per ray:
    /// `[0, w, -v | wY - vZ]` and `[-w, 0, u | -wX + uZ]`.
    #[serde(rename = "paper")]
    PaperTwoRow,
    /// The orthogonal projector `I - d dᵀ` per ray, so that each ray's
    /// residual block is the perpendicular offset of the point from the ray.
    #[default]
    #[serde(rename = "projection")]
    ProjectionThreeRow,
}

impl SystemMode {
    pub fn rows_per_ray(self) -> usize {
        match self {
            SystemMode::PaperTwoRow => 2,
            SystemMode::ProjectionThreeRow => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemMode::PaperTwoRow => "paper",
            SystemMode::ProjectionThreeRow => "projection",
        }
    }
}

impl std::str::FromStr for SystemMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(SystemMode::PaperTwoRow),
            "projection" => Ok(SystemMode::ProjectionThreeRow),
            other => Err(format!("unknown mode {other:?}, expected \"paper\" or \"projection\"")),
        }
    }
}

impl std::fmt::Display for SystemMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Redundancy of an intersection of `ray_count` rays: two independent
/// observations per ray, three unknowns. The same in both modes since the
/// three projector rows of a ray have rank two.
pub fn redundancy(ray_count: usize) -> usize {
    2 * ray_count - 3
}

/// Stacked design matrix and right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mode: SystemMode,
}

pub fn build_system(rays: &[Ray], mode: SystemMode) -> Result<LinearSystem, GeometryError> {
    if rays.len() < 2 {
        return Err(GeometryError::FewerThanTwoRays { got: rays.len() });
    }
    for (i, ray) in rays.iter().enumerate() {
        if (ray.direction.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeometryError::InvalidRay(format!("direction of ray {i} is not unit length")));
        }
    }

    let per_ray = mode.rows_per_ray();
    let rows = per_ray * rays.len();
    let mut a = DMatrix::zeros(rows, 3);
    let mut b = DVector::zeros(rows);

    for (i, ray) in rays.iter().enumerate() {
        let r0 = i * per_ray;
        let c = ray.origin;
        let d = ray.direction;
        match mode {
            SystemMode::PaperTwoRow => {
                let (u, v, w) = (d.x, d.y, d.z);
                a[(r0, 0)] = 0.0;
                a[(r0, 1)] = w;
                a[(r0, 2)] = -v;
                b[r0] = w * c.y - v * c.z;
                a[(r0 + 1, 0)] = -w;
                a[(r0 + 1, 1)] = 0.0;
                a[(r0 + 1, 2)] = u;
                b[r0 + 1] = -w * c.x + u * c.z;
            }
            SystemMode::ProjectionThreeRow => {
                let projector = Matrix3::identity() - d * d.transpose();
                let rhs = projector * c;
                for r in 0..3 {
                    for k in 0..3 {
                        a[(r0 + r, k)] = projector[(r, k)];
                    }
                    b[r0 + r] = rhs[r];
                }
            }
        }
    }

    Ok(LinearSystem { a, b, mode })
}

impl LinearSystem {
    pub fn ray_count(&self) -> usize {
        self.a.nrows() / self.mode.rows_per_ray()
    }

    /// Least-squares solution with residuals, σ̂₀ and covariance.
    pub fn solve(&self) -> Result<IntersectionResult, GeometryError> {
        let qr = self.a.clone().qr();
        let r: Matrix3<f64> = Matrix3::from_iterator(qr.r().iter().copied());

        // cond(AᵀA) from the eigenvalues of RᵀR = AᵀA
        let eig = (r.transpose() * r).symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(GeometryError::DegenerateGeometry { condition });
        }
        let r_inv = r
            .try_inverse()
            .ok_or(GeometryError::DegenerateGeometry { condition: f64::INFINITY })?;

        // x = R⁻¹ Qᵀ b
        let qt_b = qr.q().transpose() * &self.b;
        let x: Vec3 = r_inv * Vec3::new(qt_b[0], qt_b[1], qt_b[2]);

        // (AᵀA)⁻¹ = R⁻¹ R⁻ᵀ
        let inv_normal = r_inv * r_inv.transpose();

        let residuals = &self.a * DVector::from_column_slice(x.as_slice()) - &self.b;
        let ray_count = self.ray_count();
        let redundancy = redundancy(ray_count);
        let vtv = residuals.norm_squared();
        let variance = vtv / redundancy as f64;
        let covariance = symmetrize(&(inv_normal * variance));

        Ok(IntersectionResult {
            point: x,
            residuals: residuals.iter().copied().collect(),
            sigma0: variance.sqrt(),
            redundancy,
            covariance,
            ray_count,
            mode: self.mode,
        })
    }
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Intersects `rays` in the least-squares sense.
pub fn intersect_rays(rays: &[Ray], mode: SystemMode) -> Result<IntersectionResult, GeometryError> {
    build_system(rays, mode)?.solve()
}

/// Estimated point and its precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResultRepr", into = "ResultRepr")]
pub struct IntersectionResult {
    pub point: Vec3,
    /// `A x̂ - b`
    pub residuals: Vec<f64>,
    /// A posteriori standard deviation of unit weight, also shown as the
    /// point's RMS.
    pub sigma0: f64,
    pub redundancy: usize,
    /// `σ̂₀² (AᵀA)⁻¹` in m².
    pub covariance: Matrix3<f64>,
    pub ray_count: usize,
    pub mode: SystemMode,
}

#[derive(Serialize, Deserialize)]
struct ResultRepr {
    mode: SystemMode,
    point: [f64; 3],
    sigma0: f64,
    redundancy: usize,
    ray_count: usize,
    covariance: [[f64; 3]; 3],
    residuals: Vec<f64>,
}

impl From<IntersectionResult> for ResultRepr {
    fn from(r: IntersectionResult) -> Self {
        let c = &r.covariance;
        ResultRepr {
            mode: r.mode,
            point: r.point.into(),
            sigma0: r.sigma0,
            redundancy: r.redundancy,
            ray_count: r.ray_count,
            covariance: [
                [c[(0, 0)], c[(0, 1)], c[(0, 2)]],
                [c[(1, 0)], c[(1, 1)], c[(1, 2)]],
                [c[(2, 0)], c[(2, 1)], c[(2, 2)]],
            ],
            residuals: r.residuals,
        }
    }
}

impl TryFrom<ResultRepr> for IntersectionResult {
    type Error = String;

    fn try_from(r: ResultRepr) -> Result<Self, Self::Error> {
        if r.residuals.len() != r.ray_count * r.mode.rows_per_ray() {
            return Err(format!(
                "{} residuals do not match {} rays in {} mode",
                r.residuals.len(),
                r.ray_count,
                r.mode
            ));
        }
        let c = r.covariance;
        Ok(IntersectionResult {
            point: r.point.into(),
            residuals: r.residuals,
            sigma0: r.sigma0,
            redundancy: r.redundancy,
            covariance: Matrix3::new(
                c[0][0], c[0][1], c[0][2], c[1][0], c[1][1], c[1][2], c[2][0], c[2][1], c[2][2],
            ),
            ray_count: r.ray_count,
            mode: r.mode,
        })
    }
}

impl IntersectionResult {
    /// Per-axis variances `(σx², σy², σz²)`.
    pub fn variances(&self) -> Vec3 {
        self.covariance.diagonal()
    }

    /// Upper triangle of the covariance: xx, xy, xz, yy, yz, zz.
    pub fn covariance_upper(&self) -> [f64; 6] {
        let c = &self.covariance;
        [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]]
    }

    pub fn ellipsoid(&self, confidence_scale: f64) -> Result<ErrorEllipsoid, GeometryError> {
        ellipsoid_from_covariance(self.point, &self.covariance, confidence_scale)
    }

    /// Largest absolute difference to `other` over point, σ̂₀, covariance
    /// and residuals. Infinite if the shapes differ.
    pub fn max_abs_difference(&self, other: &IntersectionResult) -> f64 {
        if self.mode != other.mode
            || self.ray_count != other.ray_count
            || self.redundancy != other.redundancy
            || self.residuals.len() != other.residuals.len()
        {
            return f64::INFINITY;
        }
        let point = (self.point - other.point).amax();
        let cov = (self.covariance - other.covariance).amax();
        let res = self
            .residuals
            .iter()
            .zip(&other.residuals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let diffs = [point, cov, res, (self.sigma0 - other.sigma0).abs()];
        if diffs.iter().any(|d| d.is_nan()) {
            return f64::INFINITY;
        }
        diffs.into_iter().fold(0.0, f64::max)
    }
}

/// Principal axes of a covariance, scaled for display.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEllipsoid {
    #[serde(serialize_with = "ser_vec3")]
    pub center: Vec3,
    /// Descending.
    pub semi_axes: [f64; 3],
    #[serde(serialize_with = "ser_axes")]
    pub axes: [Vec3; 3],
    pub confidence_scale: f64,
}

fn ser_vec3<S: serde::Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
    <[f64; 3]>::from(*v).serialize(s)
}

fn ser_axes<S: serde::Serializer>(axes: &[Vec3; 3], s: S) -> Result<S::Ok, S::Error> {
    let rows: [[f64; 3]; 3] = [axes[0].into(), axes[1].into(), axes[2].into()];
    rows.serialize(s)
}

pub fn ellipsoid_from_covariance(
    center: Vec3,
    covariance: &Matrix3<f64>,
    confidence_scale: f64,
) -> Result<ErrorEllipsoid, GeometryError> {
    if !(confidence_scale > 0.0) || !confidence_scale.is_finite() {
        return Err(GeometryError::InvalidConfidenceScale(confidence_scale));
    }
    if covariance.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::NotPositiveSemidefinite { min_eigenvalue: f64::NAN });
    }
    let eig = SymmetricEigen::new(symmetrize(covariance));
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < PSD_TOLERANCE {
        return Err(GeometryError::NotPositiveSemidefinite { min_eigenvalue });
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut semi_axes = [0.0; 3];
    let mut axes = [Vec3::zeros(); 3];
    for (slot, &k) in order.iter().enumerate() {
        semi_axes[slot] = confidence_scale * eig.eigenvalues[k].max(0.0).sqrt();
        let mut axis: Vec3 = eig.eigenvectors.column(k).into_owned();
        axis.normalize_mut();
        // Sign is arbitrary; make the dominant component positive.
        if axis[axis.iamax()] < 0.0 {
            axis = -axis;
        }
        axes[slot] = axis;
    }

    Ok(ErrorEllipsoid {
        center,
        semi_axes,
        axes,
        confidence_scale,
    })
}
