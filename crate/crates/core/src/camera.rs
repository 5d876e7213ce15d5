//! Pinhole camera model without distortion.
//!
//! Camera frame: +x right, +y down, +z forward into the scene. Image
//! coordinates have their origin at the top-left corner of the top-left
//! pixel, so pixel centers sit at half-integer coordinates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_finite, GeometryError, Ray, Vec3};

/// Depth below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("pick ({u}, {v}) is outside the {width}x{height} image")]
    PickOutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl From<Intrinsics> for IntrinsicsRepr {
    fn from(k: Intrinsics) -> Self {
        IntrinsicsRepr {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl TryFrom<IntrinsicsRepr> for Intrinsics {
    type Error = CameraError;

    fn try_from(r: IntrinsicsRepr) -> Result<Self, Self::Error> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        let bad = |msg: String| Err(CameraError::InvalidIntrinsics(msg));
        if !(fx > 0.0 && fx.is_finite() && fy > 0.0 && fy.is_finite()) {
            return bad(format!("focal lengths must be positive, got fx={fx}, fy={fy}"));
        }
        if width == 0 || height == 0 {
            return bad(format!("image size must be positive, got {width}x{height}"));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return bad(format!("principal point ({cx}, {cy}) is outside the {width}x{height} image"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u <= self.width as f64 && v >= 0.0 && v <= self.height as f64
    }
}

/// Camera center and world-from-camera rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    center: Vec3,
    rotation: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    center: [f64; 3],
    rotation_row_major: [f64; 9],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let r = &p.rotation;
        PoseRepr {
            center: p.center.into(),
            rotation_row_major: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = CameraError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::new(r.center.into(), Matrix3::from_row_slice(&r.rotation_row_major))
    }
}

impl Pose {
    pub fn new(center: Vec3, rotation: Matrix3<f64>) -> Result<Self, CameraError> {
        if !is_finite(&center) {
            return Err(CameraError::InvalidPose("center is not finite".into()));
        }
        if rotation.iter().any(|x| !x.is_finite()) {
            return Err(CameraError::InvalidPose("rotation is not finite".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho > ROTATION_TOLERANCE {
            return Err(CameraError::InvalidPose(format!(
                "rotation is not orthonormal (deviation {ortho:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(CameraError::InvalidPose(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(Self { center, rotation })
    }

    /// Camera at `center` looking at `target`, with image "up" as close to
    /// `up` as possible.
    pub fn look_at(center: Vec3, target: Vec3, up: Vec3) -> Result<Self, CameraError> {
        let forward = target - center;
        if !(forward.norm() > 0.0) {
            return Err(CameraError::InvalidPose("target coincides with center".into()));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if !(right.norm() > 1e-12) {
            return Err(CameraError::InvalidPose("viewing direction is parallel to up".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        Pose::new(center, Matrix3::from_columns(&[right, down, forward]))
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    pub fn to_camera(&self, point: &Vec3) -> Vec3 {
        self.rotation.transpose() * (point - self.center)
    }
}

/// An operator's pixel selection on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelPick {
    pub image_id: String,
    pub u: f64,
    pub v: f64,
}

impl PixelPick {
    pub fn new(image_id: impl Into<String>, u: f64, v: f64) -> Self {
        Self {
            image_id: image_id.into(),
            u,
            v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    Behind,
}

impl Projection {
    pub fn pixel(self) -> Option<(f64, f64)> {
        match self {
            Projection::Pixel { u, v } => Some((u, v)),
            Projection::Behind => None,
        }
    }
}

/// World-space ray through a pixel, without a bounds check.
pub fn ray_through(pose: &Pose, intrinsics: &Intrinsics, u: f64, v: f64) -> Result<Ray, GeometryError> {
    let dir_cam = Vector3::new(
        (u - intrinsics.cx) / intrinsics.fx,
        (v - intrinsics.cy) / intrinsics.fy,
        1.0,
    )
    .normalize();
    Ray::new(pose.center, pose.rotation * dir_cam)
}

pub fn ray_from_pixel(pose: &Pose, intrinsics: &Intrinsics, pick: &PixelPick) -> Result<Ray, CameraError> {
    if !intrinsics.contains(pick.u, pick.v) {
        return Err(CameraError::PickOutOfBounds {
            u: pick.u,
            v: pick.v,
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    Ok(ray_through(pose, intrinsics, pick.u, pick.v)?)
}

pub fn project_point(pose: &Pose, intrinsics: &Intrinsics, point: &Vec3) -> Projection {
    let p = pose.to_camera(point);
    if !(p.z > MIN_DEPTH) {
        return Projection::Behind;
    }
    Projection::Pixel {
        u: intrinsics.fx * p.x / p.z + intrinsics.cx,
        v: intrinsics.fy * p.y / p.z + intrinsics.cy,
    }
}

/// A posed pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Camera {
    pub fn new(pose: Pose, intrinsics: Intrinsics) -> Self {
        Self { pose, intrinsics }
    }

    pub fn project(&self, point: &Vec3) -> Projection {
        project_point(&self.pose, &self.intrinsics, point)
    }

    /// Whether `point` is in front of the camera and projects inside the image.
    pub fn sees(&self, point: &Vec3) -> bool {
        match self.project(point) {
            Projection::Pixel { u, v } => self.intrinsics.contains(u, v),
            Projection::Behind => false,
        }
    }

    pub fn ray_from_pixel(&self, pick: &PixelPick) -> Result<Ray, CameraError> {
        ray_from_pixel(&self.pose, &self.intrinsics, pick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intrinsics() -> Intrinsics {
        Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, 1000, 1000).unwrap()
    }

    #[test]
    fn principal_point_pick_is_forward_axis() {
        let pose = Pose::look_at(Vec3::new(3.0, -4.0, 10.0), Vec3::new(0.5, 1.0, 0.0), Vec3::z()).unwrap();
        let k = intrinsics();
        let ray = ray_from_pixel(&pose, &k, &PixelPick::new("a", k.cx(), k.cy())).unwrap();
        assert!((ray.direction() - pose.forward()).norm() < 1e-15);
        assert_eq!(ray.origin(), pose.center());
    }

    #[test]
    fn offset_pick_direction() {
        let pose = Pose::new(Vec3::zeros(), Matrix3::identity()).unwrap();
        let wide = Intrinsics::new(1000.0, 1000.0, 500.0, 500.0, 2000, 1000).unwrap();
        let ray = ray_from_pixel(&pose, &wide, &PixelPick::new("a", 1500.0, 500.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ray.direction() - Vec3::new(s, 0.0, s)).norm() < 1e-12);
        // outside by any amount
        assert!(matches!(
            ray_from_pixel(&pose, &intrinsics(), &PixelPick::new("a", 1000.0001, 500.0)),
            Err(CameraError::PickOutOfBounds { .. })
        ));
        assert!(ray_from_pixel(&pose, &intrinsics(), &PixelPick::new("a", 0.0, 1000.0)).is_ok());
        assert!(ray_from_pixel(&pose, &intrinsics(), &PixelPick::new("a", -0.5, 10.0)).is_err());
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let pose = Pose::look_at(Vec3::new(1.0, 2.0, 3.0), Vec3::new(-4.0, 0.0, 1.0), Vec3::z()).unwrap();
        let k = intrinsics();
        for depth in [0.1, 1.0, 250.0] {
            let p = pose.center() + pose.forward() * depth;
            let (u, v) = project_point(&pose, &k, &p).pixel().unwrap();
            assert!((u - k.cx()).abs() < 1e-9 && (v - k.cy()).abs() < 1e-9);
        }
        let behind = pose.center() - pose.forward() * 2.0;
        assert_eq!(project_point(&pose, &k, &behind), Projection::Behind);
        assert_eq!(project_point(&pose, &k, &pose.center()), Projection::Behind);
    }

    #[test]
    fn image_axes_follow_y_down_convention() {
        // Looking along +x with world up +z: world -y is image right, world -z image down.
        let pose = Pose::look_at(Vec3::zeros(), Vec3::x(), Vec3::z()).unwrap();
        let k = intrinsics();
        let (u, v) = project_point(&pose, &k, &Vec3::new(10.0, -1.0, 0.0)).pixel().unwrap();
        assert!(u > k.cx() && (v - k.cy()).abs() < 1e-9);
        let (u, v) = project_point(&pose, &k, &Vec3::new(10.0, 0.0, -1.0)).pixel().unwrap();
        assert!(v > k.cy() && (u - k.cx()).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 2, 2).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 2.0, 1.0, 2, 2).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 1.0, 1.0, 0, 2).is_err());
        let mirror = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(Vec3::zeros(), mirror).is_err());
        assert!(Pose::new(Vec3::zeros(), Matrix3::identity() * 1.01).is_err());
        assert!(Pose::look_at(Vec3::zeros(), Vec3::zeros(), Vec3::z()).is_err());
        assert!(Pose::look_at(Vec3::zeros(), Vec3::z(), Vec3::z()).is_err());
    }

    #[test]
    fn pose_json_is_row_major() {
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let pose = Pose::new(Vec3::new(1.0, 2.0, 3.0), rot).unwrap();
        let json = serde_json::to_value(pose).unwrap();
        assert_eq!(
            json["rotation_row_major"],
            serde_json::json!([0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        );
        let back: Pose = serde_json::from_value(json).unwrap();
        assert_eq!(back, pose);
    }
}
