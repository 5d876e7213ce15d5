//! JSON shapes returned by the API.

use raymeter_core::camera::PixelPick;
use raymeter_core::session::{MeasuredPoint, MeasurementSession, PointStatus};
use raymeter_core::{IntersectionResult, SystemMode};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipsoidView {
    /// One-sigma semi-axes, largest first.
    pub semi_axes: [f64; 3],
    /// Unit axis directions matching `semi_axes`.
    pub directions: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultView {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub sigma0: f64,
    pub redundancy: usize,
    /// Upper triangle of Q: xx, xy, xz, yy, yz, zz.
    pub covariance: [f64; 6],
    pub ellipsoid: Option<EllipsoidView>,
}

impl From<&IntersectionResult> for ResultView {
    fn from(r: &IntersectionResult) -> Self {
        let ellipsoid = r.ellipsoid(1.0).ok().map(|e| EllipsoidView {
            semi_axes: e.semi_axes,
            directions: e.axes.map(|a| [a.x, a.y, a.z]),
        });
        Self {
            x: r.point.x,
            y: r.point.y,
            z: r.point.z,
            sigma0: r.sigma0,
            redundancy: r.redundancy,
            covariance: r.covariance_upper(),
            ellipsoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayView {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub pick: Option<PixelPick>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointView {
    pub id: String,
    pub label: String,
    pub mode: SystemMode,
    pub n_rays: usize,
    pub status: PointStatus,
    pub rays: Vec<RayView>,
    pub result: Option<ResultView>,
}

impl From<&MeasuredPoint> for PointView {
    fn from(p: &MeasuredPoint) -> Self {
        Self {
            id: p.id.clone(),
            label: p.label.clone(),
            mode: p.mode,
            n_rays: p.rays.len(),
            status: p.status(),
            rays: p
                .rays
                .iter()
                .map(|r| RayView {
                    origin: r.ray.origin().into(),
                    direction: r.ray.direction().into(),
                    pick: r.pick.clone(),
                })
                .collect(),
            result: p.result.as_ref().map(ResultView::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub id: String,
    pub project_id: String,
    pub name: String,
    pub created_at: String,
    pub updated_at: String,
    pub points: Vec<PointView>,
}

impl From<&MeasurementSession> for SessionView {
    fn from(s: &MeasurementSession) -> Self {
        Self {
            id: s.id.clone(),
            project_id: s.project_id.clone(),
            name: s.name.clone(),
            created_at: s.created_at.to_rfc3339(),
            updated_at: s.updated_at.to_rfc3339(),
            points: s.points.iter().map(PointView::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub project_id: String,
    pub name: String,
    pub n_points: usize,
    pub updated_at: String,
}

impl From<&MeasurementSession> for SessionSummary {
    fn from(s: &MeasurementSession) -> Self {
        Self {
            id: s.id.clone(),
            project_id: s.project_id.clone(),
            name: s.name.clone(),
            n_points: s.points.len(),
            updated_at: s.updated_at.to_rfc3339(),
        }
    }
}
