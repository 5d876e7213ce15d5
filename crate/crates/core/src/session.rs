//! Measurement sessions: named points with their rays and results.
//!
//! Sessions are stored as one JSON document per session in
//! `<data>/sessions/<id>.json`. The document carries a SHA-256 checksum of
//! the session body, and every stored result is recomputed from its rays
//! on load.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::camera::PixelPick;
use crate::geometry::{intersect_rays, GeometryError, IntersectionResult, Ray, SystemMode};

pub const SESSION_FORMAT: &str = "raymeter.session/1";

/// Largest accepted difference between a stored and a recomputed result.
pub const RESULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("point {0} already exists")]
    DuplicatePoint(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("ray index {index} out of range for {len} rays")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] std::io::Error),
    #[error("corrupt session {id}: {reason}")]
    CorruptSession { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    InsufficientRays,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    pub ray: Ray,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pick: Option<PixelPick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub id: String,
    pub label: String,
    pub mode: SystemMode,
    pub rays: Vec<RayRecord>,
    pub result: Option<IntersectionResult>,
    /// Set when two or more rays gave a singular or ill-conditioned system.
    pub degenerate: bool,
}

impl MeasuredPoint {
    pub fn new(id: impl Into<String>, label: impl Into<String>, mode: SystemMode) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            mode,
            rays: Vec::new(),
            result: None,
            degenerate: false,
        }
    }

    pub fn status(&self) -> PointStatus {
        if self.rays.len() < 2 {
            PointStatus::InsufficientRays
        } else if self.degenerate {
            PointStatus::Degenerate
        } else {
            PointStatus::Ok
        }
    }

    fn rays(&self) -> Vec<Ray> {
        self.rays.iter().map(|r| r.ray).collect()
    }

    /// What `result` and `degenerate` should be given the stored rays.
    fn derive(&self) -> Result<(Option<IntersectionResult>, bool), SessionError> {
        if self.rays.len() < 2 {
            return Ok((None, false));
        }
        match intersect_rays(&self.rays(), self.mode) {
            Ok(r) => Ok((Some(r), false)),
            Err(GeometryError::DegenerateGeometry { .. }) => Ok((None, true)),
            Err(e) => Err(SessionError::InvalidRay(e.to_string())),
        }
    }

    fn recompute(&mut self) -> Result<(), SessionError> {
        let (result, degenerate) = self.derive()?;
        self.result = result;
        self.degenerate = degenerate;
        Ok(())
    }

    /// Checks that the stored result matches a recomputation from the rays.
    fn verify(&self) -> Result<(), String> {
        let (expected, degenerate) = self.derive().map_err(|e| e.to_string())?;
        if degenerate != self.degenerate {
            return Err(format!("point {}: degeneracy flag does not match its rays", self.id));
        }
        match (&self.result, &expected) {
            (None, None) => Ok(()),
            (Some(stored), Some(fresh)) => {
                let diff = stored.max_abs_difference(fresh);
                if diff > RESULT_TOLERANCE {
                    Err(format!("point {}: stored result differs from its rays by {diff:e}", self.id))
                } else {
                    Ok(())
                }
            }
            _ => Err(format!("point {}: result presence does not match its rays", self.id)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSession {
    pub id: String,
    pub project_id: String,
    #[serde(default)]
    pub name: String,
    pub points: Vec<MeasuredPoint>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl MeasurementSession {
    pub fn new(project_id: impl Into<String>, name: impl Into<String>) -> Self {
        let now = Utc::now();
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            project_id: project_id.into(),
            name: name.into(),
            points: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn point(&self, point_id: &str) -> Result<&MeasuredPoint, SessionError> {
        self.points
            .iter()
            .find(|p| p.id == point_id)
            .ok_or_else(|| SessionError::UnknownPoint(point_id.to_string()))
    }

    fn point_mut(&mut self, point_id: &str) -> Result<&mut MeasuredPoint, SessionError> {
        self.points
            .iter_mut()
            .find(|p| p.id == point_id)
            .ok_or_else(|| SessionError::UnknownPoint(point_id.to_string()))
    }

    fn touch(&mut self) {
        self.updated_at = Utc::now();
    }

    /// Adds an empty point. Without an explicit id the next free `p<n>` is
    /// used.
    pub fn add_point(
        &mut self,
        id: Option<String>,
        label: impl Into<String>,
        mode: SystemMode,
    ) -> Result<&MeasuredPoint, SessionError> {
        let id = match id {
            Some(id) => {
                if id.is_empty() {
                    return Err(SessionError::UnknownPoint(id));
                }
                if self.points.iter().any(|p| p.id == id) {
                    return Err(SessionError::DuplicatePoint(id));
                }
                id
            }
            None => (self.points.len() + 1..)
                .map(|n| format!("p{n}"))
                .find(|cand| self.points.iter().all(|p| &p.id != cand))
                .expect("unbounded range"),
        };
        self.points.push(MeasuredPoint::new(id, label, mode));
        self.touch();
        Ok(self.points.last().expect("just pushed"))
    }

    pub fn rename_point(&mut self, point_id: &str, label: impl Into<String>) -> Result<&MeasuredPoint, SessionError> {
        self.point_mut(point_id)?.label = label.into();
        self.touch();
        self.point(point_id)
    }

    pub fn add_ray(
        &mut self,
        point_id: &str,
        ray: Ray,
        pick: Option<PixelPick>,
    ) -> Result<&MeasuredPoint, SessionError> {
        if (ray.direction().norm() - 1.0).abs() > crate::geometry::UNIT_TOLERANCE {
            return Err(SessionError::InvalidRay("direction is not unit length".into()));
        }
        let point = self.point_mut(point_id)?;
        point.rays.push(RayRecord { ray, pick });
        point.recompute()?;
        self.touch();
        self.point(point_id)
    }

    pub fn remove_ray(&mut self, point_id: &str, index: usize) -> Result<&MeasuredPoint, SessionError> {
        let point = self.point_mut(point_id)?;
        if index >= point.rays.len() {
            return Err(SessionError::IndexOutOfRange {
                index,
                len: point.rays.len(),
            });
        }
        point.rays.remove(index);
        point.recompute()?;
        self.touch();
        self.point(point_id)
    }

    /// Recomputes every point from its rays and compares with what is stored.
    pub fn verify(&self) -> Result<(), SessionError> {
        let mut ids = std::collections::HashSet::new();
        for p in &self.points {
            if !ids.insert(p.id.as_str()) {
                return Err(self.corrupt(format!("duplicate point id {}", p.id)));
            }
            p.verify().map_err(|reason| self.corrupt(reason))?;
        }
        Ok(())
    }

    fn corrupt(&self, reason: String) -> SessionError {
        SessionError::CorruptSession {
            id: self.id.clone(),
            reason,
        }
    }
}

/// On-disk wrapper of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub format: String,
    /// Hex SHA-256 of the compact JSON encoding of `session`.
    pub checksum: String,
    pub session: MeasurementSession,
}

pub fn session_checksum(session: &MeasurementSession) -> String {
    let body = serde_json::to_vec(session).expect("session serializes");
    hex::encode(Sha256::digest(&body))
}

impl SessionDocument {
    pub fn seal(session: MeasurementSession) -> Self {
        Self {
            format: SESSION_FORMAT.to_string(),
            checksum: session_checksum(&session),
            session,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session document serializes")
    }

    /// Parses and validates a document: format tag, checksum and
    /// re-derivation of every result.
    pub fn from_json(text: &str) -> Result<MeasurementSession, SessionError> {
        let corrupt = |reason: String| SessionError::CorruptSession {
            id: "?".into(),
            reason,
        };
        let doc: SessionDocument = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        if doc.format != SESSION_FORMAT {
            return Err(corrupt(format!("unsupported format {:?}", doc.format)));
        }
        if session_checksum(&doc.session) != doc.checksum {
            return Err(SessionError::CorruptSession {
                id: doc.session.id.clone(),
                reason: "checksum mismatch".into(),
            });
        }
        doc.session.verify()?;
        Ok(doc.session)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn session_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn persist(dir: &Path, session: &MeasurementSession) -> Result<(), SessionError> {
    if !valid_session_id(&session.id) {
        return Err(SessionError::UnknownSession(session.id.clone()));
    }
    fs::create_dir_all(dir)?;
    let doc = SessionDocument::seal(session.clone());
    write_atomic(&session_path(dir, &session.id), doc.to_json().as_bytes())?;
    Ok(())
}

pub fn load(dir: &Path, id: &str) -> Result<MeasurementSession, SessionError> {
    if !valid_session_id(id) {
        return Err(SessionError::UnknownSession(id.to_string()));
    }
    let text = match fs::read_to_string(session_path(dir, id)) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(SessionError::UnknownSession(id.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let session = SessionDocument::from_json(&text)?;
    if session.id != id {
        return Err(SessionError::CorruptSession {
            id: id.to_string(),
            reason: format!("file holds session {}", session.id),
        });
    }
    Ok(session)
}

/// Sessions under `<data>/sessions`, cached in memory and written through
/// on every mutation. Each session has its own lock, so mutations of one
/// session are serialized while different sessions proceed independently.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<MeasurementSession>>>>,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, SessionError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<MeasurementSession>>, SessionError> {
        let mut map = self.sessions.lock().unwrap();
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let session = load(&self.dir, id)?;
        let h = Arc::new(Mutex::new(session));
        map.insert(id.to_string(), h.clone());
        Ok(h)
    }

    pub fn create(&self, project_id: &str, name: &str) -> Result<MeasurementSession, SessionError> {
        let session = MeasurementSession::new(project_id, name);
        persist(&self.dir, &session)?;
        self.sessions
            .lock()
            .unwrap()
            .insert(session.id.clone(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    /// Consistent snapshot of a session.
    pub fn get(&self, id: &str) -> Result<MeasurementSession, SessionError> {
        Ok(self.handle(id)?.lock().unwrap().clone())
    }

    /// Ids of every stored session, sorted.
    pub fn list_ids(&self) -> Result<Vec<String>, SessionError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Applies `f` to a copy of the session and, if it succeeds, persists
    /// the copy and makes it current. A failed mutation leaves the session
    /// untouched.
    pub fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut MeasurementSession) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let handle = self.handle(id)?;
        let mut guard = handle.lock().unwrap();
        let mut draft = guard.clone();
        let out = f(&mut draft)?;
        persist(&self.dir, &draft)?;
        *guard = draft;
        Ok(out)
    }

    /// Writes every cached session to disk.
    pub fn flush_all(&self) -> Result<usize, SessionError> {
        let handles: Vec<_> = self.sessions.lock().unwrap().values().cloned().collect();
        for h in &handles {
            persist(&self.dir, &h.lock().unwrap())?;
        }
        Ok(handles.len())
    }
}
