//! Posed-image projects.
//!
//! A project lives in `<data>/projects/<id>/` with a `manifest.json` and
//! the images it references. Image `file` paths are relative to the project
//! directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{Camera, Intrinsics, Pose};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("unknown image {image_id} in project {project_id}")]
    UnknownImage { project_id: String, image_id: String },
    #[error("project {0} already exists")]
    DuplicateProject(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("image file {0} does not exist")]
    MissingImage(String),
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub file: String,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl ImageEntry {
    pub fn camera(&self) -> Camera {
        Camera::new(self.pose, self.intrinsics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub name: String,
    pub images: Vec<ImageEntry>,
    #[serde(default = "Utc::now")]
    pub created_at: DateTime<Utc>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && id != "."
        && id != ".."
}

fn relative_inside(file: &str) -> bool {
    let path = Path::new(file);
    !file.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)))
}

impl Project {
    /// Structural checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ProjectError> {
        let bad = |m: String| Err(ProjectError::InvalidManifest(m));
        if !valid_id(&self.id) {
            return bad(format!("project id {:?} must be 1-128 characters of [A-Za-z0-9._-]", self.id));
        }
        if self.images.is_empty() {
            return bad("a project needs at least one image".into());
        }
        let mut seen = std::collections::HashSet::new();
        for img in &self.images {
            if !valid_id(&img.image_id) {
                return bad(format!("image id {:?} must be 1-128 characters of [A-Za-z0-9._-]", img.image_id));
            }
            if !seen.insert(img.image_id.as_str()) {
                return bad(format!("duplicate image id {}", img.image_id));
            }
            if !relative_inside(&img.file) {
                return bad(format!("image file {:?} must be a relative path inside the project", img.file));
            }
        }
        Ok(())
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

/// All projects under `<data>/projects`, loaded at open.
#[derive(Debug)]
pub struct ProjectStore {
    root: PathBuf,
    projects: RwLock<BTreeMap<String, Project>>,
}

impl ProjectStore {
    pub fn open(data_dir: &Path) -> Result<Self, ProjectError> {
        let root = data_dir.join("projects");
        fs::create_dir_all(&root)?;
        let mut projects = BTreeMap::new();
        for entry in fs::read_dir(&root)? {
            let entry = entry?;
            let manifest = entry.path().join(MANIFEST_FILE);
            if !manifest.is_file() {
                continue;
            }
            let project = read_manifest(&manifest)?;
            if project.id != entry.file_name().to_string_lossy() {
                return Err(ProjectError::InvalidManifest(format!(
                    "{} holds project id {}",
                    manifest.display(),
                    project.id
                )));
            }
            projects.insert(project.id.clone(), project);
        }
        Ok(Self {
            root,
            projects: RwLock::new(projects),
        })
    }

    pub fn project_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn list(&self) -> Vec<Project> {
        self.projects.read().unwrap().values().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<Project, ProjectError> {
        self.projects
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ProjectError::UnknownProject(id.to_string()))
    }

    /// Registers a project whose images already sit in its directory and
    /// writes its manifest.
    pub fn create(&self, project: Project) -> Result<Project, ProjectError> {
        project.validate()?;
        let mut projects = self.projects.write().unwrap();
        if projects.contains_key(&project.id) {
            return Err(ProjectError::DuplicateProject(project.id));
        }
        let dir = self.project_dir(&project.id);
        for img in &project.images {
            if !dir.join(&img.file).is_file() {
                return Err(ProjectError::MissingImage(img.file.clone()));
            }
        }
        write_manifest(&dir, &project)?;
        projects.insert(project.id.clone(), project.clone());
        Ok(project)
    }

    pub fn image_path(&self, project_id: &str, image_id: &str) -> Result<PathBuf, ProjectError> {
        let project = self.get(project_id)?;
        let img = project.image(image_id).ok_or_else(|| ProjectError::UnknownImage {
            project_id: project_id.to_string(),
            image_id: image_id.to_string(),
        })?;
        Ok(self.project_dir(project_id).join(&img.file))
    }
}

pub fn read_manifest(path: &Path) -> Result<Project, ProjectError> {
    let text = fs::read_to_string(path)?;
    let project: Project = serde_json::from_str(&text)
        .map_err(|e| ProjectError::InvalidManifest(format!("{}: {e}", path.display())))?;
    project.validate()?;
    Ok(project)
}

pub fn write_manifest(project_dir: &Path, project: &Project) -> Result<(), ProjectError> {
    fs::create_dir_all(project_dir)?;
    let text = serde_json::to_string_pretty(project).expect("project serializes");
    crate::session::write_atomic(&project_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(())
}
