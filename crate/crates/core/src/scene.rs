//! Synthetic posed-image projects.
//!
//! Renders one image per camera of a ring scene, with a black cross marker
//! centered on the pixel that contains each target's projection, and writes
//! the project manifest, the ground-truth CSV (`truth.csv`) and the exact
//! projected marker positions (`markers.csv`) next to it.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;

use crate::camera::Camera;
use crate::formats::{write_points_csv, FormatError};
use crate::geometry::Vec3;
use crate::project::{write_manifest, ImageEntry, Project, ProjectError};
use crate::sim::{make_ring_scene, SimError, SyntheticScene};

/// Half length of a marker arm in pixels.
pub const MARKER_ARM: i64 = 8;
pub const MARKER_COLOR: Rgb<u8> = Rgb([0, 0, 0]);

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct RingProjectOptions {
    pub project_id: String,
    pub cameras: usize,
    pub radius: f64,
    pub target: Vec3,
    pub seed: u64,
}

impl Default for RingProjectOptions {
    fn default() -> Self {
        Self {
            project_id: "ring".into(),
            cameras: 5,
            radius: 10.0,
            target: Vec3::zeros(),
            seed: 1,
        }
    }
}

/// Exact projection of a target into an image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub point_id: String,
    pub image_id: String,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct WrittenScene {
    pub project: Project,
    pub project_dir: PathBuf,
    pub scene: SyntheticScene,
    pub truth: Vec<(String, Vec3)>,
    pub markers: Vec<Marker>,
}

/// Light background with a faint grid so pan and zoom are visible.
fn background(width: u32, height: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        if x % 64 == 0 || y % 64 == 0 {
            Rgb([200, 205, 210])
        } else {
            let shade = 225 + ((x + y) * 20 / (width + height)) as u8;
            Rgb([shade, shade, shade.saturating_add(5)])
        }
    })
}

/// Draws a cross centered on the pixel containing `(u, v)`.
pub fn draw_marker(img: &mut RgbImage, u: f64, v: f64) {
    let col = u.floor() as i64;
    let row = v.floor() as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut put = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, MARKER_COLOR);
        }
    };
    for d in -MARKER_ARM..=MARKER_ARM {
        put(col + d, row);
        put(col, row + d);
    }
}

pub fn render_image(camera: &Camera, targets: &[(String, Vec3)]) -> RgbImage {
    let k = &camera.intrinsics;
    let mut img = background(k.width(), k.height());
    for (_, p) in targets {
        if camera.sees(p) {
            let (u, v) = camera.project(p).pixel().expect("visible");
            draw_marker(&mut img, u, v);
        }
    }
    img
}

/// Writes a ring project into `<data_dir>/projects/<id>/`.
pub fn write_ring_project(data_dir: &Path, opts: &RingProjectOptions) -> Result<WrittenScene, SceneError> {
    let scene = make_ring_scene(opts.radius, opts.cameras, opts.target, opts.seed)?;
    let project_dir = data_dir.join("projects").join(&opts.project_id);
    let images_dir = project_dir.join("images");
    fs::create_dir_all(&images_dir)?;

    let truth: Vec<(String, Vec3)> = scene
        .target_points
        .iter()
        .map(|t| (t.id.clone(), t.position()))
        .collect();

    let mut images = Vec::with_capacity(scene.cameras.len());
    let mut markers = Vec::new();
    for (i, camera) in scene.cameras.iter().enumerate() {
        let image_id = format!("cam{i:02}");
        let file = format!("images/{image_id}.png");
        render_image(camera, &truth).save(project_dir.join(&file))?;
        for (id, p) in &truth {
            if camera.sees(p) {
                let (u, v) = camera.project(p).pixel().expect("visible");
                markers.push(Marker {
                    point_id: id.clone(),
                    image_id: image_id.clone(),
                    u,
                    v,
                });
            }
        }
        images.push(ImageEntry {
            image_id,
            file,
            intrinsics: camera.intrinsics,
            pose: camera.pose,
        });
    }

    let project = Project {
        id: opts.project_id.clone(),
        name: format!("Synthetic ring ({} cameras, seed {})", opts.cameras, opts.seed),
        images,
        created_at: chrono::Utc::now(),
    };
    project.validate()?;
    write_manifest(&project_dir, &project)?;

    write_points_csv(fs::File::create(project_dir.join("truth.csv"))?, &truth)?;
    let mut w = csv::Writer::from_path(project_dir.join("markers.csv")).map_err(FormatError::from)?;
    for m in &markers {
        w.serialize(m).map_err(FormatError::from)?;
    }
    w.flush()?;

    Ok(WrittenScene {
        project,
        project_dir,
        scene,
        truth,
        markers,
    })
}
