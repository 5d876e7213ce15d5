//! Monte Carlo measurement campaigns and accuracy statistics.
//!
//! A campaign repeatedly measures every target of a [`SyntheticScene`]:
//! each target is projected into a fixed selection of cameras, the pixel
//! picks are perturbed with Gaussian noise, and the noisy rays are
//! intersected. Errors against the known targets are summarized as RMSE,
//! mean error and standard deviation of the per-point 3D error norms.
//!
//! Every trial draws from its own ChaCha stream (`seed`, stream = trial
//! index), so trials can run in any order or in parallel and still produce
//! identical reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{ray_through, Camera, Intrinsics, Pose};
use crate::geometry::{intersect_rays, GeometryError, IntersectionResult, Ray, SystemMode, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("point {id} is seen by {visible} cameras, {required} required")]
    InsufficientVisibility { id: String, visible: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trial {trial}, point {id}: {source}")]
    Geometry {
        trial: usize,
        id: String,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no points to evaluate")]
    EmptyInput,
    #[error("measured ids missing from truth: {}", .0.join(", "))]
    UnmatchedId(Vec<String>),
    #[error("duplicate id {0}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub id: String,
    pub position: [f64; 3],
}

impl TargetPoint {
    pub fn position(&self) -> Vec3 {
        self.position.into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub target_points: Vec<TargetPoint>,
    pub cameras: Vec<Camera>,
    pub seed: u64,
}

impl SyntheticScene {
    /// Indices of the cameras that see `point`.
    pub fn visible_cameras(&self, point: &Vec3) -> Vec<usize> {
        self.cameras
            .iter()
            .enumerate()
            .filter(|(_, c)| c.sees(point))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the isotropic Gaussian pick error in pixels.
    pub pixel_sigma: f64,
}

impl NoiseModel {
    pub fn new(pixel_sigma: f64) -> Result<Self, SimError> {
        if !(pixel_sigma >= 0.0) || !pixel_sigma.is_finite() {
            return Err(SimError::InvalidArgument(format!(
                "pixel sigma must be finite and non-negative, got {pixel_sigma}"
            )));
        }
        Ok(Self { pixel_sigma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub id: String,
    pub error: f64,
}

/// RMSE, mean error and standard deviation of per-point 3D error norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    pub rmse: f64,
    pub mean_error: f64,
    /// Sample standard deviation (n - 1 denominator); zero when n = 1.
    pub std: f64,
    pub std_population: f64,
    /// False when n = 1 and the sample standard deviation is undefined.
    pub std_defined: bool,
    /// Sorted by id.
    pub per_point_errors: Vec<PointError>,
}

impl AccuracyReport {
    /// Statistics of the given error norms. Errors are sorted by id before
    /// summation so the result does not depend on input order.
    pub fn from_errors(mut errors: Vec<PointError>) -> Result<Self, EvalError> {
        if errors.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        errors.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = errors.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(EvalError::DuplicateId(w[0].id.clone()));
        }
        let n = errors.len();
        let nf = n as f64;
        let mean = errors.iter().map(|e| e.error).sum::<f64>() / nf;
        let mean_sq = errors.iter().map(|e| e.error * e.error).sum::<f64>() / nf;
        let ss = errors.iter().map(|e| (e.error - mean).powi(2)).sum::<f64>();
        let std_population = (ss / nf).sqrt();
        let (std, std_defined) = if n > 1 {
            ((ss / (nf - 1.0)).sqrt(), true)
        } else {
            (0.0, false)
        };
        Ok(Self {
            n,
            rmse: mean_sq.sqrt(),
            mean_error: mean,
            std,
            std_population,
            std_defined,
            per_point_errors: errors,
        })
    }

    /// `|rmse² - (mean² + std_pop²)|`
    pub fn identity_gap(&self) -> f64 {
        (self.rmse.powi(2) - (self.mean_error.powi(2) + self.std_population.powi(2))).abs()
    }
}

/// Compares measured coordinates against ground truth by id.
pub fn evaluate(measured: &[(String, Vec3)], truth: &[(String, Vec3)]) -> Result<AccuracyReport, EvalError> {
    if measured.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let lookup: std::collections::HashMap<&str, &Vec3> =
        truth.iter().map(|(id, p)| (id.as_str(), p)).collect();
    let mut unmatched = Vec::new();
    let mut errors = Vec::with_capacity(measured.len());
    for (id, p) in measured {
        match lookup.get(id.as_str()) {
            Some(t) => errors.push(PointError {
                id: id.clone(),
                error: (p - *t).norm(),
            }),
            None => unmatched.push(id.clone()),
        }
    }
    if !unmatched.is_empty() {
        return Err(EvalError::UnmatchedId(unmatched));
    }
    AccuracyReport::from_errors(errors)
}

/// Image geometry of every ring camera.
pub fn ring_intrinsics() -> Intrinsics {
    Intrinsics::new(1000.0, 1000.0, 512.0, 384.0, 1024, 768).expect("valid constant intrinsics")
}

/// Height of the ring above the target, as a fraction of the radius.
const RING_HEIGHT_RATIO: f64 = 0.8;
/// Half-width of the box around the main target holding the extra targets,
/// as a fraction of the radius.
const SATELLITE_SPREAD: f64 = 0.1;
const SATELLITE_COUNT: usize = 4;

/// Cameras evenly spaced on a horizontal circle above `target`, all looking
/// at it. The scene holds `target` as `P1` plus four further targets at
/// seeded offsets around it (`P2`..`P5`); the seed also sets the azimuth of
/// the first camera.
pub fn make_ring_scene(radius: f64, count: usize, target: Vec3, seed: u64) -> Result<SyntheticScene, SimError> {
    if count < 2 {
        return Err(SimError::InvalidArgument(format!("need at least 2 cameras, got {count}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(SimError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = std::f64::consts::TAU / count as f64;
    let phase = Uniform::new(0.0, step).expect("valid range").sample(&mut rng);
    let height = RING_HEIGHT_RATIO * radius;
    let intrinsics = ring_intrinsics();

    let cameras = (0..count)
        .map(|k| {
            let angle = phase + step * k as f64;
            let center = target + Vec3::new(radius * angle.cos(), radius * angle.sin(), height);
            let pose = Pose::look_at(center, target, Vec3::z()).expect("ring camera never looks straight down");
            Camera::new(pose, intrinsics)
        })
        .collect();

    let offset = Uniform::new_inclusive(-SATELLITE_SPREAD * radius, SATELLITE_SPREAD * radius).expect("valid range");
    let mut target_points = vec![TargetPoint {
        id: "P1".into(),
        position: target.into(),
    }];
    for i in 0..SATELLITE_COUNT {
        let p = target + Vec3::new(offset.sample(&mut rng), offset.sample(&mut rng), offset.sample(&mut rng));
        target_points.push(TargetPoint {
            id: format!("P{}", i + 2),
            position: p.into(),
        });
    }

    Ok(SyntheticScene {
        target_points,
        cameras,
        seed,
    })
}

/// Ring radius of the canonical scene in meters.
pub const CANONICAL_RADIUS: f64 = 10.0;

/// The ring scene used by the command line and the acceptance checks:
/// radius 10 m around the origin.
pub fn canonical_ring_scene(cameras: usize, seed: u64) -> Result<SyntheticScene, SimError> {
    make_ring_scene(CANONICAL_RADIUS, cameras, Vec3::zeros(), seed)
}

/// Which cameras measure which target, fixed for a whole campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignPlan {
    pub rays_per_point: usize,
    /// Camera indices per target, parallel to `scene.target_points`.
    pub selections: Vec<Vec<usize>>,
}

impl CampaignPlan {
    /// Picks `rays_per_point` cameras per target, spread evenly over the
    /// cameras that see it.
    pub fn new(scene: &SyntheticScene, rays_per_point: usize) -> Result<Self, SimError> {
        if rays_per_point < 2 {
            return Err(SimError::InvalidArgument(format!(
                "rays per point must be at least 2, got {rays_per_point}"
            )));
        }
        let selections = scene
            .target_points
            .iter()
            .map(|t| {
                let visible = scene.visible_cameras(&t.position());
                if visible.len() < rays_per_point {
                    return Err(SimError::InsufficientVisibility {
                        id: t.id.clone(),
                        visible: visible.len(),
                        required: rays_per_point,
                    });
                }
                Ok((0..rays_per_point)
                    .map(|i| visible[i * visible.len() / rays_per_point])
                    .collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            rays_per_point,
            selections,
        })
    }
}

/// One noisy measurement of one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    pub id: String,
    pub truth: Vec3,
    pub result: IntersectionResult,
}

impl TrialEstimate {
    pub fn error(&self) -> f64 {
        (self.result.point - self.truth).norm()
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// The noisy rays of trial number `trial`, one list per target.
pub fn noisy_rays(
    scene: &SyntheticScene,
    plan: &CampaignPlan,
    noise: NoiseModel,
    trial: usize,
) -> Result<Vec<Vec<Ray>>, SimError> {
    let mut rng = trial_rng(scene.seed, trial);
    let mut out = Vec::with_capacity(scene.target_points.len());
    for (target, cams) in scene.target_points.iter().zip(&plan.selections) {
        let truth = target.position();
        let mut rays = Vec::with_capacity(cams.len());
        for &ci in cams {
            let camera = &scene.cameras[ci];
            let (mut u, mut v) = camera
                .project(&truth)
                .pixel()
                .expect("selected cameras see their target");
            if noise.pixel_sigma > 0.0 {
                let du: f64 = StandardNormal.sample(&mut rng);
                let dv: f64 = StandardNormal.sample(&mut rng);
                u += noise.pixel_sigma * du;
                v += noise.pixel_sigma * dv;
            }
            let ray = ray_through(&camera.pose, &camera.intrinsics, u, v).map_err(|source| SimError::Geometry {
                trial,
                id: target.id.clone(),
                source,
            })?;
            rays.push(ray);
        }
        out.push(rays);
    }
    Ok(out)
}

/// Measures every target once for trial number `trial`.
pub fn run_trial(
    scene: &SyntheticScene,
    plan: &CampaignPlan,
    noise: NoiseModel,
    mode: SystemMode,
    trial: usize,
) -> Result<Vec<TrialEstimate>, SimError> {
    let rays = noisy_rays(scene, plan, noise, trial)?;
    scene
        .target_points
        .iter()
        .zip(rays)
        .map(|(target, rays)| {
            let result = intersect_rays(&rays, mode).map_err(|source| SimError::Geometry {
                trial,
                id: target.id.clone(),
                source,
            })?;
            Ok(TrialEstimate {
                id: target.id.clone(),
                truth: target.position(),
                result,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub mode: SystemMode,
    pub rays_per_point: usize,
    pub trials: usize,
    pub pixel_sigma: f64,
    pub seed: u64,
    /// All trials and points together; ids are `t<trial>/<point id>`.
    pub pooled: AccuracyReport,
    pub per_trial: Vec<AccuracyReport>,
}

fn check_campaign(trials: usize) -> Result<(), SimError> {
    if trials < 1 {
        return Err(SimError::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

fn summarize(
    scene: &SyntheticScene,
    noise: NoiseModel,
    rays_per_point: usize,
    mode: SystemMode,
    estimates: Vec<Vec<TrialEstimate>>,
) -> CampaignReport {
    let trials = estimates.len();
    let width = trials.saturating_sub(1).to_string().len();
    let mut pooled = Vec::new();
    let mut per_trial = Vec::with_capacity(trials);
    for (t, trial) in estimates.iter().enumerate() {
        let errors: Vec<PointError> = trial
            .iter()
            .map(|e| PointError {
                id: e.id.clone(),
                error: e.error(),
            })
            .collect();
        pooled.extend(errors.iter().map(|e| PointError {
            id: format!("t{t:0width$}/{}", e.id),
            error: e.error,
        }));
        per_trial.push(AccuracyReport::from_errors(errors).expect("scene has unique, non-empty targets"));
    }
    CampaignReport {
        mode,
        rays_per_point,
        trials,
        pixel_sigma: noise.pixel_sigma,
        seed: scene.seed,
        pooled: AccuracyReport::from_errors(pooled).expect("non-empty"),
        per_trial,
    }
}

/// Runs all trials on the current thread.
pub fn simulate_campaign_sequential(
    scene: &SyntheticScene,
    noise: NoiseModel,
    rays_per_point: usize,
    trials: usize,
    mode: SystemMode,
) -> Result<CampaignReport, SimError> {
    check_campaign(trials)?;
    let plan = CampaignPlan::new(scene, rays_per_point)?;
    let estimates = (0..trials)
        .map(|t| run_trial(scene, &plan, noise, mode, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(scene, noise, rays_per_point, mode, estimates))
}

/// Runs all trials on the rayon pool. Identical output to
/// [`simulate_campaign_sequential`].
#[cfg(feature = "parallel")]
pub fn simulate_campaign_parallel(
    scene: &SyntheticScene,
    noise: NoiseModel,
    rays_per_point: usize,
    trials: usize,
    mode: SystemMode,
) -> Result<CampaignReport, SimError> {
    use rayon::prelude::*;

    check_campaign(trials)?;
    let plan = CampaignPlan::new(scene, rays_per_point)?;
    let estimates = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(scene, &plan, noise, mode, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(scene, noise, rays_per_point, mode, estimates))
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn simulate_campaign(
    scene: &SyntheticScene,
    noise: NoiseModel,
    rays_per_point: usize,
    trials: usize,
    mode: SystemMode,
) -> Result<CampaignReport, SimError> {
    #[cfg(feature = "parallel")]
    {
        simulate_campaign_parallel(scene, noise, rays_per_point, trials, mode)
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_campaign_sequential(scene, noise, rays_per_point, trials, mode)
    }
}

/// Raw per-trial estimates for one campaign, e.g. to compare the scatter of
/// the estimates with their predicted covariance.
pub fn collect_estimates(
    scene: &SyntheticScene,
    noise: NoiseModel,
    rays_per_point: usize,
    trials: usize,
    mode: SystemMode,
) -> Result<Vec<Vec<TrialEstimate>>, SimError> {
    check_campaign(trials)?;
    let plan = CampaignPlan::new(scene, rays_per_point)?;
    let run = |t| run_trial(scene, &plan, noise, mode, t);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(run).collect()
    }
}
