use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use raymeter_core::formats::{read_points_csv, RaysFile};
use raymeter_core::scene::{write_ring_project, RingProjectOptions};
use raymeter_core::sim::{canonical_ring_scene, evaluate as evaluate_points, simulate_campaign, CampaignReport, NoiseModel};
use raymeter_core::{intersect_rays, GeometryError, SystemMode, Vec3};
use raymeter_server::{AppState, ServerConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub fn intersect(path: &Path, mode: Option<SystemMode>, json: bool) -> Result<(), Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = RaysFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mode = mode.unwrap_or(file.mode);
    let result = match intersect_rays(&file.rays, mode) {
        Ok(r) => r,
        Err(e @ GeometryError::DegenerateGeometry { .. }) => {
            return Err(Failure {
                code: 2,
                message: e.to_string(),
            })
        }
        Err(e) => return Err(Failure::input(e)),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
        return Ok(());
    }
    let p = result.point;
    let var = result.variances();
    println!("mode        {mode}");
    println!("rays        {}", result.ray_count);
    println!("point       {:.6} {:.6} {:.6}", p.x, p.y, p.z);
    println!("sigma0      {:.6}", result.sigma0);
    println!("redundancy  {}", result.redundancy);
    println!("variances   {:.6e} {:.6e} {:.6e}", var.x, var.y, var.z);
    match result.ellipsoid(1.0) {
        Ok(e) => println!(
            "semi-axes   {:.6} {:.6} {:.6}",
            e.semi_axes[0], e.semi_axes[1], e.semi_axes[2]
        ),
        Err(e) => println!("semi-axes   unavailable ({e})"),
    }
    Ok(())
}

/// Document written by `simulate --out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub cameras: usize,
    #[serde(flatten)]
    pub campaign: CampaignReport,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    cameras: usize,
    rays_per_point: usize,
    noise_px: f64,
    trials: usize,
    seed: u64,
    mode: SystemMode,
    out: &Path,
) -> Result<(), Failure> {
    if rays_per_point < 2 {
        return Err(Failure::input("--rays-per-point must be at least 2"));
    }
    if rays_per_point > cameras {
        return Err(Failure::input(format!(
            "--rays-per-point {rays_per_point} exceeds --cameras {cameras}"
        )));
    }
    let scene = canonical_ring_scene(cameras, seed).map_err(Failure::input)?;
    let noise = NoiseModel::new(noise_px).map_err(Failure::input)?;
    let campaign = simulate_campaign(&scene, noise, rays_per_point, trials, mode).map_err(Failure::input)?;
    let report = SimulationReport { cameras, campaign };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;

    let pooled = &report.campaign.pooled;
    println!(
        "ring scene: {cameras} cameras, {rays_per_point} rays per point, {noise_px} px noise, {trials} trials, seed {seed}, {mode} mode"
    );
    println!("{:<12}{:>8}{:>8}{:>8}{:>8}", "", "N", "RMSE", "ME", "Std");
    println!(
        "{:<12}{:>8}{:>8.3}{:>8.3}{:>8.3}",
        "simulated", pooled.n, pooled.rmse, pooled.mean_error, pooled.std_population
    );
    println!("(meters; Std is the population standard deviation)");
    Ok(())
}

fn read_points(path: &Path) -> anyhow::Result<Vec<(String, Vec3)>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_points_csv(file).with_context(|| format!("reading {}", path.display()))
}

pub fn evaluate(measured: &Path, truth: &Path, json: bool) -> Result<(), Failure> {
    let report = evaluate_points(&read_points(measured)?, &read_points(truth)?).map_err(Failure::input)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    println!("N                 {}", report.n);
    println!("RMSE              {:.3}", report.rmse);
    println!("ME                {:.3}", report.mean_error);
    if report.std_defined {
        println!("Std (sample)      {:.3}", report.std);
    } else {
        println!("Std (sample)      undefined");
    }
    println!("Std (population)  {:.3}", report.std_population);
    Ok(())
}

pub fn make_scene(cameras: usize, out: &Path, project_id: String, seed: u64) -> Result<(), Failure> {
    let opts = RingProjectOptions {
        project_id,
        cameras,
        seed,
        ..Default::default()
    };
    let written = write_ring_project(out, &opts).map_err(Failure::input)?;
    println!(
        "wrote project {} with {} images and {} target points to {}",
        written.project.id,
        written.project.images.len(),
        written.truth.len(),
        written.project_dir.display()
    );
    Ok(())
}

pub fn serve(host: &str, port: u16, data_dir: &Path, ui_dir: Option<PathBuf>) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    if !data_dir.is_dir() {
        return Err(Failure::input(format!("data directory {} does not exist", data_dir.display())));
    }
    if let Some(ui) = &ui_dir {
        if !ui.join("index.html").is_file() {
            return Err(Failure::input(format!("{} has no index.html", ui.display())));
        }
    }
    let state = Arc::new(AppState::open(data_dir).map_err(Failure::input)?);
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::input(format!("cannot listen on {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(Failure::input)?;
        println!("listening on http://{addr}");
        raymeter_server::run(listener, state, ServerConfig { ui_dir }, shutdown_signal())
            .await
            .map_err(Failure::input)
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
