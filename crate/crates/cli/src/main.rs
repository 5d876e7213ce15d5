//! `raymeter`: batch intersection, simulation, evaluation, synthetic
//! projects and the measurement server.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 degenerate geometry.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use raymeter_core::SystemMode;

#[derive(Debug, Parser)]
#[command(name = "raymeter", version, about = "Multi-ray point measurement from posed images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Least-squares intersection of the rays in a rays file.
    Intersect {
        #[arg(long)]
        rays: PathBuf,
        /// Overrides the mode stored in the file.
        #[arg(long)]
        mode: Option<SystemMode>,
        /// Print the full result document as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo accuracy campaign on the synthetic ring scene.
    Simulate {
        #[arg(long, default_value_t = 8)]
        cameras: usize,
        #[arg(long, default_value_t = 5)]
        rays_per_point: usize,
        /// Standard deviation of the pick noise in pixels.
        #[arg(long, default_value_t = 1.0)]
        noise_px: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "projection")]
        mode: SystemMode,
        /// Where to write the report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of measured coordinates against ground truth (CSV, id,x,y,z).
    Evaluate {
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API (and the UI, if given) until interrupted.
    Serve {
        #[arg(long, env = "RAYMETER_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "RAYMETER_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Write a synthetic project with rendered marker images.
    MakeScene {
        #[arg(long, value_enum, default_value = "ring")]
        preset: Preset,
        #[arg(long, default_value_t = 5)]
        cameras: usize,
        /// Data directory; the project goes to `<out>/projects/<project-id>`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "ring")]
        project_id: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Preset {
    Ring,
}

/// A failed command: what to print and which code to exit with.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::input(format!("{e:#}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() && !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Intersect { rays, mode, json } => commands::intersect(&rays, mode, json),
        Command::Simulate {
            cameras,
            rays_per_point,
            noise_px,
            trials,
            seed,
            mode,
            out,
        } => commands::simulate(cameras, rays_per_point, noise_px, trials, seed, mode, &out),
        Command::Evaluate { measured, truth, json } => commands::evaluate(&measured, &truth, json),
        Command::Serve {
            port,
            host,
            data_dir,
            ui_dir,
        } => commands::serve(&host, port, &data_dir, ui_dir),
        Command::MakeScene {
            preset: Preset::Ring,
            cameras,
            out,
            project_id,
            seed,
        } => commands::make_scene(cameras, &out, project_id, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
