//! Regenerates the shipped fixtures: `cargo test -p raymeter --test fixtures_gen -- --ignored`.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::fs;
use std::path::Path;

use raymeter_core::formats::{write_points_csv, RaysFile};
use raymeter_core::sim::{canonical_ring_scene, noisy_rays, CampaignPlan, NoiseModel};
use raymeter_core::{SystemMode, Vec3};
use serde_json::json;

fn dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
#[ignore]
fn regenerate_fixtures() {
    let out = dir();
    fs::create_dir_all(&out).unwrap();

    // five noisy rays at P1 of the canonical scene, 1 px noise
    let scene = canonical_ring_scene(8, 2024).unwrap();
    let plan = CampaignPlan::new(&scene, 5).unwrap();
    let rays = noisy_rays(&scene, &plan, NoiseModel::new(1.0).unwrap(), 0).unwrap().remove(0);
    let file = RaysFile {
        mode: SystemMode::ProjectionThreeRow,
        rays,
    };
    fs::write(out.join("five_ray_noisy.json"), serde_json::to_string_pretty(&file).unwrap() + "\n").unwrap();

    let lines: Vec<([f64; 3], [f64; 3])> = file.rays.iter().map(|r| (r.origin().into(), r.direction().into())).collect();
    let mut golden = serde_json::Map::new();
    for (name, build) in [
        ("projection", oracle::projection_rows as fn([f64; 3], [f64; 3]) -> Vec<([f64; 3], f64)>),
        ("paper", oracle::paper_rows),
    ] {
        let rows: Vec<_> = lines.iter().flat_map(|&(o, d)| build(o, d)).collect();
        let x = oracle::normal_equation_solve(&rows);
        let redundancy = 2 * lines.len() - 3;
        let sigma0_sq = oracle::residual_ss(&rows, x) / redundancy as f64;
        let inv = oracle::normal_inverse(&rows);
        let cov: Vec<Vec<f64>> = inv.iter().map(|r| r.iter().map(|v| v * sigma0_sq).collect()).collect();
        golden.insert(
            name.into(),
            json!({"point": x, "sigma0": sigma0_sq.sqrt(), "redundancy": redundancy, "covariance": cov}),
        );
    }
    let brute = oracle::grid_minimize(&lines, [0.0, 0.0, 0.0], 1.0);
    let projection_point: Vec<f64> = serde_json::from_value(golden["projection"]["point"].clone()).unwrap();
    for i in 0..3 {
        assert!((brute[i] - projection_point[i]).abs() < 1e-6);
    }
    fs::write(
        out.join("five_ray_noisy.golden.json"),
        serde_json::to_string_pretty(&golden).unwrap() + "\n",
    )
    .unwrap();

    // reference accuracy row: ten errors of 0.019 m and ten of 0.025 m give
    // ME 0.022 and population Std 0.003
    let truth: Vec<(String, Vec3)> = (0..20)
        .map(|i| (format!("VP{:02}", i + 1), Vec3::new(10.0 + i as f64, 20.0 - i as f64, 1.5)))
        .collect();
    let measured: Vec<(String, Vec3)> = truth
        .iter()
        .enumerate()
        .map(|(i, (id, p))| {
            let e = if i % 2 == 0 { 0.019 } else { 0.025 };
            (id.clone(), p + Vec3::new(0.0, 0.0, e))
        })
        .collect();
    write_points_csv(fs::File::create(out.join("reference_truth.csv")).unwrap(), &truth).unwrap();
    write_points_csv(fs::File::create(out.join("reference_measured.csv")).unwrap(), &measured).unwrap();
}
