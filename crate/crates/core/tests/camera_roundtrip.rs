use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raymeter_core::{project_point, ray_from_pixel, Intrinsics, PixelPick, Pose, Projection, Vec3};

/// Pixel of `p` computed by hand from the row-major rotation.
fn analytic_pixel(rot_row_major: [f64; 9], center: [f64; 3], k: [f64; 4], p: [f64; 3]) -> (f64, f64) {
    let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    // camera = Rᵀ d, i.e. column i of R dotted with d
    let cam: Vec<f64> = (0..3)
        .map(|i| rot_row_major[i] * d[0] + rot_row_major[3 + i] * d[1] + rot_row_major[6 + i] * d[2])
        .collect();
    (k[0] * cam[0] / cam[2] + k[2], k[1] * cam[1] / cam[2] + k[3])
}

#[test]
fn analytic_projection_back_projects_through_point() {
    let pose = Pose::look_at(Vec3::new(12.0, -3.0, 8.0), Vec3::new(0.5, 0.5, 0.0), Vec3::z()).unwrap();
    let k = Intrinsics::new(1200.0, 1150.0, 640.5, 359.5, 1280, 720).unwrap();
    let json = serde_json::to_value(pose).unwrap();
    let rot: Vec<f64> = serde_json::from_value(json["rotation_row_major"].clone()).unwrap();
    let rot: [f64; 9] = rot.try_into().unwrap();
    let p = Vec3::new(1.0, 0.2, 0.7);
    let (u, v) = analytic_pixel(rot, pose.center().into(), [1200.0, 1150.0, 640.5, 359.5], p.into());
    let (pu, pv) = project_point(&pose, &k, &p).pixel().unwrap();
    assert!((u - pu).abs() < 1e-9 && (v - pv).abs() < 1e-9);
    let ray = ray_from_pixel(&pose, &k, &PixelPick::new("i", u, v)).unwrap();
    assert!(ray.distance_to(&p) < 1e-9);
}

#[test]
fn thousand_random_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut done = 0;
    while done < 1000 {
        let rot = Rotation3::from_euler_angles(
            rng.random_range(-3.1..3.1),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
        );
        let center = Vec3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let pose = Pose::new(center, *rot.matrix()).unwrap();
        let width = rng.random_range(320..4000u32);
        let height = rng.random_range(240..3000u32);
        let f = rng.random_range(200.0..5000.0);
        let k = Intrinsics::new(f, f * rng.random_range(0.9..1.1), width as f64 / 2.0 + 3.3, height as f64 / 2.0 - 1.7, width, height)
            .unwrap();

        // point inside the frustum at a random depth
        let u = rng.random_range(0.0..width as f64);
        let v = rng.random_range(0.0..height as f64);
        let depth = rng.random_range(0.5..200.0);
        let cam = Vec3::new((u - k.cx()) / k.fx() * depth, (v - k.cy()) / k.fy() * depth, depth);
        let point = pose.rotation() * cam + center;

        let Projection::Pixel { u: pu, v: pv } = project_point(&pose, &k, &point) else {
            panic!("point in front of the camera projected as behind");
        };
        let ray = ray_from_pixel(&pose, &k, &PixelPick::new("img", pu.clamp(0.0, width as f64), pv.clamp(0.0, height as f64)))
            .unwrap();
        assert_eq!(ray.origin(), center);
        assert!((ray.direction().norm() - 1.0).abs() < 1e-12);
        assert!(ray.distance_to(&point) < 1e-9, "distance {:e}", ray.distance_to(&point));
        done += 1;
    }
}
