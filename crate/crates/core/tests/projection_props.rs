//! Property tests for the projection laws: round trips, monotonicity,
//! azimuth preservation and the small-angle/equiangular identities.

use core::f64::consts::{FRAC_PI_2, PI};

use omnisynth_core::projection::{Direction3, FisheyeCameraSpec, PixelCoord, ProjectionModel};
use proptest::prelude::*;

/// Upper end of the θ domain probed per model, kept strictly inside the
/// valid interval.
fn theta_ceiling(model: ProjectionModel) -> f64 {
    match model {
        ProjectionModel::Equidistant | ProjectionModel::Equisolid => PI - 1e-6,
        ProjectionModel::Stereographic => PI - 1e-3,
        ProjectionModel::Orthographic => FRAC_PI_2 - 1e-6,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn theta_round_trips_through_radius(
        t in 1e-9f64..1.0,
        f in 10.0f64..2000.0,
        model_idx in 0usize..4,
    ) {
        let model = ProjectionModel::ALL[model_idx];
        let theta = t * theta_ceiling(model);
        let r = model.radius_from_theta(f, theta).unwrap();
        let back = model.theta_from_radius(f, r).unwrap();
        prop_assert!((back - theta).abs() <= 1e-9, "model {model}: {theta} -> {r} -> {back}");
    }

    #[test]
    fn pixel_ray_round_trip_within_micro_pixel(
        radius_frac in 0.0f64..0.999,
        azimuth in 0.0f64..core::f64::consts::TAU,
        model_idx in 0usize..4,
    ) {
        let model = ProjectionModel::ALL[model_idx];
        let spec = FisheyeCameraSpec::new(model, 200.0, 1024, 1024).unwrap();
        let r = radius_frac * spec.image_circle_radius();
        let pp = spec.principal_point();
        let p = PixelCoord::new(pp.u + r * azimuth.cos(), pp.v + r * azimuth.sin());
        let ray = spec.pixel_to_ray(p).expect("inside image circle");
        let back = spec.ray_to_pixel(ray).expect("inside FOV");
        prop_assert!(back.distance(&p) <= 1e-6, "{model}: {p:?} -> {back:?}");
    }

    #[test]
    fn ray_pixel_round_trip_within_micro_pixel(
        theta_frac in 0.0f64..0.999,
        azimuth in 0.0f64..core::f64::consts::TAU,
        model_idx in 0usize..4,
    ) {
        let model = ProjectionModel::ALL[model_idx];
        let spec = FisheyeCameraSpec::new(model, 200.0, 1024, 1024).unwrap();
        let theta = theta_frac * spec.theta_max();
        let d = Direction3::new(
            theta.sin() * azimuth.cos(),
            theta.sin() * azimuth.sin(),
            theta.cos(),
        )
        .unwrap();
        let p = spec.ray_to_pixel(d).expect("inside FOV");
        let back = spec.pixel_to_ray(p).expect("inside image circle");
        let dot = back.x() * d.x() + back.y() * d.y() + back.z() * d.z();
        prop_assert!(dot >= 1.0 - 1e-12, "direction drifted: dot {dot}");
    }

    #[test]
    fn azimuth_is_preserved_both_ways(
        radius_frac in 1e-3f64..0.999,
        azimuth in -core::f64::consts::PI..core::f64::consts::PI,
    ) {
        let spec =
            FisheyeCameraSpec::new(ProjectionModel::Equidistant, 159.0, 1024, 1024).unwrap();
        let r = radius_frac * spec.image_circle_radius();
        let pp = spec.principal_point();
        let p = PixelCoord::new(pp.u + r * azimuth.cos(), pp.v + r * azimuth.sin());
        let ray = spec.pixel_to_ray(p).unwrap();
        let pixel_azimuth = (p.v - pp.v).atan2(p.u - pp.u);
        prop_assert!((ray.azimuth() - pixel_azimuth).abs() <= 1e-12);

        let back = spec.ray_to_pixel(ray).unwrap();
        let back_azimuth = (back.v - pp.v).atan2(back.u - pp.u);
        prop_assert!((back_azimuth - ray.azimuth()).abs() <= 1e-12);
    }
}

#[test]
fn radius_laws_are_strictly_increasing_on_a_dense_grid() {
    for model in ProjectionModel::ALL {
        let f = 159.0;
        let hi = theta_ceiling(model);
        let mut last = -1.0;
        for i in 0..=10_000 {
            let theta = hi * i as f64 / 10_000.0;
            let r = model.radius_from_theta(f, theta).unwrap();
            assert!(r > last, "{model} not increasing at theta={theta}");
            last = r;
        }
    }
}

#[test]
fn equidistant_circles_map_to_constant_polar_angle() {
    // Concentric pixel circles of radius k·f correspond to polar angle
    // k radians under the equiangular law.
    let f = 159.0;
    let spec = FisheyeCameraSpec::with_theta_max(
        ProjectionModel::Equidistant,
        f,
        2048,
        2048,
        1.5,
    )
    .unwrap();
    let pp = spec.principal_point();
    for k in [0.1, 0.5, 1.0, 1.4] {
        for step in 0..64 {
            let phi = core::f64::consts::TAU * step as f64 / 64.0;
            let p = PixelCoord::new(pp.u + k * f * phi.cos(), pp.v + k * f * phi.sin());
            let ray = spec.pixel_to_ray(p).unwrap();
            assert!(
                (ray.polar_angle() - k).abs() < 1e-9,
                "k={k}, phi={phi}: theta={}",
                ray.polar_angle()
            );
        }
    }
}

#[test]
fn all_models_agree_with_the_equiangular_law_at_small_angles() {
    let f = 500.0;
    for model in ProjectionModel::ALL {
        for i in 1..=100 {
            let theta = 0.01 * i as f64 / 100.0;
            let r = model.radius_from_theta(f, theta).unwrap();
            assert!(
                (r - f * theta).abs() <= 1e-4 * f,
                "{model} deviates at theta={theta}: r={r} vs {}",
                f * theta
            );
        }
    }
}

#[test]
fn ten_thousand_round_trips_run_quickly() {
    let start = std::time::Instant::now();
    for model in ProjectionModel::ALL {
        let f = 159.0;
        let hi = theta_ceiling(model);
        for i in 0..10_000 {
            let theta = hi * (i as f64 + 0.5) / 10_000.0;
            let r = model.radius_from_theta(f, theta).unwrap();
            let back = model.theta_from_radius(f, r).unwrap();
            assert!((back - theta).abs() <= 1e-9);
        }
    }
    assert!(
        start.elapsed().as_secs_f64() < 1.0,
        "round trips took {:?}",
        start.elapsed()
    );
}
