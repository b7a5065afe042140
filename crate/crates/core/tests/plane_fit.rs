mod common;

use common::{oracle_normal, rng};
use nalgebra::{Rotation3, Vector3};
use patchwork::plane_fit::{
    extract_ground_bin, fit_plane_pca, fit_plane_subset, select_initial_seeds,
};
use patchwork::RgpfParams;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_set(rng: &mut impl Rng) -> Vec<Vector3<f64>> {
    let n = rng.random_range(3..=200);
    let sx = rng.random_range(0.5..5.0);
    let sy = rng.random_range(0.5..5.0);
    let sz = rng.random_range(0.01..2.0);
    let rot = Rotation3::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    );
    let t = Vector3::new(
        rng.random_range(-50.0..50.0),
        rng.random_range(-50.0..50.0),
        rng.random_range(-3.0..3.0),
    );
    (0..n)
        .map(|_| {
            let p = Vector3::new(
                rng.random_range(-sx..sx),
                rng.random_range(-sy..sy),
                rng.random_range(-sz..sz),
            );
            rot * p + t
        })
        .collect()
}

#[test]
fn normal_matches_jacobi_oracle() {
    let mut rng = rng(10);
    let mut checked = 0;
    while checked < 1000 {
        let pts = random_set(&mut rng);
        let Ok(fit) = fit_plane_pca(&pts) else {
            continue;
        };
        // Skip sets whose two smallest eigenvalues nearly coincide; the
        // normal is then ill-conditioned for any solver.
        if fit.eigenvalues[1] - fit.eigenvalues[2] < 1e-6 * fit.eigenvalues[0] {
            continue;
        }
        let raw: Vec<[f64; 3]> = pts.iter().map(|p| [p.x, p.y, p.z]).collect();
        let o = Vector3::from(oracle_normal(&raw));
        let cos = fit.normal.dot(&o) / o.norm();
        assert!(cos.abs() > 1.0 - 1e-8, "cos = {cos}");
        assert!(
            fit.eigenvalues[0] >= fit.eigenvalues[1] && fit.eigenvalues[1] >= fit.eigenvalues[2]
        );
        assert!(fit.eigenvalues[2] >= -1e-12);
        assert!((fit.normal.norm() - 1.0).abs() < 1e-9);
        assert!(fit.normal.z >= 0.0);
        assert!((fit.d + fit.normal.dot(&fit.centroid)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn tilted_plane_matches_closed_form() {
    let mut rng = rng(11);
    let pts: Vec<_> = (0..100)
        .map(|_| {
            let (x, y) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            Vector3::new(x, y, 0.1 * x + 2.0)
        })
        .collect();
    let fit = fit_plane_pca(&pts).unwrap();
    let want = Vector3::new(-0.1, 0.0, 1.0).normalize();
    assert!((fit.normal - want).norm() < 1e-9);
    assert!((fit.normal.dot(&Vector3::new(0.0, 0.0, 2.0)) + fit.d).abs() < 1e-9);
}

#[test]
fn wall_bin_keeps_ground_and_rejects_wall() {
    let mut rng = rng(12);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut pts = Vec::new();
    for _ in 0..40 {
        pts.push(Vector3::new(
            rng.random_range(5.0..6.0),
            rng.random_range(0.0..1.0),
            -1.7 + noise.sample(&mut rng),
        ));
    }
    for _ in 0..20 {
        pts.push(Vector3::new(
            5.5,
            rng.random_range(0.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
    }
    let params = RgpfParams::default();
    let out = extract_ground_bin(&pts, 0, &params).unwrap();
    let ground_kept = out.ground.iter().filter(|&&i| i < 40).count();
    assert!(ground_kept >= 38, "kept {ground_kept}");
    let envelope = -1.7 + params.m_d;
    for &i in &out.ground {
        if i >= 40 {
            assert!(pts[i].z <= envelope, "wall point {i} at z {}", pts[i].z);
        }
    }
    // Per-point plane distance oracle on the final estimate.
    for (i, p) in pts.iter().enumerate() {
        let d = out.plane.normal.dot(p) + out.plane.d;
        if i >= 40 && p.z > envelope {
            assert!(d > 0.0);
        }
    }
}

#[test]
fn each_round_keeps_exactly_the_points_under_the_margin() {
    let mut rng = rng(13);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let params = RgpfParams::default();
    for _ in 0..200 {
        let n = rng.random_range(10..120);
        let slope = rng.random_range(-0.2..0.2);
        let pts: Vec<_> = (0..n)
            .map(|_| {
                let (x, y) = (rng.random_range(3.0..8.0), rng.random_range(-2.0..2.0));
                let z = if rng.random_bool(0.2) {
                    rng.random_range(-1.5..1.0)
                } else {
                    -1.7 + slope * x + noise.sample(&mut rng)
                };
                Vector3::new(x, y, z)
            })
            .collect();
        let Ok(out) = extract_ground_bin(&pts, 0, &params) else {
            continue;
        };
        let mut est = select_initial_seeds(&pts, 0, &params).unwrap();
        for _ in 0..params.num_iter {
            let plane = fit_plane_subset(&pts, &est).unwrap();
            let next: Vec<usize> = (0..n)
                .filter(|&k| plane.d - (-plane.normal.dot(&pts[k])) < params.m_d)
                .collect();
            est = next;
        }
        assert_eq!(out.ground, est);
        assert!(out.ground.iter().all(|&i| i < n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translation_equivariance(seed in any::<u64>(), tx in -100.0f64..100.0, ty in -100.0f64..100.0, tz in -10.0f64..10.0) {
        let pts = random_set(&mut rng(seed));
        let t = Vector3::new(tx, ty, tz);
        let moved: Vec<_> = pts.iter().map(|p| p + t).collect();
        let (Ok(a), Ok(b)) = (fit_plane_pca(&pts), fit_plane_pca(&moved)) else { return Ok(()) };
        prop_assume!(a.eigenvalues[1] - a.eigenvalues[2] > 1e-3 * a.eigenvalues[0]);
        prop_assert!((a.normal - b.normal).norm() < 1e-9);
        for k in 0..3 {
            prop_assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-9 * (1.0 + a.eigenvalues[0]));
        }
        prop_assert!((a.centroid + t - b.centroid).norm() < 1e-9);
    }

    #[test]
    fn rotation_about_z_equivariance(seed in any::<u64>(), angle in -3.2f64..3.2) {
        let pts = random_set(&mut rng(seed));
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
        let turned: Vec<_> = pts.iter().map(|p| r * p).collect();
        let (Ok(a), Ok(b)) = (fit_plane_pca(&pts), fit_plane_pca(&turned)) else { return Ok(()) };
        prop_assume!(a.eigenvalues[1] - a.eigenvalues[2] > 1e-3 * a.eigenvalues[0]);
        let rn = r * a.normal;
        prop_assert!((rn - b.normal).norm() < 1e-9 || (rn + b.normal).norm() < 1e-9);
        for k in 0..3 {
            prop_assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-9 * (1.0 + a.eigenvalues[0]));
        }
    }
}
