#![allow(dead_code)]

use std::f64::consts::PI;

use patchwork::{BinCoord, Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force membership: scan every (zone, ring, sector) interval and
/// return all that contain the point. `bounds` are the zone radii. A value
/// that rounds onto the outer edge of a zone's last ring or sector counts as
/// inside it.
pub fn brute_force_bins(
    bounds: &[f64],
    rings: &[usize],
    sectors: &[usize],
    p: &Point,
) -> Vec<BinCoord> {
    let (x, y) = (p.x as f64, p.y as f64);
    let rho = (x * x + y * y).sqrt();
    let mut theta = y.atan2(x);
    if theta >= PI {
        theta = -PI;
    }
    let mut hits = Vec::new();
    for m in 0..rings.len() {
        let (lo, hi) = (bounds[m], bounds[m + 1]);
        if !(lo <= rho && rho < hi) {
            continue;
        }
        let dl = hi - lo;
        for i in 1..=rings[m] {
            let r_lo = ((i - 1) as f64 * dl) / rings[m] as f64;
            let r_hi = (i as f64 * dl) / rings[m] as f64;
            let dr = rho - lo;
            if !(r_lo <= dr && (dr < r_hi || i == rings[m])) {
                continue;
            }
            for j in 1..=sectors[m] {
                let t_lo = ((j - 1) as f64 * 2.0 * PI) / sectors[m] as f64 - PI;
                let t_hi = (j as f64 * 2.0 * PI) / sectors[m] as f64 - PI;
                if t_lo <= theta && (theta < t_hi || j == sectors[m]) {
                    hits.push(BinCoord {
                        zone: m,
                        ring: i - 1,
                        sector: j - 1,
                    });
                }
            }
        }
    }
    hits
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors as columns).
pub fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let diag = a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2);
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
            let t = if tau == 0.0 { 1.0 } else { t };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // a <- Jᵀ a J
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Normal of the least-squares plane: eigenvector of the smallest
/// covariance eigenvalue, from the Jacobi solver.
pub fn oracle_normal(pts: &[[f64; 3]]) -> [f64; 3] {
    let n = pts.len() as f64;
    let mut c = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in pts {
        for r in 0..3 {
            for s in 0..3 {
                cov[r][s] += (p[r] - c[r]) * (p[s] - c[s]) / n;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(cov);
    let k = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    [vecs[0][k], vecs[1][k], vecs[2][k]]
}

/// Random cloud with points scattered over `[-r, r]²` and a spread of heights.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, r: f32) -> PointCloud {
    let pts = (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(-r..r),
                rng.random_range(-r..r),
                rng.random_range(-2.5f32..1.0),
            )
        })
        .collect();
    PointCloud::new(pts)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
