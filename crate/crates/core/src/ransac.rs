//! Single global plane by random sample consensus, as a comparison baseline.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::pipeline::{clock, SegmentationResult, StageTiming};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    pub dist_thresh: f64,
    pub max_iters: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            dist_thresh: 0.3,
            max_iters: 500,
        }
    }
}

/// A plane `normal·p + d = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub d: f64,
}

impl Plane {
    /// Plane through three points, `None` when they are (nearly) collinear.
    pub fn through(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> Option<Plane> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if !(len > 1e-12) {
            return None;
        }
        let normal = n / len;
        Some(Plane {
            normal,
            d: -normal.dot(&a),
        })
    }

    #[inline]
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.d
    }
}

/// Best plane found and its inlier count.
pub fn fit_ransac_plane(
    points: &[Vector3<f64>],
    dist_thresh: f64,
    max_iters: usize,
    rng_seed: u64,
) -> Option<(Plane, usize)> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<(Plane, usize)> = None;
    for _ in 0..max_iters {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = Plane::through(points[i], points[j], points[k]) else {
            continue;
        };
        let count = points
            .iter()
            .filter(|p| plane.distance(p).abs() <= dist_thresh)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((plane, count));
        }
    }
    best
}

/// Inliers of the consensus plane are ground; everything else is not.
pub fn segment_ransac_baseline(
    cloud: &PointCloud,
    dist_thresh: f64,
    max_iters: usize,
    rng_seed: u64,
) -> SegmentationResult {
    let start = clock::now();
    let pts: Vec<Vector3<f64>> = cloud
        .points
        .iter()
        .map(|p| Vector3::from(p.xyz()))
        .collect();
    let mask: Vec<bool> = match fit_ransac_plane(&pts, dist_thresh, max_iters, rng_seed) {
        Some((plane, _)) => pts
            .iter()
            .map(|p| plane.distance(p).abs() <= dist_thresh)
            .collect(),
        None => vec![false; pts.len()],
    };
    let t = clock::micros(start, clock::now());
    let timing = StageTiming {
        fitting_us: t,
        total_us: t,
        ..Default::default()
    };
    SegmentationResult::from_mask(&mask, Vec::new(), timing)
}
