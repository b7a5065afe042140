//! Region-wise ground plane fitting.
//!
//! Each bin starts from its lowest points, fits a plane by PCA and
//! re-selects the points lying below the plane plus a margin. The loop runs
//! a fixed number of rounds.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// λ₂ below this means the points do not span a plane.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    /// Unit normal, the eigenvector of the smallest covariance eigenvalue.
    pub normal: Vector3<f64>,
    /// Offset so that `normal·p + d = 0` on the plane.
    pub d: f64,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: [f64; 3],
    pub centroid: Vector3<f64>,
}

impl PlaneModel {
    /// Signed distance of `p` along the normal.
    #[inline]
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.d
    }

    /// `λ₃ / (λ₁ + λ₂ + λ₃)`.
    pub fn surface_variation(&self) -> f64 {
        let [l1, l2, l3] = self.eigenvalues;
        let sum = l1 + l2 + l3;
        if sum > 0.0 {
            (l3.max(0.0) / sum).min(1.0 / 3.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("plane fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("points are collinear or coincident (lambda2 = {0:e})")]
    Degenerate(f64),
}

/// Why a bin produced no ground estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinSkip {
    /// Fewer than `min_bin_points` in the bin.
    TooFewPoints(usize),
    /// Fewer than `min_bin_points` left after the seed height filter.
    TooFewAfterFilter(usize),
    Fit(FitError),
}

impl From<FitError> for BinSkip {
    fn from(e: FitError) -> Self {
        BinSkip::Fit(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RgpfParams {
    pub n_seed: usize,
    pub z_seed: f64,
    pub m_d: f64,
    pub m_h: f64,
    pub sensor_height: f64,
    pub num_iter: usize,
    pub min_bin_points: usize,
    /// Drop seed candidates below `m_h·h_s − seed_filter_offsets[m]`.
    pub adaptive_seed_filter: bool,
    /// Per-zone relaxation of the seed height filter, meters, non-decreasing.
    pub seed_filter_offsets: Vec<f64>,
}

impl Default for RgpfParams {
    fn default() -> Self {
        RgpfParams {
            n_seed: 20,
            z_seed: 0.5,
            m_d: 0.15,
            m_h: -1.1,
            sensor_height: 1.723,
            num_iter: 3,
            min_bin_points: 10,
            adaptive_seed_filter: true,
            seed_filter_offsets: vec![0.0, 0.3, 0.6, 1.0],
        }
    }
}

impl RgpfParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.n_seed < 1 {
            return fail("rgpf.n_seed must be >= 1".into());
        }
        if !(self.z_seed > 0.0 && self.z_seed.is_finite()) {
            return fail(format!("rgpf.z_seed must be > 0, got {}", self.z_seed));
        }
        if !(self.m_d > 0.0 && self.m_d.is_finite()) {
            return fail(format!("rgpf.m_d must be > 0, got {}", self.m_d));
        }
        if !(self.m_h < -1.0 && self.m_h.is_finite()) {
            return fail(format!("rgpf.m_h must be < -1, got {}", self.m_h));
        }
        if !(self.sensor_height.is_finite() && self.sensor_height > 0.0) {
            return fail(format!(
                "rgpf.sensor_height must be > 0, got {}",
                self.sensor_height
            ));
        }
        if self.num_iter < 1 {
            return fail("rgpf.num_iter must be >= 1".into());
        }
        if self.min_bin_points < 3 {
            return fail("rgpf.min_bin_points must be >= 3".into());
        }
        let offs = &self.seed_filter_offsets;
        if offs.is_empty() || offs.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return fail("rgpf.seed_filter_offsets must be non-empty and >= 0".into());
        }
        if offs.windows(2).any(|w| w[1] < w[0]) {
            return fail("rgpf.seed_filter_offsets must be non-decreasing".into());
        }
        Ok(())
    }

    /// Seed height cut for zone `zone` (zero-based). Zones past the
    /// configured offsets reuse the last one.
    pub fn seed_z_filter(&self, zone: usize) -> f64 {
        let offs = &self.seed_filter_offsets;
        let delta = offs.get(zone).or(offs.last()).copied().unwrap_or(0.0);
        self.m_h * self.sensor_height - delta
    }
}

/// Plane through `points` selected by `subset`.
pub fn fit_plane_subset(points: &[Vector3<f64>], subset: &[usize]) -> Result<PlaneModel, FitError> {
    let n = subset.len();
    if n < 3 {
        return Err(FitError::InsufficientPoints(n));
    }
    let inv = 1.0 / n as f64;
    let centroid = subset
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + points[i])
        * inv;
    let (mut xx, mut xy, mut xz, mut yy, mut yz, mut zz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in subset {
        let q = points[i] - centroid;
        xx += q.x * q.x;
        xy += q.x * q.y;
        xz += q.x * q.z;
        yy += q.y * q.y;
        yz += q.y * q.z;
        zz += q.z * q.z;
    }
    let cov = Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz) * inv;
    plane_from_covariance(cov, centroid)
}

pub fn fit_plane_pca(points: &[Vector3<f64>]) -> Result<PlaneModel, FitError> {
    let all: Vec<usize> = (0..points.len()).collect();
    fit_plane_subset(points, &all)
}

fn plane_from_covariance(
    cov: Matrix3<f64>,
    centroid: Vector3<f64>,
) -> Result<PlaneModel, FitError> {
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|k| eig.eigenvalues[k]);
    if !(eigenvalues[1] >= DEGENERATE_EIGENVALUE) {
        return Err(FitError::Degenerate(eigenvalues[1]));
    }
    let v = eig.eigenvectors.column(order[2]).into_owned();
    let normal = canonical_sign(v.normalize());
    Ok(PlaneModel {
        normal,
        d: -normal.dot(&centroid),
        eigenvalues,
        centroid,
    })
}

/// Flips `n` so that `n_z >= 0`; horizontal normals get a positive first
/// nonzero component.
pub fn canonical_sign(n: Vector3<f64>) -> Vector3<f64> {
    let key = if n.z != 0.0 {
        n.z
    } else if n.x != 0.0 {
        n.x
    } else {
        n.y
    };
    if key < 0.0 {
        -n
    } else {
        n
    }
}

/// Initial seed set of a bin, as indices into `points`.
///
/// Applies the zone's height filter when enabled, averages the heights of
/// the `n_seed` lowest survivors and keeps every survivor below that mean
/// plus `z_seed`. Equal heights are ordered by index.
pub fn select_initial_seeds(
    points: &[Vector3<f64>],
    zone: usize,
    params: &RgpfParams,
) -> Result<Vec<usize>, BinSkip> {
    if points.len() < params.min_bin_points {
        return Err(BinSkip::TooFewPoints(points.len()));
    }
    let mut candidates: Vec<usize> = if params.adaptive_seed_filter {
        let cut = params.seed_z_filter(zone);
        (0..points.len()).filter(|&i| points[i].z >= cut).collect()
    } else {
        (0..points.len()).collect()
    };
    if candidates.len() < params.min_bin_points {
        return Err(BinSkip::TooFewAfterFilter(candidates.len()));
    }
    let k = params.n_seed.min(candidates.len());
    let by_height = |a: &usize, b: &usize| points[*a].z.total_cmp(&points[*b].z).then(a.cmp(b));
    let mut lowest = candidates.clone();
    if k < lowest.len() {
        lowest.select_nth_unstable_by(k - 1, by_height);
    }
    let z_init = lowest[..k].iter().map(|&i| points[i].z).sum::<f64>() / k as f64;
    let limit = z_init + params.z_seed;
    candidates.retain(|&i| points[i].z < limit);
    Ok(candidates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinGround {
    /// Final ground estimate, ascending indices into the bin's points.
    pub ground: Vec<usize>,
    /// Plane fitted to `ground`.
    pub plane: PlaneModel,
}

/// Iterative plane refinement of one bin.
///
/// Each round fits a plane to the current estimate and keeps every bin
/// point with `d − d̂_k < M_d`, where `d̂_k = −nᵀp_k`. The returned plane is
/// refitted on the final estimate.
pub fn extract_ground_bin(
    points: &[Vector3<f64>],
    zone: usize,
    params: &RgpfParams,
) -> Result<BinGround, BinSkip> {
    let mut ground = select_initial_seeds(points, zone, params)?;
    for _ in 0..params.num_iter {
        let plane = fit_plane_subset(points, &ground)?;
        ground.clear();
        ground
            .extend((0..points.len()).filter(|&k| plane.signed_distance(&points[k]) < params.m_d));
    }
    let plane = fit_plane_subset(points, &ground)?;
    Ok(BinGround { ground, plane })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn unit_square() {
        let pts = [v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(1., 1., 0.)];
        let p = fit_plane_pca(&pts).unwrap();
        assert_abs_diff_eq!(p.normal, v(0., 0., 1.), epsilon = 1e-12);
        assert_abs_diff_eq!(p.d, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eigenvalues[2], 0.0, epsilon = 1e-12);
        assert!(p.eigenvalues[0] >= p.eigenvalues[1] && p.eigenvalues[1] >= p.eigenvalues[2]);
    }

    #[test]
    fn inclined_plane() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..5 {
                let (x, y) = (i as f64 * 0.7 - 2.0, j as f64 * 0.9 + 1.0);
                pts.push(v(x, y, 0.1 * x + 2.0));
            }
        }
        let p = fit_plane_pca(&pts).unwrap();
        let want = v(-0.1, 0.0, 1.0).normalize();
        assert_abs_diff_eq!(p.normal, want, epsilon = 1e-9);
        assert_abs_diff_eq!(p.d, -want.dot(&p.centroid), epsilon = 1e-12);
        // the plane passes through (0, y, 2): n·(0,0,2) + d = 0
        assert_abs_diff_eq!(p.signed_distance(&v(0.0, 3.0, 2.0)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(
            fit_plane_pca(&[v(0., 0., 0.), v(1., 0., 0.)]),
            Err(FitError::InsufficientPoints(2))
        );
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<_> = (0..10).map(|i| v(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert!(matches!(fit_plane_pca(&pts), Err(FitError::Degenerate(_))));
        let same = vec![v(1., 1., 1.); 5];
        assert!(matches!(fit_plane_pca(&same), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn vertical_plane_sign() {
        let pts: Vec<_> = (0..20)
            .map(|i| v(3.0, (i % 5) as f64, (i / 5) as f64))
            .collect();
        let p = fit_plane_pca(&pts).unwrap();
        assert_abs_diff_eq!(p.normal, v(1., 0., 0.), epsilon = 1e-12);
    }

    #[test]
    fn reflection_filter_threshold() {
        let params = RgpfParams::default();
        assert_abs_diff_eq!(params.seed_z_filter(0), -1.8953, epsilon = 1e-12);
        let mut pts: Vec<_> = (0..12)
            .map(|i| v(i as f64 * 0.3, 0.1 * (i % 3) as f64, -1.7))
            .collect();
        pts.push(v(1.0, 0.2, -2.5));
        let seeds = select_initial_seeds(&pts, 0, &params).unwrap();
        assert!(!seeds.contains(&12));
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn seed_hand_trace() {
        let params = RgpfParams {
            n_seed: 3,
            min_bin_points: 4,
            ..Default::default()
        };
        let pts = [
            v(3., 0., -1.7),
            v(3., 1., -1.6),
            v(4., 0., -1.5),
            v(4., 1., 0.5),
        ];
        assert_eq!(
            select_initial_seeds(&pts, 0, &params).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn identical_heights_all_seeds() {
        let pts: Vec<_> = (0..15)
            .map(|i| v(i as f64, (i * 7 % 4) as f64, -1.7))
            .collect();
        let seeds = select_initial_seeds(&pts, 0, &RgpfParams::default()).unwrap();
        assert_eq!(seeds.len(), 15);
    }

    #[test]
    fn later_zones_filter_less() {
        let p = RgpfParams::default();
        assert!(p.seed_z_filter(1) < p.seed_z_filter(0));
        assert!(p.seed_z_filter(3) < p.seed_z_filter(2));
        assert_eq!(p.seed_z_filter(9), p.seed_z_filter(3));
    }

    #[test]
    fn flat_bin_fixed_point() {
        let h = 1.723;
        let pts: Vec<_> = (0..50)
            .map(|i| v(5.0 + (i % 10) as f64 * 0.2, (i / 10) as f64 * 0.3, -h))
            .collect();
        let out = extract_ground_bin(&pts, 0, &RgpfParams::default()).unwrap();
        assert_eq!(out.ground, (0..50).collect::<Vec<_>>());
        assert_abs_diff_eq!(out.plane.normal, v(0., 0., 1.), epsilon = 1e-12);
    }

    #[test]
    fn sparse_bin_skipped() {
        let pts: Vec<_> = (0..5).map(|i| v(i as f64, 1.0, -1.7)).collect();
        assert_eq!(
            extract_ground_bin(&pts, 0, &RgpfParams::default()),
            Err(BinSkip::TooFewPoints(5))
        );
    }

    #[test]
    fn filter_can_empty_a_bin() {
        let pts: Vec<_> = (0..12)
            .map(|i| v(i as f64, 1.0, -3.0 - 0.01 * i as f64))
            .collect();
        assert_eq!(
            select_initial_seeds(&pts, 0, &RgpfParams::default()),
            Err(BinSkip::TooFewAfterFilter(0))
        );
    }

    #[test]
    fn params_validation() {
        assert!(RgpfParams::default().validate().is_ok());
        let bad = RgpfParams {
            m_h: -0.9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RgpfParams {
            seed_filter_offsets: vec![0.0, 0.5, 0.2, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
