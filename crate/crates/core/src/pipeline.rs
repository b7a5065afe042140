//! End-to-end segmentation: zone binning, per-bin plane fitting and the
//! ground likelihood test.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::czm::{zone_boundaries, BinCoord, PolarGrid, ZoneConfig, ZoneModel};
use crate::error::{Error, Result};
use crate::gle::{BinFeatures, BinVerdict, Factors, GleParams, GroundLikelihood};
use crate::plane_fit::{extract_ground_bin, BinSkip, RgpfParams};

/// Unbinned near-field points below `−h_s + NEAR_FIELD_MARGIN` count as
/// ground when `near_field_passthrough` is on.
pub const NEAR_FIELD_MARGIN: f64 = 0.2;

/// Uniform polar grid used by the `uniform+U` variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformGridConfig {
    pub n_rings: usize,
    pub n_sectors: usize,
    pub l_max: f64,
}

impl Default for UniformGridConfig {
    fn default() -> Self {
        UniformGridConfig {
            n_rings: 60,
            n_sectors: 54,
            l_max: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchworkParams {
    pub czm: ZoneConfig,
    pub rgpf: RgpfParams,
    pub gle: GleParams,
    pub uniform: UniformGridConfig,
    pub near_field_passthrough: bool,
}

impl PatchworkParams {
    pub fn validate(&self) -> Result<()> {
        self.czm.validate()?;
        self.rgpf.validate()?;
        self.gle.validate()?;
        PolarGrid::uniform(
            self.uniform.n_rings,
            self.uniform.n_sectors,
            self.uniform.l_max,
        )?;
        let b = zone_boundaries(&self.czm)?;
        let l_tau = self.l_tau()?;
        if let Some(m) = (0..4).find(|&m| b[m] < l_tau && m >= self.gle.sigma_tau.len()) {
            return Err(Error::Config(format!(
                "gle.l_tau = {l_tau} reaches zone {} which has no gle.sigma_tau entry",
                m + 1
            )));
        }
        Ok(())
    }

    /// `gle.l_tau`, defaulting to the outer radius of zone 2.
    pub fn l_tau(&self) -> Result<f64> {
        match self.gle.l_tau {
            Some(l) => Ok(l),
            None => Ok(zone_boundaries(&self.czm)?[2]),
        }
    }

    /// Copy with every defaulted field written out.
    pub fn resolved(&self) -> Result<Self> {
        let mut p = self.clone();
        p.gle.l_tau = Some(self.l_tau()?);
        Ok(p)
    }

    pub fn likelihood(&self) -> Result<GroundLikelihood> {
        Ok(GroundLikelihood::new(
            self.gle.clone(),
            self.rgpf.sensor_height,
            self.czm.l_min,
            self.l_tau()?,
        ))
    }
}

/// Ablation variants: grid type plus the likelihood factors in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "uniform+U")]
    UniformU,
    #[serde(rename = "czm+U")]
    CzmU,
    #[serde(rename = "czm+U+E")]
    CzmUE,
    #[default]
    #[serde(rename = "czm+U+E+F")]
    CzmUEF,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::UniformU,
        Variant::CzmU,
        Variant::CzmUE,
        Variant::CzmUEF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::UniformU => "uniform+U",
            Variant::CzmU => "czm+U",
            Variant::CzmUE => "czm+U+E",
            Variant::CzmUEF => "czm+U+E+F",
        }
    }

    pub fn factors(self) -> Factors {
        match self {
            Variant::UniformU | Variant::CzmU => Factors {
                elevation: false,
                flatness: false,
            },
            Variant::CzmUE => Factors {
                elevation: true,
                flatness: false,
            },
            Variant::CzmUEF => Factors::ALL,
        }
    }

    pub fn grid(self, params: &PatchworkParams) -> Result<PolarGrid> {
        match self {
            Variant::UniformU => {
                let u = &params.uniform;
                PolarGrid::uniform(u.n_rings, u.n_sectors, u.l_max)
            }
            _ => PolarGrid::concentric(&params.czm),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown variant `{s}`, expected one of uniform+U, czm+U, czm+U+E, czm+U+E+F"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinOutcome {
    Empty,
    Skipped(BinSkip),
    Evaluated {
        verdict: BinVerdict,
        /// Size of the bin's final ground estimate.
        n_candidates: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinReport {
    pub coord: BinCoord,
    pub n_points: usize,
    pub outcome: BinOutcome,
}

impl BinReport {
    pub fn verdict(&self) -> Option<&BinVerdict> {
        match &self.outcome {
            BinOutcome::Evaluated { verdict, .. } => Some(verdict),
            _ => None,
        }
    }
}

/// Stage durations, microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTiming {
    pub binning_us: f64,
    pub fitting_us: f64,
    pub gle_us: f64,
    pub total_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Estimated ground, ascending.
    pub ground_indices: Vec<usize>,
    /// Everything else, ascending.
    pub nonground_indices: Vec<usize>,
    pub per_bin: Vec<BinReport>,
    pub timing: StageTiming,
}

impl SegmentationResult {
    pub fn from_mask(mask: &[bool], per_bin: Vec<BinReport>, timing: StageTiming) -> Self {
        let (mut ground_indices, mut nonground_indices) = (Vec::new(), Vec::new());
        for (i, &g) in mask.iter().enumerate() {
            if g {
                ground_indices.push(i);
            } else {
                nonground_indices.push(i);
            }
        }
        SegmentationResult {
            ground_indices,
            nonground_indices,
            per_bin,
            timing,
        }
    }

    pub fn ground_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.ground_indices {
            mask[i] = true;
        }
        mask
    }

    pub fn num_points(&self) -> usize {
        self.ground_indices.len() + self.nonground_indices.len()
    }

    /// Sum of stage durations, milliseconds.
    pub fn total_ms(&self) -> f64 {
        self.timing.total_us / 1000.0
    }
}

/// Full pipeline with every likelihood factor.
pub fn segment(cloud: &PointCloud, params: &PatchworkParams) -> Result<SegmentationResult> {
    segment_variant(cloud, params, Variant::CzmUEF)
}

pub fn segment_variant(
    cloud: &PointCloud,
    params: &PatchworkParams,
    variant: Variant,
) -> Result<SegmentationResult> {
    params.validate()?;
    let grid = variant.grid(params)?;
    let gle = params.likelihood()?;
    Ok(run(cloud, params, grid, &gle, variant.factors()))
}

/// Same as [`segment_variant`] with bin work scheduled on `pool`.
#[cfg(feature = "parallel")]
pub fn segment_in_pool(
    cloud: &PointCloud,
    params: &PatchworkParams,
    variant: Variant,
    pool: &rayon::ThreadPool,
) -> Result<SegmentationResult> {
    pool.install(|| segment_variant(cloud, params, variant))
}

pub fn ablation_variants(
    cloud: &PointCloud,
    params: &PatchworkParams,
    variant: Variant,
) -> Result<SegmentationResult> {
    segment_variant(cloud, params, variant)
}

type FitOutcome = std::result::Result<(Vec<u32>, BinFeatures), BinSkip>;

fn fit_bin(cloud: &PointCloud, indices: &[u32], zone: usize, rgpf: &RgpfParams) -> FitOutcome {
    let pts: Vec<Vector3<f64>> = indices
        .iter()
        .map(|&i| Vector3::from(cloud.points[i as usize].xyz()))
        .collect();
    let out = extract_ground_bin(&pts, zone, rgpf)?;
    let c = out.plane.centroid;
    let features = BinFeatures {
        v3: out.plane.normal,
        mean_z: c.z,
        r: (c.x * c.x + c.y * c.y).sqrt(),
        sigma: out.plane.surface_variation(),
        zone,
    };
    let ground = out.ground.iter().map(|&k| indices[k]).collect();
    Ok((ground, features))
}

fn run(
    cloud: &PointCloud,
    params: &PatchworkParams,
    grid: PolarGrid,
    gle: &GroundLikelihood,
    factors: Factors,
) -> SegmentationResult {
    let start = clock::now();
    let model = ZoneModel::build(cloud, grid);
    let t_bin = clock::now();

    let fit_one = |id: usize| {
        let bin = model.bin(id);
        if bin.point_indices.is_empty() {
            None
        } else {
            Some(fit_bin(
                cloud,
                bin.point_indices,
                bin.coord.zone,
                &params.rgpf,
            ))
        }
    };
    #[cfg(feature = "parallel")]
    let fits: Vec<Option<FitOutcome>> = {
        use rayon::prelude::*;
        (0..model.num_bins()).into_par_iter().map(fit_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fits: Vec<Option<FitOutcome>> = (0..model.num_bins()).map(fit_one).collect();
    let t_fit = clock::now();

    let mut mask = vec![false; cloud.len()];
    let mut per_bin = Vec::with_capacity(model.num_bins());
    for (bin, fit) in model.bins().zip(fits) {
        let outcome = match fit {
            None => BinOutcome::Empty,
            Some(Err(skip)) => BinOutcome::Skipped(skip),
            Some(Ok((ground, features))) => {
                let verdict = gle.evaluate_with(&features, factors);
                if verdict.is_ground {
                    for &i in &ground {
                        mask[i as usize] = true;
                    }
                }
                BinOutcome::Evaluated {
                    verdict,
                    n_candidates: ground.len(),
                }
            }
        };
        per_bin.push(BinReport {
            coord: bin.coord,
            n_points: bin.point_indices.len(),
            outcome,
        });
    }
    if params.near_field_passthrough {
        let z_max = -params.rgpf.sensor_height + NEAR_FIELD_MARGIN;
        let l_min = model.grid().min_range();
        for &i in model.unbinned() {
            let p = &cloud.points[i as usize];
            if p.range_xy() < l_min && (p.z as f64) < z_max {
                mask[i as usize] = true;
            }
        }
    }
    let t_gle = clock::now();

    let timing = StageTiming {
        binning_us: clock::micros(start, t_bin),
        fitting_us: clock::micros(t_bin, t_fit),
        gle_us: clock::micros(t_fit, t_gle),
        total_us: clock::micros(start, t_gle),
    };
    SegmentationResult::from_mask(&mask, per_bin, timing)
}

/// Wall clock that reads zero where `std::time::Instant` is unavailable.
pub(crate) mod clock {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    pub type Stamp = std::time::Instant;
    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    pub type Stamp = ();

    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    pub fn now() -> Stamp {
        std::time::Instant::now()
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    pub fn now() -> Stamp {}

    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    pub fn micros(a: Stamp, b: Stamp) -> f64 {
        b.duration_since(a).as_secs_f64() * 1e6
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    pub fn micros(_: Stamp, _: Stamp) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;

    #[test]
    fn empty_cloud() {
        let r = segment(&PointCloud::default(), &PatchworkParams::default()).unwrap();
        assert!(r.ground_indices.is_empty() && r.nonground_indices.is_empty());
        assert_eq!(r.per_bin.len(), 504);
        assert!(r.per_bin.iter().all(|b| b.outcome == BinOutcome::Empty));
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("czm+X".parse::<Variant>().is_err());
    }

    #[test]
    fn uniform_variant_bin_count() {
        let cloud = PointCloud::new(vec![Point::new(5.0, 1.0, -1.7)]);
        let r = segment_variant(&cloud, &PatchworkParams::default(), Variant::UniformU).unwrap();
        assert_eq!(r.per_bin.len(), 3240);
    }

    #[test]
    fn default_l_tau_is_zone_two_outer_radius() {
        assert!((PatchworkParams::default().l_tau().unwrap() - 22.025).abs() < 1e-12);
    }

    #[test]
    fn l_tau_past_configured_thresholds_rejected() {
        let mut p = PatchworkParams::default();
        p.gle.l_tau = Some(30.0);
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        p.gle.sigma_tau.push(0.0003);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn near_field_passthrough() {
        let cloud = PointCloud::new(vec![Point::new(1.0, 0.0, -1.7), Point::new(1.0, 0.5, 0.0)]);
        let mut p = PatchworkParams::default();
        assert!(segment(&cloud, &p).unwrap().ground_indices.is_empty());
        p.near_field_passthrough = true;
        assert_eq!(segment(&cloud, &p).unwrap().ground_indices, vec![0]);
    }
}
