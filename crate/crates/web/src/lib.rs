//! Browser demo: synthesize a scan, segment it, and inspect the zone layout
//! and the elevation factor. Built with `wasm-pack build --target web`; the
//! page lives in `www/`.

use patchwork::cloud::ground_truth_mask;
use patchwork::eval::{confusion_in_range, metrics, ConfusionCounts, EvalRange};
use patchwork::synth::{synth_scene, SceneSpec};
use patchwork::{PatchworkParams, PointCloud, Variant};
use wasm_bindgen::prelude::*;

/// Per-point outcome codes returned by [`Demo::classes`].
pub const TP: u8 = 0;
pub const FP: u8 = 1;
pub const FN: u8 = 2;
pub const TN: u8 = 3;

#[wasm_bindgen]
pub struct Demo {
    params: PatchworkParams,
    cloud: PointCloud,
    truth: Vec<bool>,
    ground: Vec<bool>,
    counts: ConfusionCounts,
    n_bins: usize,
}

impl Default for Demo {
    fn default() -> Self {
        Demo::new()
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo {
            params: PatchworkParams::default(),
            cloud: PointCloud::default(),
            truth: Vec::new(),
            ground: Vec::new(),
            counts: ConfusionCounts::default(),
            n_bins: 0,
        }
    }

    /// Replaces the scan. `preset` is `flat`, `urban` or `reflections`.
    pub fn generate(&mut self, preset: &str, n_points: usize, seed: u64) -> Result<usize, String> {
        let spec = match preset {
            "flat" => SceneSpec::flat(n_points, 0.02),
            "urban" => SceneSpec::urban(n_points),
            "reflections" => SceneSpec::with_reflections(n_points, (n_points / 150).min(n_points)),
            other => return Err(format!("unknown preset `{other}`")),
        };
        let cloud = synth_scene(&spec, seed).map_err(|e| e.to_string())?;
        let truth = ground_truth_mask(&cloud).map_err(|e| e.to_string())?;
        self.truth = truth.is_ground;
        self.ground = vec![false; cloud.len()];
        self.counts = ConfusionCounts::default();
        self.n_bins = 0;
        self.cloud = cloud;
        Ok(self.cloud.len())
    }

    /// Segments the current scan with one of the ablation variants.
    pub fn segment(&mut self, variant: &str) -> Result<(), String> {
        let variant: Variant = variant
            .parse()
            .map_err(|e: patchwork::Error| e.to_string())?;
        let result = patchwork::pipeline::segment_variant(&self.cloud, &self.params, variant)
            .map_err(|e| e.to_string())?;
        let grid = variant.grid(&self.params).map_err(|e| e.to_string())?;
        let truth = patchwork::GroundTruthMask {
            is_ground: self.truth.clone(),
        };
        self.counts = confusion_in_range(
            &self.cloud,
            &result,
            &truth,
            EvalRange::Segmentable,
            grid.min_range(),
            grid.max_range(),
        )
        .map_err(|e| e.to_string())?;
        self.ground = result.ground_mask(self.cloud.len());
        self.n_bins = grid.num_bins();
        Ok(())
    }

    /// `x, y, z` per point.
    pub fn positions(&self) -> Vec<f32> {
        self.cloud
            .points
            .iter()
            .flat_map(|p| [p.x, p.y, p.z])
            .collect()
    }

    /// One of [`TP`], [`FP`], [`FN`], [`TN`] per point.
    pub fn classes(&self) -> Vec<u8> {
        self.truth
            .iter()
            .zip(&self.ground)
            .map(|(&t, &g)| match (t, g) {
                (true, true) => TP,
                (false, true) => FP,
                (true, false) => FN,
                (false, false) => TN,
            })
            .collect()
    }

    pub fn precision(&self) -> f64 {
        metrics(&self.counts).precision
    }

    pub fn recall(&self) -> f64 {
        metrics(&self.counts).recall
    }

    pub fn f1(&self) -> f64 {
        metrics(&self.counts).f1
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Per zone: `l_min, l_max, n_rings, n_sectors`, flattened.
    pub fn zone_layout(&self, variant: &str) -> Result<Vec<f64>, String> {
        let variant: Variant = variant
            .parse()
            .map_err(|e: patchwork::Error| e.to_string())?;
        let grid = variant.grid(&self.params).map_err(|e| e.to_string())?;
        Ok(grid
            .zones()
            .iter()
            .flat_map(|z| [z.l_min, z.l_max, z.n_rings as f64, z.n_sectors as f64])
            .collect())
    }

    /// Elevation midpoint at range `r`.
    pub fn kappa(&self, r: f64) -> Result<f64, String> {
        Ok(self
            .params
            .likelihood()
            .map_err(|e| e.to_string())?
            .kappa(r))
    }

    /// Elevation factor at range `r` for `samples` mean heights spread evenly
    /// over `[z_lo, z_hi]`.
    pub fn elevation_curve(
        &self,
        r: f64,
        z_lo: f64,
        z_hi: f64,
        samples: usize,
    ) -> Result<Vec<f64>, String> {
        let gle = self.params.likelihood().map_err(|e| e.to_string())?;
        let step = if samples > 1 {
            (z_hi - z_lo) / (samples - 1) as f64
        } else {
            0.0
        };
        Ok((0..samples)
            .map(|k| gle.elevation(z_lo + step * k as f64, r))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_scene_segments_cleanly() {
        let mut d = Demo::new();
        assert_eq!(d.generate("flat", 50_000, 1).unwrap(), 50_000);
        d.segment("czm+U+E+F").unwrap();
        assert_eq!(d.n_bins(), 504);
        assert_eq!(d.positions().len(), 150_000);
        assert_eq!(d.classes().len(), 50_000);
        assert!(d.precision() > 0.99);
        assert!(d.recall() > 0.98);
    }

    #[test]
    fn classes_follow_truth_and_estimate() {
        let mut d = Demo::new();
        d.generate("urban", 20_000, 3).unwrap();
        d.segment("czm+U").unwrap();
        let c = d.classes();
        let tp = c.iter().filter(|&&k| k == TP).count() as u64;
        let fp = c.iter().filter(|&&k| k == FP).count() as u64;
        // Counts cover the whole scan, metrics only the segmentable range.
        assert!(tp >= d.counts.n_tp && fp >= d.counts.n_fp);
        assert!(fp > 0);
    }

    #[test]
    fn uniform_layout_is_one_zone() {
        let d = Demo::new();
        assert_eq!(
            d.zone_layout("uniform+U").unwrap(),
            vec![0.0, 80.0, 60.0, 54.0]
        );
        let czm = d.zone_layout("czm+U+E+F").unwrap();
        assert_eq!(czm.len(), 16);
        assert_eq!(czm[0], 2.7);
        assert_eq!(czm[13], 80.0);
    }

    #[test]
    fn elevation_curve_drops_through_kappa() {
        let d = Demo::new();
        let r = 5.0;
        let k = d.kappa(r).unwrap();
        let curve = d.elevation_curve(r, k - 1.0, k + 1.0, 3).unwrap();
        assert!(curve[0] > 0.7 && curve[2] < 0.3);
        assert!((curve[1] - 0.5).abs() < 1e-12);
        // Beyond the elevation range the factor is 1.
        assert_eq!(d.elevation_curve(30.0, 5.0, 5.0, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn bad_inputs_are_errors() {
        let mut d = Demo::new();
        assert!(d.generate("forest", 10, 0).is_err());
        assert!(d.segment("czm+X").is_err());
    }
}
