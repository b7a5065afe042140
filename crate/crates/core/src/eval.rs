//! Point-wise evaluation and runtime benchmarking.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::{GroundTruthMask, PointCloud};
use crate::error::{Error, Result};
use crate::io::read_kitti_bin;
use crate::pipeline::{
    clock, segment_variant, PatchworkParams, SegmentationResult, StageTiming, Variant,
};
use crate::ransac::{segment_ransac_baseline, RansacParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub n_tp: u64,
    pub n_fp: u64,
    pub n_fn: u64,
    pub n_tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.n_tp + self.n_fp + self.n_fn + self.n_tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            n_tp: self.n_tp + o.n_tp,
            n_fp: self.n_fp + o.n_fp,
            n_fn: self.n_fn + o.n_fn,
            n_tn: self.n_tn + o.n_tn,
        }
    }
}

/// Which points take part in the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalRange {
    /// Only points with `L_min <= ρ < L_max`.
    #[default]
    Segmentable,
    All,
}

pub fn confusion(result: &SegmentationResult, truth: &GroundTruthMask) -> Result<ConfusionCounts> {
    confusion_where(result, truth, |_| true)
}

/// Confusion counts over the points for which `include(i)` holds.
pub fn confusion_where(
    result: &SegmentationResult,
    truth: &GroundTruthMask,
    include: impl Fn(usize) -> bool,
) -> Result<ConfusionCounts> {
    let n = truth.len();
    if result.num_points() != n {
        return Err(Error::Precondition(format!(
            "truth mask has {n} entries but the result covers {} points",
            result.num_points()
        )));
    }
    if result
        .ground_indices
        .iter()
        .chain(&result.nonground_indices)
        .any(|&i| i >= n)
    {
        return Err(Error::Precondition(
            "result index out of range of the truth mask".into(),
        ));
    }
    let mut c = ConfusionCounts::default();
    for &i in result.ground_indices.iter().filter(|&&i| include(i)) {
        if truth.is_ground[i] {
            c.n_tp += 1;
        } else {
            c.n_fp += 1;
        }
    }
    for &i in result.nonground_indices.iter().filter(|&&i| include(i)) {
        if truth.is_ground[i] {
            c.n_fn += 1;
        } else {
            c.n_tn += 1;
        }
    }
    Ok(c)
}

/// Confusion counts restricted by `range`.
pub fn confusion_in_range(
    cloud: &PointCloud,
    result: &SegmentationResult,
    truth: &GroundTruthMask,
    range: EvalRange,
    l_min: f64,
    l_max: f64,
) -> Result<ConfusionCounts> {
    match range {
        EvalRange::All => confusion(result, truth),
        EvalRange::Segmentable => confusion_where(result, truth, |i| {
            let r = cloud.points[i].range_xy();
            r >= l_min && r < l_max
        }),
    }
}

/// Precision, recall, F1 and accuracy. Metrics with a zero denominator are
/// reported as 0 and flagged as undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
    pub accuracy_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(c: &ConfusionCounts) -> FrameMetrics {
    let (precision, precision_undefined) = ratio(c.n_tp, c.n_tp + c.n_fp);
    let (recall, recall_undefined) = ratio(c.n_tp, c.n_tp + c.n_fn);
    let (f1, f1_undefined) = ratio(2 * c.n_tp, 2 * c.n_tp + c.n_fp + c.n_fn);
    let (accuracy, accuracy_undefined) = ratio(c.n_tp + c.n_tn, c.total());
    FrameMetrics {
        precision,
        recall,
        f1,
        accuracy,
        precision_undefined,
        recall_undefined,
        f1_undefined,
        accuracy_undefined,
    }
}

/// Aggregate over frames. Standard deviations use the population formula.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub n_frames: usize,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    /// `1 / mean(runtime)`; 0 when no runtimes were given.
    pub mean_hz: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(per_frame: &[FrameMetrics], runtimes_s: &[f64]) -> Result<SequenceSummary> {
    if per_frame.is_empty() {
        return Err(Error::Precondition(
            "summary needs at least one frame".into(),
        ));
    }
    let (precision_mean, precision_std) = mean_std(per_frame.iter().map(|m| m.precision));
    let (recall_mean, recall_std) = mean_std(per_frame.iter().map(|m| m.recall));
    let f1_mean = per_frame.iter().map(|m| m.f1).sum::<f64>() / per_frame.len() as f64;
    let mean_hz = if runtimes_s.is_empty() {
        0.0
    } else {
        let mean = runtimes_s.iter().sum::<f64>() / runtimes_s.len() as f64;
        if mean > 0.0 {
            1.0 / mean
        } else {
            0.0
        }
    };
    Ok(SequenceSummary {
        n_frames: per_frame.len(),
        precision_mean,
        precision_std,
        recall_mean,
        recall_std,
        f1_mean,
        mean_hz,
    })
}

/// Which segmenter a benchmark or evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Patchwork,
    Ransac,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Patchwork => "patchwork",
            Method::Ransac => "ransac",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "patchwork" => Ok(Method::Patchwork),
            "ransac" => Ok(Method::Ransac),
            _ => Err(Error::Validation(format!(
                "unknown method `{s}`, expected patchwork or ransac"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub method: Method,
    pub variant: Variant,
    pub ransac: RansacParams,
    pub seed: u64,
    pub warmup: usize,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            method: Method::Patchwork,
            variant: Variant::CzmUEF,
            ransac: RansacParams::default(),
            seed: 0,
            warmup: 2,
            reps: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n_frames: usize,
    /// Wall-clock seconds of every timed run, frame-major.
    pub runs_s: Vec<f64>,
    /// Per-stage durations reported by the segmenter for each timed run.
    pub stages: Vec<StageTiming>,
    pub mean_s: f64,
    pub median_s: f64,
    pub mean_hz: f64,
    pub median_hz: f64,
    /// Mean per-stage durations, microseconds.
    pub stage_mean: StageTiming,
    pub num_bins: usize,
}

pub fn run_method(
    cloud: &PointCloud,
    params: &PatchworkParams,
    cfg: &BenchConfig,
) -> Result<SegmentationResult> {
    match cfg.method {
        Method::Patchwork => segment_variant(cloud, params, cfg.variant),
        Method::Ransac => Ok(segment_ransac_baseline(
            cloud,
            cfg.ransac.dist_thresh,
            cfg.ransac.max_iters,
            cfg.seed,
        )),
    }
}

/// Times segmentation of in-memory clouds, excluding I/O. Runs are
/// sequential; `warmup` untimed runs precede the `reps` timed ones per frame.
pub fn benchmark_clouds(
    clouds: &[PointCloud],
    params: &PatchworkParams,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.reps < 1 {
        return Err(Error::Validation("bench reps must be >= 1".into()));
    }
    if clouds.is_empty() {
        return Err(Error::Precondition("bench needs at least one frame".into()));
    }
    params.validate()?;
    let mut runs_s = Vec::with_capacity(clouds.len() * cfg.reps);
    let mut stages = Vec::with_capacity(runs_s.capacity());
    for cloud in clouds {
        for _ in 0..cfg.warmup {
            run_method(cloud, params, cfg)?;
        }
        for _ in 0..cfg.reps {
            let t0 = clock::now();
            let r = run_method(cloud, params, cfg)?;
            runs_s.push(clock::micros(t0, clock::now()) * 1e-6);
            stages.push(r.timing);
        }
    }
    let n = runs_s.len() as f64;
    let mean_s = runs_s.iter().sum::<f64>() / n;
    let mut sorted = runs_s.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_s = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let avg = |f: fn(&StageTiming) -> f64| stages.iter().map(f).sum::<f64>() / n;
    let stage_mean = StageTiming {
        binning_us: avg(|s| s.binning_us),
        fitting_us: avg(|s| s.fitting_us),
        gle_us: avg(|s| s.gle_us),
        total_us: avg(|s| s.total_us),
    };
    let hz = |s: f64| if s > 0.0 { 1.0 / s } else { 0.0 };
    let num_bins = match cfg.method {
        Method::Patchwork => cfg.variant.grid(params)?.num_bins(),
        Method::Ransac => 0,
    };
    Ok(BenchReport {
        n_frames: clouds.len(),
        mean_hz: hz(mean_s),
        median_hz: hz(median_s),
        runs_s,
        stages,
        mean_s,
        median_s,
        stage_mean,
        num_bins,
    })
}

/// Loads every scan up front, then benchmarks it.
pub fn benchmark(
    cloud_paths: &[impl AsRef<Path>],
    params: &PatchworkParams,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let clouds = cloud_paths
        .iter()
        .map(|p| read_kitti_bin(p).map(|s| s.cloud))
        .collect::<Result<Vec<_>>>()?;
    benchmark_clouds(&clouds, params, cfg)
}
