use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use patchwork::cloud::ground_truth_mask;
use patchwork::eval::{
    benchmark, confusion_in_range, metrics, run_method, summarize, BenchConfig, EvalRange,
    FrameMetrics, Method,
};
use patchwork::io::{
    read_kitti_bin, read_kitti_frame, write_colored_ply, write_kitti_bin, write_kitti_labels,
    BinScan,
};
use patchwork::pipeline::{BinOutcome, BinReport};
use patchwork::plane_fit::BinSkip;
use patchwork::synth::{synth_scene, SceneSpec};
use patchwork::{PointCloud, SegmentationResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{io_error, CliError};
use crate::frames::{labelled, scans, Frame};

fn required(opt: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    opt.ok_or_else(|| CliError::Validation(format!("no {what} given (flag or [io] in the config)")))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Runs `f` on every frame, in parallel when `jobs > 1`, keeping input order.
fn for_frames<T: Send>(
    frames: &[Frame],
    jobs: usize,
    f: impl Fn(&Frame) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    if jobs <= 1 {
        return frames.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| frames.par_iter().map(&f).collect())
}

fn load(frame: &Frame) -> Result<BinScan, CliError> {
    let scan = match &frame.label {
        Some(label) => read_kitti_frame(&frame.bin, label),
        None => read_kitti_bin(&frame.bin),
    };
    scan.map_err(|e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", frame.bin.display())),
        io => io,
    })
}

fn dropped_note(scan: &BinScan) -> String {
    if scan.dropped.is_empty() {
        String::new()
    } else {
        format!(", dropped {} non-finite", scan.dropped.len())
    }
}

fn segment_frame(cloud: &PointCloud, cfg: &RunConfig) -> Result<SegmentationResult, CliError> {
    let bench = bench_config(cfg);
    Ok(run_method(cloud, &cfg.params(), &bench)?)
}

fn bench_config(cfg: &RunConfig) -> BenchConfig {
    BenchConfig {
        method: cfg.run.method,
        variant: cfg.run.variant,
        ransac: cfg.ransac.clone(),
        seed: cfg.run.seed,
        warmup: cfg.bench.warmup,
        reps: cfg.bench.reps,
    }
}

#[derive(Serialize)]
struct BinRow {
    zone: usize,
    ring: usize,
    sector: usize,
    n_points: usize,
    status: &'static str,
    n_candidates: Option<usize>,
    v3_x: Option<f64>,
    v3_y: Option<f64>,
    v3_z: Option<f64>,
    mean_z: Option<f64>,
    r: Option<f64>,
    sigma: Option<f64>,
    phi: Option<f64>,
    psi: Option<f64>,
    varphi: Option<f64>,
    likelihood: Option<f64>,
    is_ground: Option<bool>,
}

fn bin_row(b: &BinReport) -> BinRow {
    let mut row = BinRow {
        zone: b.coord.zone,
        ring: b.coord.ring,
        sector: b.coord.sector,
        n_points: b.n_points,
        status: "empty",
        n_candidates: None,
        v3_x: None,
        v3_y: None,
        v3_z: None,
        mean_z: None,
        r: None,
        sigma: None,
        phi: None,
        psi: None,
        varphi: None,
        likelihood: None,
        is_ground: None,
    };
    match &b.outcome {
        BinOutcome::Empty => {}
        BinOutcome::Skipped(skip) => {
            row.status = match skip {
                BinSkip::TooFewPoints(_) => "too_few_points",
                BinSkip::TooFewAfterFilter(_) => "too_few_after_filter",
                BinSkip::Fit(_) => "degenerate_fit",
            }
        }
        BinOutcome::Evaluated {
            verdict,
            n_candidates,
        } => {
            let f = &verdict.features;
            row.status = "evaluated";
            row.n_candidates = Some(*n_candidates);
            row.v3_x = Some(f.v3.x);
            row.v3_y = Some(f.v3.y);
            row.v3_z = Some(f.v3.z);
            row.mean_z = Some(f.mean_z);
            row.r = Some(f.r);
            row.sigma = Some(f.sigma);
            row.phi = Some(verdict.phi);
            row.psi = Some(verdict.psi);
            row.varphi = Some(verdict.varphi);
            row.likelihood = Some(verdict.likelihood);
            row.is_ground = Some(verdict.is_ground);
        }
    }
    row
}

fn write_bin_csv(path: &Path, result: &SegmentationResult) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for b in &result.per_bin {
        w.serialize(bin_row(b))?;
    }
    if result.per_bin.is_empty() {
        w.write_record(["zone", "ring", "sector", "n_points", "status"])?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub struct SegmentOpts {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn segment(cfg: &RunConfig, opts: SegmentOpts) -> Result<(), CliError> {
    let input = required(opts.input.or(cfg.io.input.clone()), "input")?;
    let labels = opts.labels.or(cfg.io.labels.clone());
    let out = required(opts.out.or(cfg.io.out.clone()), "output directory")?;
    let frames = match &labels {
        Some(l) => labelled(&input, Some(l))?,
        None => scans(&input)?,
    };
    ensure_dir(&out)?;
    let lines = for_frames(&frames, cfg.run.jobs.0, |frame| {
        let scan = load(frame)?;
        let cloud = &scan.cloud;
        let result = segment_frame(cloud, cfg)?;
        let truth = match cloud.labels {
            Some(_) => Some(ground_truth_mask(cloud)?),
            None => None,
        };
        let ply = out.join(format!("{}.ply", frame.stem));
        write_colored_ply(cloud, &result, truth.as_ref(), &ply, cfg.output.ply_format)?;
        if cfg.output.bin_csv {
            write_bin_csv(&out.join(format!("{}_bins.csv", frame.stem)), &result)?;
        }
        Ok(format!(
            "{}: {} points, {} ground, {:.2} ms{} -> {}",
            frame.stem,
            cloud.len(),
            result.ground_indices.len(),
            result.total_ms(),
            dropped_note(&scan),
            ply.display()
        ))
    })?;
    let mut stdout = std::io::stdout().lock();
    for l in lines {
        let _ = writeln!(stdout, "{l}");
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    frame_id: String,
    n_tp: u64,
    n_fp: u64,
    n_fn: u64,
    n_tn: u64,
    precision: f64,
    recall: f64,
    f1: f64,
    accuracy: f64,
    ms_total: f64,
    ms_bin: f64,
    ms_fit: f64,
    ms_gle: f64,
    precision_std: Option<f64>,
    recall_std: Option<f64>,
}

pub struct EvalOpts {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn eval(cfg: &RunConfig, opts: EvalOpts) -> Result<(), CliError> {
    let input = required(opts.input.or(cfg.io.input.clone()), "input")?;
    let labels = opts.labels.or(cfg.io.labels.clone());
    let csv_path = opts
        .csv
        .unwrap_or_else(|| cfg.io.out.clone().unwrap_or_default().join("eval.csv"));
    let frames = labelled(&input, labels.as_deref())?;
    let params = cfg.params();
    let (l_min, l_max) = match cfg.run.method {
        Method::Patchwork => {
            let grid = cfg.run.variant.grid(&params)?;
            (grid.min_range(), grid.max_range())
        }
        Method::Ransac => (params.czm.l_min, params.czm.l_max),
    };
    let rows = for_frames(&frames, cfg.run.jobs.0, |frame| {
        let scan = load(frame)?;
        let cloud = &scan.cloud;
        let truth = ground_truth_mask(cloud)?;
        let result = segment_frame(cloud, cfg)?;
        let c = confusion_in_range(cloud, &result, &truth, cfg.eval.range, l_min, l_max)?;
        let m = metrics(&c);
        let t = result.timing;
        let row = EvalRow {
            frame_id: frame.stem.clone(),
            n_tp: c.n_tp,
            n_fp: c.n_fp,
            n_fn: c.n_fn,
            n_tn: c.n_tn,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            accuracy: m.accuracy,
            ms_total: t.total_us / 1e3,
            ms_bin: t.binning_us / 1e3,
            ms_fit: t.fitting_us / 1e3,
            ms_gle: t.gle_us / 1e3,
            precision_std: None,
            recall_std: None,
        };
        Ok((row, m))
    })?;
    let per_frame: Vec<FrameMetrics> = rows.iter().map(|(_, m)| *m).collect();
    let runtimes: Vec<f64> = rows.iter().map(|(r, _)| r.ms_total / 1e3).collect();
    let summary = summarize(&per_frame, &runtimes)?;

    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let mut w = csv::Writer::from_path(&csv_path)?;
    let n = rows.len() as f64;
    let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(|(r, _)| f(r)).sum::<f64>() / n;
    let total = |f: fn(&EvalRow) -> u64| rows.iter().map(|(r, _)| f(r)).sum::<u64>();
    let summary_row = EvalRow {
        frame_id: "summary".into(),
        n_tp: total(|r| r.n_tp),
        n_fp: total(|r| r.n_fp),
        n_fn: total(|r| r.n_fn),
        n_tn: total(|r| r.n_tn),
        precision: summary.precision_mean,
        recall: summary.recall_mean,
        f1: summary.f1_mean,
        accuracy: mean(|r| r.accuracy),
        ms_total: mean(|r| r.ms_total),
        ms_bin: mean(|r| r.ms_bin),
        ms_fit: mean(|r| r.ms_fit),
        ms_gle: mean(|r| r.ms_gle),
        precision_std: Some(summary.precision_std),
        recall_std: Some(summary.recall_std),
    };
    for (row, _) in &rows {
        w.serialize(row)?;
    }
    w.serialize(&summary_row)?;
    w.flush().map_err(|e| io_error(&csv_path, e))?;

    let method = match cfg.run.method {
        Method::Patchwork => format!("patchwork {}", cfg.run.variant),
        Method::Ransac => "ransac".into(),
    };
    println!(
        "frames: {}  method: {method}  range: {}",
        summary.n_frames,
        range_name(cfg.eval.range)
    );
    println!(
        "precision  mean {:.4}  std {:.4}",
        summary.precision_mean, summary.precision_std
    );
    println!(
        "recall     mean {:.4}  std {:.4}",
        summary.recall_mean, summary.recall_std
    );
    println!("f1         mean {:.4}", summary.f1_mean);
    println!("speed      mean {:.2} Hz", summary.mean_hz);
    println!("csv: {}", csv_path.display());
    Ok(())
}

fn range_name(range: EvalRange) -> &'static str {
    match range {
        EvalRange::Segmentable => "segmentable",
        EvalRange::All => "all",
    }
}

pub struct BenchOpts {
    pub input: Option<PathBuf>,
    pub reps: Option<usize>,
    pub warmup: Option<usize>,
}

pub fn bench(cfg: &RunConfig, opts: BenchOpts) -> Result<(), CliError> {
    let input = required(opts.input.or(cfg.io.input.clone()), "input")?;
    let frames = scans(&input)?;
    let mut bc = bench_config(cfg);
    bc.reps = opts.reps.unwrap_or(bc.reps);
    bc.warmup = opts.warmup.unwrap_or(bc.warmup);
    let paths: Vec<&Path> = frames.iter().map(|f| f.bin.as_path()).collect();
    let rep = benchmark(&paths, &cfg.params(), &bc)?;
    match bc.method {
        Method::Patchwork => println!("method: patchwork {}", bc.variant),
        Method::Ransac => println!("method: ransac"),
    }
    println!("frames: {}", rep.n_frames);
    println!(
        "runs: {} timed, {} warmup per frame",
        rep.runs_s.len(),
        bc.warmup
    );
    if bc.method == Method::Patchwork {
        println!("bins: {}", rep.num_bins);
    }
    println!("mean: {:.3} ms ({:.2} Hz)", rep.mean_s * 1e3, rep.mean_hz);
    println!(
        "median: {:.3} ms ({:.2} Hz)",
        rep.median_s * 1e3,
        rep.median_hz
    );
    println!("stage      mean ms");
    let s = rep.stage_mean;
    println!("binning    {:.3}", s.binning_us / 1e3);
    println!("fitting    {:.3}", s.fitting_us / 1e3);
    println!("gle        {:.3}", s.gle_us / 1e3);
    println!("total      {:.3}", s.total_us / 1e3);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Flat,
    Urban,
    Reflections,
}

pub struct SynthOpts {
    pub out: Option<PathBuf>,
    pub frames: usize,
    pub first: usize,
    pub preset: Option<Preset>,
    pub points: Option<usize>,
}

pub fn synth(cfg: &RunConfig, opts: SynthOpts) -> Result<(), CliError> {
    let out = required(opts.out.or(cfg.io.out.clone()), "output directory")?;
    let n = opts.points.unwrap_or(50_000);
    let spec = match (opts.preset, opts.points) {
        (Some(Preset::Flat), _) | (None, Some(_)) => SceneSpec::flat(n, 0.02),
        (Some(Preset::Urban), _) => SceneSpec::urban(n),
        (Some(Preset::Reflections), _) => {
            if n < 300 {
                return Err(CliError::Validation(
                    "reflections preset needs at least 300 points".into(),
                ));
            }
            SceneSpec::with_reflections(n, 300)
        }
        (None, None) => cfg.scene.clone(),
    };
    let spec = SceneSpec {
        sensor_height: cfg.scene.sensor_height,
        ..spec
    };
    spec.validate()?;
    ensure_dir(&out)?;
    for k in 0..opts.frames {
        let seed = cfg.run.seed.wrapping_add(k as u64);
        let cloud = synth_scene(&spec, seed)?;
        let stem = format!("{:06}", opts.first + k);
        let bin = out.join(format!("{stem}.bin"));
        let label = out.join(format!("{stem}.label"));
        write_kitti_bin(&bin, &cloud.points)?;
        write_kitti_labels(&label, cloud.labels.as_deref().unwrap_or_default())?;
        println!(
            "{stem}: {} points, seed {seed} -> {}",
            cloud.len(),
            bin.display()
        );
    }
    Ok(())
}

pub fn dump_config(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = cfg.resolved()?.to_toml()?;
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| io_error(&path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
