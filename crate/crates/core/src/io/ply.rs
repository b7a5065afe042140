//! PLY export with per-vertex segmentation colors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{GroundTruthMask, PointCloud};
use crate::error::{Error, Result};
use crate::pipeline::SegmentationResult;

pub type Rgb = [u8; 3];

pub const TP: Rgb = [0, 255, 0];
pub const FN: Rgb = [0, 0, 255];
pub const FP: Rgb = [255, 0, 0];
pub const TN: Rgb = [128, 128, 128];
pub const GROUND: Rgb = [255, 255, 0];
pub const NON_GROUND: Rgb = [0, 255, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

/// With truth: TP green, FN blue, FP red, TN gray. Without: ground yellow,
/// non-ground cyan.
pub fn color_for(predicted_ground: bool, truth: Option<bool>) -> Rgb {
    match (predicted_ground, truth) {
        (true, Some(true)) => TP,
        (true, Some(false)) => FP,
        (false, Some(true)) => FN,
        (false, Some(false)) => TN,
        (true, None) => GROUND,
        (false, None) => NON_GROUND,
    }
}

pub fn write_colored_ply(
    cloud: &PointCloud,
    result: &SegmentationResult,
    truth: Option<&GroundTruthMask>,
    path: impl AsRef<Path>,
    format: PlyFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_colored_ply_to(&mut w, cloud, result, truth, format)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_colored_ply_to<W: Write>(
    w: &mut W,
    cloud: &PointCloud,
    result: &SegmentationResult,
    truth: Option<&GroundTruthMask>,
    format: PlyFormat,
) -> std::io::Result<()> {
    let n = cloud.len();
    let predicted = result.ground_mask(n);
    if let Some(t) = truth {
        if t.len() != n {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("truth mask has {} entries for {n} points", t.len()),
            ));
        }
    }
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {fmt} 1.0\ncomment frame {}\nelement vertex {n}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        if cloud.frame_id.is_empty() {
            "-"
        } else {
            &cloud.frame_id
        }
    )?;
    for (i, p) in cloud.points.iter().enumerate() {
        let [r, g, b] = color_for(predicted[i], truth.map(|t| t.is_ground[i]));
        match format {
            PlyFormat::Ascii => writeln!(w, "{} {} {} {r} {g} {b}", p.x, p.y, p.z)?,
            PlyFormat::BinaryLittleEndian => {
                w.write_all(&p.x.to_le_bytes())?;
                w.write_all(&p.y.to_le_bytes())?;
                w.write_all(&p.z.to_le_bytes())?;
                w.write_all(&[r, g, b])?;
            }
        }
    }
    Ok(())
}
