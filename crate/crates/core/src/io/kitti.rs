//! KITTI velodyne `.bin` scans and SemanticKITTI `.label` files.

use std::fs;
use std::path::Path;

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

/// Bytes per `.bin` record: x, y, z, intensity as little-endian f32.
pub const KITTI_POINT_BYTES: usize = 16;
/// Bytes per `.label` record: little-endian u32.
pub const KITTI_LABEL_BYTES: usize = 4;

/// A decoded scan together with the records dropped for being non-finite.
#[derive(Debug, Clone)]
pub struct BinScan {
    pub cloud: PointCloud,
    /// Number of records in the file, including dropped ones.
    pub n_records: usize,
    /// Record indices removed because a field was NaN or infinite.
    pub dropped: Vec<usize>,
}

pub fn decode_kitti_bin(bytes: &[u8]) -> Result<BinScan> {
    if !bytes.len().is_multiple_of(KITTI_POINT_BYTES) {
        return Err(Error::Malformed(format!(
            "scan size {} is not a multiple of {KITTI_POINT_BYTES} bytes",
            bytes.len()
        )));
    }
    let n_records = bytes.len() / KITTI_POINT_BYTES;
    let mut points = Vec::with_capacity(n_records);
    let mut dropped = Vec::new();
    for (i, rec) in bytes.chunks_exact(KITTI_POINT_BYTES).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let p = Point::with_intensity(f(0), f(1), f(2), f(3));
        if p.is_finite() {
            points.push(p);
        } else {
            dropped.push(i);
        }
    }
    Ok(BinScan {
        cloud: PointCloud::new(points),
        n_records,
        dropped,
    })
}

pub fn encode_kitti_bin(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * KITTI_POINT_BYTES);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Semantic class ids (lower 16 bits) from raw label bytes.
pub fn decode_kitti_labels(bytes: &[u8], n_points: usize) -> Result<Vec<u16>> {
    if bytes.len() != n_points * KITTI_LABEL_BYTES {
        return Err(Error::Malformed(format!(
            "label file has {} bytes, expected {} for {n_points} points",
            bytes.len(),
            n_points * KITTI_LABEL_BYTES
        )));
    }
    Ok(bytes
        .chunks_exact(KITTI_LABEL_BYTES)
        .map(|r| (u32::from_le_bytes(r.try_into().unwrap()) & 0xFFFF) as u16)
        .collect())
}

/// Encodes semantic ids with a zero instance id.
pub fn encode_kitti_labels(labels: &[u16]) -> Vec<u8> {
    labels
        .iter()
        .flat_map(|&l| (l as u32).to_le_bytes())
        .collect()
}

pub fn read_kitti_bin(path: impl AsRef<Path>) -> Result<BinScan> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut scan = decode_kitti_bin(&bytes)?;
    scan.cloud.frame_id = frame_stem(path);
    Ok(scan)
}

pub fn read_kitti_labels(path: impl AsRef<Path>, n_points: usize) -> Result<Vec<u16>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_kitti_labels(&bytes, n_points)
}

/// Reads a scan and its labels, keeping labels aligned with the finite points.
pub fn read_kitti_frame(bin: impl AsRef<Path>, label: impl AsRef<Path>) -> Result<BinScan> {
    let mut scan = read_kitti_bin(bin)?;
    let raw = read_kitti_labels(label, scan.n_records)?;
    let labels = if scan.dropped.is_empty() {
        raw
    } else {
        let mut drop = scan.dropped.iter().peekable();
        raw.into_iter()
            .enumerate()
            .filter(|(i, _)| {
                if drop.peek() == Some(&i) {
                    drop.next();
                    false
                } else {
                    true
                }
            })
            .map(|(_, l)| l)
            .collect()
    };
    scan.cloud.labels = Some(labels);
    Ok(scan)
}

pub fn write_kitti_bin(path: impl AsRef<Path>, points: &[Point]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_kitti_bin(points)).map_err(|e| Error::io(path, e))
}

pub fn write_kitti_labels(path: impl AsRef<Path>, labels: &[u16]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_kitti_labels(labels)).map_err(|e| Error::io(path, e))
}

fn frame_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
