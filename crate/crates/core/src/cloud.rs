//! Point cloud containers and the ground-truth class convention.

use crate::error::{Error, Result};

/// SemanticKITTI semantic class ids used by this crate.
pub mod class {
    pub const UNLABELED: u16 = 0;
    pub const OUTLIER: u16 = 1;
    pub const CAR: u16 = 10;
    pub const ROAD: u16 = 40;
    pub const PARKING: u16 = 44;
    pub const SIDEWALK: u16 = 48;
    pub const OTHER_GROUND: u16 = 49;
    pub const BUILDING: u16 = 50;
    pub const LANE_MARKING: u16 = 60;
    pub const VEGETATION: u16 = 70;
    pub const TERRAIN: u16 = 72;

    /// Classes that always count as ground.
    pub const GROUND: [u16; 6] = [LANE_MARKING, ROAD, PARKING, SIDEWALK, OTHER_GROUND, TERRAIN];
}

/// Vegetation below this height (sensor frame, meters) counts as ground.
pub const VEGETATION_GROUND_Z: f64 = -1.3;

/// A single LiDAR return in the sensor frame (Z up, meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Point {
            x,
            y,
            z,
            intensity: 0.0,
        }
    }

    pub const fn with_intensity(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }

    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    /// Horizontal range from the sensor origin.
    #[inline]
    pub fn range_xy(&self) -> f64 {
        let (x, y) = (self.x as f64, self.y as f64);
        (x * x + y * y).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Per-point semantic class id, same length as `points` when present.
    pub labels: Option<Vec<u16>>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            labels: None,
            frame_id: String::new(),
        }
    }

    pub fn with_labels(points: Vec<Point>, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::Malformed(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        Ok(PointCloud {
            points,
            labels: Some(labels),
            frame_id: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-point ground truth derived from semantic labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    pub is_ground: Vec<bool>,
}

impl GroundTruthMask {
    pub fn len(&self) -> usize {
        self.is_ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_ground.is_empty()
    }

    pub fn count_ground(&self) -> usize {
        self.is_ground.iter().filter(|&&g| g).count()
    }
}

/// Whether a single labeled point is ground truth ground.
///
/// Vegetation counts only strictly below [`VEGETATION_GROUND_Z`].
pub fn is_ground_label(label: u16, z: f64) -> bool {
    class::GROUND.contains(&label) || (label == class::VEGETATION && z < VEGETATION_GROUND_Z)
}

pub fn ground_truth_mask(cloud: &PointCloud) -> Result<GroundTruthMask> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| Error::Precondition("cloud has no labels".into()))?;
    if labels.len() != cloud.points.len() {
        return Err(Error::Precondition(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.points.len()
        )));
    }
    let is_ground = labels
        .iter()
        .zip(&cloud.points)
        .map(|(&l, p)| is_ground_label(l, p.z as f64))
        .collect();
    Ok(GroundTruthMask { is_ground })
}
