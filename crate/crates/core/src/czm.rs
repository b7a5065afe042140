//! Concentric zone model: a polar grid whose ring and sector resolution
//! changes from zone to zone.
//!
//! Zone `m` covers ranges `[L_min,m, L_max,m)` and is split into
//! `rings × sectors` bins. Ring and sector intervals are half-open and
//! lower-inclusive, sector angles run over `[-π, π)`. The same [`PolarGrid`]
//! type also describes the single-zone uniform grid used as a baseline.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

/// The boundary formulas are only defined for four zones.
pub const NUM_ZONES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneConfig {
    pub num_zones: usize,
    pub rings_per_zone: Vec<usize>,
    pub sectors_per_zone: Vec<usize>,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig {
            num_zones: NUM_ZONES,
            rings_per_zone: vec![2, 4, 4, 4],
            sectors_per_zone: vec![16, 32, 54, 32],
            l_min: 2.7,
            l_max: 80.0,
        }
    }
}

impl ZoneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_zones != NUM_ZONES {
            return Err(Error::Validation(format!(
                "czm.num_zones must be {NUM_ZONES}, got {}",
                self.num_zones
            )));
        }
        if self.rings_per_zone.len() != NUM_ZONES || self.sectors_per_zone.len() != NUM_ZONES {
            return Err(Error::Validation(format!(
                "czm.rings_per_zone and czm.sectors_per_zone need {NUM_ZONES} entries"
            )));
        }
        if self
            .rings_per_zone
            .iter()
            .chain(&self.sectors_per_zone)
            .any(|&c| c == 0)
        {
            return Err(Error::Validation(
                "czm ring and sector counts must be >= 1".into(),
            ));
        }
        if !(self.l_min.is_finite()
            && self.l_max.is_finite()
            && 0.0 < self.l_min
            && self.l_min < self.l_max)
        {
            return Err(Error::Validation(format!(
                "czm needs 0 < l_min < l_max, got l_min={} l_max={}",
                self.l_min, self.l_max
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.rings_per_zone
            .iter()
            .zip(&self.sectors_per_zone)
            .map(|(r, s)| r * s)
            .sum()
    }
}

/// `[L_min, L_min,2, L_min,3, L_min,4, L_max]`.
pub fn zone_boundaries(config: &ZoneConfig) -> Result<[f64; 5]> {
    config.validate()?;
    let (lo, hi) = (config.l_min, config.l_max);
    Ok([
        lo,
        (7.0 * lo + hi) / 8.0,
        (3.0 * lo + hi) / 4.0,
        (lo + hi) / 2.0,
        hi,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSpec {
    pub l_min: f64,
    pub l_max: f64,
    pub n_rings: usize,
    pub n_sectors: usize,
    /// Lower bounds of `ρ − l_min` per ring, plus the upper end.
    ring_bounds: Vec<f64>,
    /// Lower azimuth bounds per sector, plus the upper end.
    sector_bounds: Vec<f64>,
}

impl ZoneSpec {
    pub fn new(l_min: f64, l_max: f64, n_rings: usize, n_sectors: usize) -> Self {
        let delta = l_max - l_min;
        let ring_bounds = (0..=n_rings)
            .map(|k| (k as f64 * delta) / n_rings as f64)
            .collect();
        let sector_bounds = (0..=n_sectors)
            .map(|k| (k as f64 * TAU) / n_sectors as f64 - PI)
            .collect();
        ZoneSpec {
            l_min,
            l_max,
            n_rings,
            n_sectors,
            ring_bounds,
            sector_bounds,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.n_rings * self.n_sectors
    }

    pub fn ring_width(&self) -> f64 {
        (self.l_max - self.l_min) / self.n_rings as f64
    }

    pub fn sector_angle(&self) -> f64 {
        TAU / self.n_sectors as f64
    }
}

/// Zero-based bin coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinCoord {
    pub zone: usize,
    pub ring: usize,
    pub sector: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    zones: Vec<ZoneSpec>,
    zone_offsets: Vec<usize>,
}

impl PolarGrid {
    pub fn concentric(config: &ZoneConfig) -> Result<Self> {
        let b = zone_boundaries(config)?;
        let zones = (0..NUM_ZONES)
            .map(|m| {
                ZoneSpec::new(
                    b[m],
                    b[m + 1],
                    config.rings_per_zone[m],
                    config.sectors_per_zone[m],
                )
            })
            .collect();
        Ok(Self::from_zones(zones))
    }

    /// Single zone over `[0, l_max)` with equal ring width and sector angle.
    pub fn uniform(n_rings: usize, n_sectors: usize, l_max: f64) -> Result<Self> {
        if n_rings == 0 || n_sectors == 0 {
            return Err(Error::Validation("uniform grid counts must be >= 1".into()));
        }
        if !(l_max.is_finite() && l_max > 0.0) {
            return Err(Error::Validation(format!(
                "uniform grid l_max must be > 0, got {l_max}"
            )));
        }
        Ok(Self::from_zones(vec![ZoneSpec::new(
            0.0, l_max, n_rings, n_sectors,
        )]))
    }

    fn from_zones(zones: Vec<ZoneSpec>) -> Self {
        let mut zone_offsets = Vec::with_capacity(zones.len() + 1);
        let mut acc = 0;
        zone_offsets.push(0);
        for z in &zones {
            acc += z.num_bins();
            zone_offsets.push(acc);
        }
        PolarGrid {
            zones,
            zone_offsets,
        }
    }

    pub fn zones(&self) -> &[ZoneSpec] {
        &self.zones
    }

    pub fn num_bins(&self) -> usize {
        *self.zone_offsets.last().unwrap()
    }

    /// Radial boundaries of all zones, ascending.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.zones.iter().map(|z| z.l_min).collect();
        b.push(self.max_range());
        b
    }

    pub fn min_range(&self) -> f64 {
        self.zones[0].l_min
    }

    pub fn max_range(&self) -> f64 {
        self.zones.last().unwrap().l_max
    }

    pub fn bin_id(&self, c: BinCoord) -> usize {
        self.zone_offsets[c.zone] + c.ring * self.zones[c.zone].n_sectors + c.sector
    }

    pub fn coord(&self, id: usize) -> BinCoord {
        let zone = self.zone_offsets.partition_point(|&o| o <= id) - 1;
        let local = id - self.zone_offsets[zone];
        let ns = self.zones[zone].n_sectors;
        BinCoord {
            zone,
            ring: local / ns,
            sector: local % ns,
        }
    }

    /// Locates the bin holding `p`, or `None` outside `[L_min, L_max)`.
    pub fn bin_index(&self, p: &Point) -> Option<BinCoord> {
        let (x, y) = (p.x as f64, p.y as f64);
        self.locate((x * x + y * y).sqrt(), y.atan2(x))
    }

    /// Same as [`bin_index`](Self::bin_index) for precomputed range and azimuth.
    pub fn locate(&self, rho: f64, theta: f64) -> Option<BinCoord> {
        if !(rho >= self.min_range() && rho < self.max_range()) {
            return None;
        }
        let theta = if theta >= PI { -PI } else { theta };
        let zone = self.zones.partition_point(|z| z.l_min <= rho) - 1;
        let z = &self.zones[zone];
        let ring = locate_cell(rho - z.l_min, &z.ring_bounds);
        let sector = locate_cell(theta, &z.sector_bounds);
        Some(BinCoord { zone, ring, sector })
    }
}

/// Index `k` of the half-open cell `[bounds[k], bounds[k+1])` holding `v`.
/// The arithmetic guess is corrected against the exact bounds; values past
/// either end land in the first or last cell.
#[inline]
fn locate_cell(v: f64, bounds: &[f64]) -> usize {
    let n = bounds.len() - 1;
    let guess = (v - bounds[0]) / (bounds[1] - bounds[0]);
    let mut k = if guess >= 0.0 {
        (guess as usize).min(n - 1)
    } else {
        0
    };
    while k > 0 && v < bounds[k] {
        k -= 1;
    }
    while k + 1 < n && v >= bounds[k + 1] {
        k += 1;
    }
    k
}

/// A bin view: its coordinates and the indices of the points it holds.
#[derive(Debug, Clone, Copy)]
pub struct Bin<'a> {
    pub id: usize,
    pub coord: BinCoord,
    pub point_indices: &'a [u32],
}

/// A cloud partitioned into grid bins. Bins hold indices, not copies.
#[derive(Debug, Clone)]
pub struct ZoneModel {
    grid: PolarGrid,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    unbinned: Vec<u32>,
}

impl ZoneModel {
    pub fn build(cloud: &PointCloud, grid: PolarGrid) -> Self {
        assert!(
            cloud.len() <= u32::MAX as usize,
            "cloud too large for u32 indices"
        );
        let n_bins = grid.num_bins();
        let mut ids = Vec::with_capacity(cloud.len());
        let mut counts = vec![0usize; n_bins + 1];
        let mut unbinned = Vec::new();
        for (i, p) in cloud.points.iter().enumerate() {
            match grid.bin_index(p) {
                Some(c) => {
                    let id = grid.bin_id(c);
                    counts[id + 1] += 1;
                    ids.push(id as u32);
                }
                None => {
                    unbinned.push(i as u32);
                    ids.push(u32::MAX);
                }
            }
        }
        for k in 1..=n_bins {
            counts[k] += counts[k - 1];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut indices = vec![0u32; offsets[n_bins]];
        for (i, &id) in ids.iter().enumerate() {
            if id != u32::MAX {
                let slot = &mut cursor[id as usize];
                indices[*slot] = i as u32;
                *slot += 1;
            }
        }
        ZoneModel {
            grid,
            offsets,
            indices,
            unbinned,
        }
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn num_bins(&self) -> usize {
        self.grid.num_bins()
    }

    pub fn bin(&self, id: usize) -> Bin<'_> {
        Bin {
            id,
            coord: self.grid.coord(id),
            point_indices: &self.indices[self.offsets[id]..self.offsets[id + 1]],
        }
    }

    pub fn bins(&self) -> impl ExactSizeIterator<Item = Bin<'_>> + '_ {
        (0..self.num_bins()).map(move |id| self.bin(id))
    }

    /// Points outside `[L_min, L_max)`, ascending.
    pub fn unbinned(&self) -> &[u32] {
        &self.unbinned
    }
}

pub fn build_zone_model(cloud: &PointCloud, config: &ZoneConfig) -> Result<ZoneModel> {
    Ok(ZoneModel::build(cloud, PolarGrid::concentric(config)?))
}

pub fn uniform_polar_model(
    cloud: &PointCloud,
    n_rings: usize,
    n_sectors: usize,
    l_max: f64,
) -> Result<ZoneModel> {
    Ok(ZoneModel::build(
        cloud,
        PolarGrid::uniform(n_rings, n_sectors, l_max)?,
    ))
}
