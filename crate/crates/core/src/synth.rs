//! Labeled synthetic scenes for testing and demos.
//!
//! A scene is flat ground around the sensor plus optional primitives: an
//! inclined ramp, a vertical wall, an elevated car roof and a patch of
//! below-ground reflection noise. Ground hidden behind the wall or car, or
//! covered by the ramp, is not generated.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{class, Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSpec {
    pub n_points: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Height noise of ground and ramp points, meters.
    pub sigma_z: f64,
}

/// Ramp over `[x_min, x_max] × [y_min, y_max]` rising with `grade` along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub grade: f64,
}

/// Vertical wall around the plane `x = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallSpec {
    pub n_points: usize,
    pub x: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub thickness: f64,
    /// Gap between the ground and the lowest wall point, meters.
    pub base_clearance: f64,
    /// Top of the wall above ground, meters.
    pub height: f64,
}

/// Horizontal rectangle at `height` above ground, occluding what is under and behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoofSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub height: f64,
    pub sigma_z: f64,
}

/// Points below the ground in `[x_min, x_max] × [y_min, y_max] × [z_min, z_max]`
/// (sensor frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReflectionSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub sensor_height: f64,
    pub ground: GroundSpec,
    pub ramp: RampSpec,
    pub wall: WallSpec,
    pub roof: RoofSpec,
    pub reflections: ReflectionSpec,
}

impl Default for GroundSpec {
    fn default() -> Self {
        GroundSpec {
            n_points: 50_000,
            r_min: 2.0,
            r_max: 80.0,
            sigma_z: 0.02,
        }
    }
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec {
            n_points: 0,
            x_min: 15.0,
            x_max: 25.0,
            y_min: -4.0,
            y_max: 4.0,
            grade: 0.1,
        }
    }
}

impl Default for WallSpec {
    fn default() -> Self {
        WallSpec {
            n_points: 0,
            x: 10.0,
            y_min: 4.0,
            y_max: 16.0,
            thickness: 0.1,
            base_clearance: 0.3,
            height: 3.0,
        }
    }
}

impl Default for RoofSpec {
    fn default() -> Self {
        RoofSpec {
            n_points: 0,
            x_min: -13.5,
            x_max: -6.5,
            y_min: -3.0,
            y_max: 3.0,
            height: 1.5,
            sigma_z: 0.05,
        }
    }
}

impl Default for ReflectionSpec {
    fn default() -> Self {
        ReflectionSpec {
            n_points: 0,
            x_min: 3.5,
            x_max: 6.5,
            y_min: -2.5,
            y_max: -0.5,
            z_min: -3.2,
            z_max: -2.2,
        }
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            sensor_height: 1.723,
            ground: GroundSpec::default(),
            ramp: RampSpec::default(),
            wall: WallSpec::default(),
            roof: RoofSpec::default(),
            reflections: ReflectionSpec::default(),
        }
    }
}

impl SceneSpec {
    /// Flat ground only.
    pub fn flat(n_points: usize, sigma_z: f64) -> Self {
        let mut s = SceneSpec::default();
        s.ground.n_points = n_points;
        s.ground.sigma_z = sigma_z;
        s
    }

    /// Ground, ramp, wall and car roof, `n_points` in total.
    pub fn urban(n_points: usize) -> Self {
        let mut s = SceneSpec::default();
        s.ramp.n_points = n_points * 3 / 100;
        s.wall.n_points = n_points * 4 / 100;
        s.roof.n_points = n_points * 3 / 100;
        s.ground.n_points = n_points - s.ramp.n_points - s.wall.n_points - s.roof.n_points;
        s
    }

    /// Flat ground plus a patch of below-ground reflections near the sensor.
    pub fn with_reflections(n_points: usize, n_reflections: usize) -> Self {
        let mut s = SceneSpec::flat(n_points - n_reflections, 0.02);
        s.reflections.n_points = n_reflections;
        s
    }

    pub fn total_points(&self) -> usize {
        self.ground.n_points
            + self.ramp.n_points
            + self.wall.n_points
            + self.roof.n_points
            + self.reflections.n_points
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.sensor_height,
            self.ground.r_min,
            self.ground.r_max,
            self.ground.sigma_z,
            self.ramp.x_min,
            self.ramp.x_max,
            self.ramp.y_min,
            self.ramp.y_max,
            self.ramp.grade,
            self.wall.x,
            self.wall.y_min,
            self.wall.y_max,
            self.wall.thickness,
            self.wall.base_clearance,
            self.wall.height,
            self.roof.x_min,
            self.roof.x_max,
            self.roof.y_min,
            self.roof.y_max,
            self.roof.height,
            self.roof.sigma_z,
            self.reflections.x_min,
            self.reflections.x_max,
            self.reflections.y_min,
            self.reflections.y_max,
            self.reflections.z_min,
            self.reflections.z_max,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("scene values must be finite".into()));
        }
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Validation(format!("scene: {what}")))
            }
        };
        check(self.sensor_height > 0.0, "sensor_height must be > 0")?;
        let g = &self.ground;
        check(
            0.0 <= g.r_min && g.r_min < g.r_max,
            "ground needs 0 <= r_min < r_max",
        )?;
        check(g.sigma_z >= 0.0, "ground.sigma_z must be >= 0")?;
        let r = &self.ramp;
        check(
            r.n_points == 0 || (r.x_min < r.x_max && r.y_min < r.y_max),
            "ramp extent is empty",
        )?;
        let w = &self.wall;
        check(w.n_points == 0 || w.y_min < w.y_max, "wall extent is empty")?;
        check(w.thickness >= 0.0, "wall.thickness must be >= 0")?;
        check(
            w.n_points == 0 || (w.base_clearance >= 0.0 && w.base_clearance < w.height),
            "wall needs 0 <= base_clearance < height",
        )?;
        let c = &self.roof;
        check(
            c.n_points == 0 || (c.x_min < c.x_max && c.y_min < c.y_max),
            "roof extent is empty",
        )?;
        check(c.n_points == 0 || c.height > 0.0, "roof.height must be > 0")?;
        check(c.sigma_z >= 0.0, "roof.sigma_z must be >= 0")?;
        let f = &self.reflections;
        check(
            f.n_points == 0 || (f.x_min < f.x_max && f.y_min < f.y_max && f.z_min <= f.z_max),
            "reflection extent is empty",
        )?;
        check(
            f.n_points == 0 || f.z_max < -self.sensor_height,
            "reflections must lie below the ground (z_max < -sensor_height)",
        )?;
        Ok(())
    }
}

/// Axis-aligned box used for occlusion tests.
#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Aabb {
    /// Whether the segment from the sensor origin to `p` passes through the box.
    fn blocks(&self, p: &Vector3<f64>) -> bool {
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..3 {
            let d = p[k];
            if d.abs() < 1e-12 {
                if 0.0 < self.lo[k] || 0.0 > self.hi[k] {
                    return false;
                }
            } else {
                let (a, b) = (self.lo[k] / d, self.hi[k] / d);
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Generates the labeled scene. Identical spec and seed give identical output.
pub fn synth_scene(spec: &SceneSpec, rng_seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let hs = spec.sensor_height;
    let ground_z = -hs;
    let n_total = spec.total_points();
    let mut points = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);

    let mut occluders = Vec::new();
    let w = &spec.wall;
    if w.n_points > 0 {
        occluders.push(Aabb {
            lo: Vector3::new(
                w.x - w.thickness / 2.0,
                w.y_min,
                ground_z + w.base_clearance,
            ),
            hi: Vector3::new(w.x + w.thickness / 2.0, w.y_max, ground_z + w.height),
        });
    }
    let c = &spec.roof;
    if c.n_points > 0 {
        occluders.push(Aabb {
            lo: Vector3::new(c.x_min, c.y_min, ground_z - 1.0),
            hi: Vector3::new(c.x_max, c.y_max, ground_z + c.height),
        });
    }
    let r = &spec.ramp;
    let under_ramp = |x: f64, y: f64| {
        r.n_points > 0 && x >= r.x_min && x <= r.x_max && y >= r.y_min && y <= r.y_max
    };

    let noise = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::Validation(e.to_string()));
    let ground_noise = noise(spec.ground.sigma_z)?;

    let g = &spec.ground;
    let max_attempts = g.n_points.saturating_mul(200).max(1000);
    let mut attempts = 0usize;
    let mut made = 0usize;
    while made < g.n_points {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Validation(
                "scene: ground is almost entirely occluded, cannot place ground points".into(),
            ));
        }
        let rho = rng.random_range(g.r_min..g.r_max);
        let theta = rng.random_range(-PI..PI);
        let (x, y) = (rho * theta.cos(), rho * theta.sin());
        let z = ground_z + ground_noise.sample(&mut rng);
        let p = Vector3::new(x, y, z);
        if under_ramp(x, y) || occluders.iter().any(|b| b.blocks(&p)) {
            continue;
        }
        points.push(Point::with_intensity(
            x as f32,
            y as f32,
            z as f32,
            rng.random_range(0.2..0.4),
        ));
        labels.push(class::ROAD);
        made += 1;
    }

    for _ in 0..r.n_points {
        let x = rng.random_range(r.x_min..=r.x_max);
        let y = rng.random_range(r.y_min..=r.y_max);
        let z = ground_z + r.grade * (x - r.x_min) + ground_noise.sample(&mut rng);
        points.push(Point::with_intensity(
            x as f32,
            y as f32,
            z as f32,
            rng.random_range(0.2..0.4),
        ));
        labels.push(class::TERRAIN);
    }

    for _ in 0..w.n_points {
        let half = w.thickness / 2.0;
        let x = if half > 0.0 {
            w.x + rng.random_range(-half..=half)
        } else {
            w.x
        };
        let y = rng.random_range(w.y_min..=w.y_max);
        let z = ground_z + rng.random_range(w.base_clearance..=w.height);
        points.push(Point::with_intensity(
            x as f32,
            y as f32,
            z as f32,
            rng.random_range(0.4..0.8),
        ));
        labels.push(class::BUILDING);
    }

    let roof_noise = noise(c.sigma_z)?;
    for _ in 0..c.n_points {
        let x = rng.random_range(c.x_min..=c.x_max);
        let y = rng.random_range(c.y_min..=c.y_max);
        let z = ground_z + c.height + roof_noise.sample(&mut rng);
        points.push(Point::with_intensity(
            x as f32,
            y as f32,
            z as f32,
            rng.random_range(0.5..0.9),
        ));
        labels.push(class::CAR);
    }

    let f = &spec.reflections;
    for _ in 0..f.n_points {
        let x = rng.random_range(f.x_min..=f.x_max);
        let y = rng.random_range(f.y_min..=f.y_max);
        let z = rng.random_range(f.z_min..=f.z_max);
        points.push(Point::with_intensity(
            x as f32,
            y as f32,
            z as f32,
            rng.random_range(0.0..0.1),
        ));
        labels.push(class::OUTLIER);
    }

    let mut cloud = PointCloud::with_labels(points, labels)?;
    cloud.frame_id = format!("synth-{rng_seed}");
    Ok(cloud)
}
