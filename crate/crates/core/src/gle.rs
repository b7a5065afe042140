//! Ground likelihood of a fitted bin patch.
//!
//! The likelihood is the product of three factors:
//!
//! * uprightness: 1 when the patch normal is within `θ_τ` of vertical, else 0;
//! * elevation: a logistic penalty on patches whose mean height sits above
//!   the range-dependent midpoint `κ(r)`, applied only for `r < L_τ`;
//! * flatness: when the elevation factor is below 0.5, a gain that can
//!   revert steep but very flat patches.
//!
//! A patch is ground when the product exceeds 0.5.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of `κ(r) = −h_s + c1 + c2·exp((r − L_min)/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaParams {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
}

impl Default for KappaParams {
    fn default() -> Self {
        KappaParams {
            c1: 0.2,
            c2: 0.1,
            lambda: 8.0,
        }
    }
}

/// Divisor of the flatness exponent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessScale {
    /// Scale by the zone's own threshold `σ_τ,m`.
    #[default]
    Threshold,
    /// Unscaled exponent `−(σ − σ_τ,m)`.
    Raw,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GleParams {
    /// Uprightness margin, degrees.
    pub theta_tau_deg: f64,
    /// Range limit of the elevation factor; `None` means `L_max,2` of the zone model.
    pub l_tau: Option<f64>,
    /// Surface-variation threshold per zone. Zones past the end have none.
    pub sigma_tau: Vec<f64>,
    pub zeta: f64,
    pub flatness_scale: FlatnessScale,
    pub kappa: KappaParams,
}

impl Default for GleParams {
    fn default() -> Self {
        GleParams {
            theta_tau_deg: 45.0,
            l_tau: None,
            sigma_tau: vec![0.00012, 0.0002],
            zeta: 3.0,
            flatness_scale: FlatnessScale::Threshold,
            kappa: KappaParams::default(),
        }
    }
}

impl GleParams {
    pub fn theta_tau(&self) -> f64 {
        self.theta_tau_deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_tau_deg > 0.0 && self.theta_tau_deg < 90.0) {
            return Err(Error::Validation(format!(
                "gle.theta_tau_deg must be in (0, 90), got {}",
                self.theta_tau_deg
            )));
        }
        if !(self.zeta > 1.0 && self.zeta.is_finite()) {
            return Err(Error::Validation(format!(
                "gle.zeta must be > 1, got {}",
                self.zeta
            )));
        }
        if self.sigma_tau.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Validation(
                "gle.sigma_tau entries must be > 0".into(),
            ));
        }
        if let Some(l) = self.l_tau {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Validation(format!(
                    "gle.l_tau must be >= 0, got {l}"
                )));
            }
        }
        if let FlatnessScale::Value(s) = self.flatness_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Validation(format!(
                    "gle.flatness_scale must be > 0, got {s}"
                )));
            }
        }
        let k = &self.kappa;
        if !(k.c1.is_finite()
            && k.c2 >= 0.0
            && k.c2.is_finite()
            && k.lambda > 0.0
            && k.lambda.is_finite())
        {
            return Err(Error::Validation(
                "gle.kappa needs finite c1, c2 >= 0 and lambda > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Geometry of one bin's final ground estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinFeatures {
    /// Plane normal, sign-canonicalized.
    pub v3: Vector3<f64>,
    pub mean_z: f64,
    /// Horizontal distance from the sensor to the centroid.
    pub r: f64,
    /// Surface variation `λ₃ / (λ₁ + λ₂ + λ₃)`.
    pub sigma: f64,
    /// Zero-based zone index.
    pub zone: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinVerdict {
    pub features: BinFeatures,
    pub phi: f64,
    pub psi: f64,
    pub varphi: f64,
    pub likelihood: f64,
    pub is_ground: bool,
}

/// Which likelihood factors take part; disabled ones are fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factors {
    pub elevation: bool,
    pub flatness: bool,
}

impl Factors {
    pub const ALL: Factors = Factors {
        elevation: true,
        flatness: true,
    };
}

/// 1 iff `v3·ẑ > cos(π/2 − θ_τ)`.
pub fn uprightness(v3: &Vector3<f64>, theta_tau: f64) -> f64 {
    let cos = v3.z / v3.norm();
    if cos > (std::f64::consts::FRAC_PI_2 - theta_tau).cos() {
        1.0
    } else {
        0.0
    }
}

/// GLE parameters resolved against the sensor height and zone model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundLikelihood {
    pub params: GleParams,
    pub sensor_height: f64,
    pub l_min: f64,
    pub l_tau: f64,
    theta_tau: f64,
}

impl GroundLikelihood {
    pub fn new(params: GleParams, sensor_height: f64, l_min: f64, l_tau: f64) -> Self {
        let theta_tau = params.theta_tau();
        GroundLikelihood {
            params,
            sensor_height,
            l_min,
            l_tau,
            theta_tau,
        }
    }

    /// Elevation midpoint at range `r`.
    pub fn kappa(&self, r: f64) -> f64 {
        let k = &self.params.kappa;
        -self.sensor_height + k.c1 + k.c2 * ((r - self.l_min) / k.lambda).exp()
    }

    pub fn elevation(&self, mean_z: f64, r: f64) -> f64 {
        if r < self.l_tau {
            1.0 / (1.0 + (mean_z - self.kappa(r)).exp())
        } else {
            1.0
        }
    }

    /// Flatness factor; zones without a threshold cannot take the `ψ < 0.5`
    /// branch.
    pub fn flatness(&self, psi: f64, sigma: f64, zone: usize) -> Result<f64> {
        if psi >= 0.5 {
            return Ok(1.0);
        }
        let tau = *self.params.sigma_tau.get(zone).ok_or_else(|| {
            Error::Config(format!(
                "zone {} has no gle.sigma_tau entry but its elevation factor fell below 0.5",
                zone + 1
            ))
        })?;
        let scale = match self.params.flatness_scale {
            FlatnessScale::Threshold => tau,
            FlatnessScale::Raw => 1.0,
            FlatnessScale::Value(s) => s,
        };
        Ok(self.params.zeta * (-(sigma - tau) / scale).exp())
    }

    pub fn evaluate(&self, features: &BinFeatures) -> BinVerdict {
        self.evaluate_with(features, Factors::ALL)
    }

    /// Evaluates with some factors forced to 1. A zone without a flatness
    /// threshold gets no flatness rescue.
    pub fn evaluate_with(&self, features: &BinFeatures, factors: Factors) -> BinVerdict {
        let phi = uprightness(&features.v3, self.theta_tau);
        let psi = if factors.elevation {
            self.elevation(features.mean_z, features.r)
        } else {
            1.0
        };
        let varphi = if factors.flatness {
            self.flatness(psi, features.sigma, features.zone)
                .unwrap_or(1.0)
        } else {
            1.0
        };
        let likelihood = phi * psi * varphi;
        BinVerdict {
            features: *features,
            phi,
            psi,
            varphi,
            likelihood,
            is_ground: likelihood > 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    const H: f64 = 1.723;

    fn gle() -> GroundLikelihood {
        GroundLikelihood::new(GleParams::default(), H, 2.7, 22.025)
    }

    fn features(v3: Vector3<f64>, mean_z: f64, r: f64, sigma: f64) -> BinFeatures {
        BinFeatures {
            v3,
            mean_z,
            r,
            sigma,
            zone: 0,
        }
    }

    #[test]
    fn uprightness_cases() {
        let tau = 45f64.to_radians();
        assert_eq!(uprightness(&Vector3::z(), tau), 1.0);
        assert_eq!(uprightness(&Vector3::x(), tau), 0.0);
        assert_eq!(
            uprightness(&Vector3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2), tau),
            0.0
        );
        assert_eq!(
            uprightness(&Vector3::new(0.70, 0.0, 0.71).normalize(), tau),
            1.0
        );
    }

    #[test]
    fn kappa_at_min_range() {
        assert!((gle().kappa(2.7) - (-1.423)).abs() < 1e-12);
    }

    #[test]
    fn kappa_increasing() {
        let g = gle();
        let mut prev = g.kappa(0.0);
        for i in 1..200 {
            let k = g.kappa(i as f64 * 0.5);
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn kappa_flat_without_growth_term() {
        let mut p = GleParams::default();
        p.kappa.c2 = 0.0;
        let g = GroundLikelihood::new(p, H, 2.7, 22.025);
        assert_eq!(g.kappa(3.0), -H + 0.2);
        assert_eq!(g.kappa(70.0), -H + 0.2);
    }

    #[test]
    fn elevation_cases() {
        let g = gle();
        assert_eq!(g.elevation(5.0, 22.025), 1.0);
        assert_eq!(g.elevation(5.0, 40.0), 1.0);
        assert_eq!(g.elevation(g.kappa(10.0), 10.0), 0.5);
        assert!(g.elevation(g.kappa(10.0) - 10.0, 10.0) > 0.999);
    }

    #[test]
    fn flatness_cases() {
        let g = gle();
        assert_eq!(g.flatness(0.7, 0.2, 0).unwrap(), 1.0);
        assert_eq!(g.flatness(0.3, 0.00012, 0).unwrap(), 3.0);
        assert!(matches!(g.flatness(0.3, 0.01, 2), Err(Error::Config(_))));
        assert_eq!(g.flatness(0.7, 0.01, 2).unwrap(), 1.0);
    }

    #[test]
    fn flatness_crossing() {
        // 0.3 · 3 · exp(−(σ − σ_τ)/s) = 0.5  ⇔  σ = σ_τ + s·ln(1.8)
        let g = gle();
        let tau = 0.00012;
        let sigma = tau + tau * 1.8f64.ln();
        assert!((0.3 * g.flatness(0.3, sigma, 0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raw_flatness_is_inert() {
        let p = GleParams {
            flatness_scale: FlatnessScale::Raw,
            ..Default::default()
        };
        let g = GroundLikelihood::new(p, H, 2.7, 22.025);
        assert!((g.flatness(0.3, 0.01, 0).unwrap() - 3.0).abs() < 0.04);
    }

    #[test]
    fn verdicts() {
        let g = gle();
        let flat = g.evaluate(&features(Vector3::z(), -H, 6.0, 0.0001));
        assert!(flat.is_ground);
        let wall = g.evaluate(&features(Vector3::x(), -H, 6.0, 0.0));
        assert!(!wall.is_ground);
        assert_eq!(wall.likelihood, 0.0);

        let roof = g.evaluate(&features(Vector3::z(), g.kappa(8.0) + 2.0, 8.0, 0.01));
        assert!((roof.psi - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-12);
        assert!(roof.varphi < 1e-30);
        assert!(!roof.is_ground);
    }

    #[test]
    fn flatness_revert() {
        let g = gle();
        // ψ = 0.4 ⇔ z̄ = κ + ln(1.5)
        let r = 6.0;
        let v = g.evaluate(&features(Vector3::z(), g.kappa(r) + 1.5f64.ln(), r, 0.0));
        assert!((v.psi - 0.4).abs() < 1e-12);
        assert!(v.is_ground);
    }

    #[test]
    fn exact_half_is_not_ground() {
        let g = gle();
        let v = g.evaluate(&features(Vector3::z(), g.kappa(6.0), 6.0, 0.0));
        assert_eq!(v.likelihood, 0.5);
        assert!(!v.is_ground);
    }

    #[test]
    fn missing_threshold_means_no_rescue() {
        let g = gle();
        let mut f = features(Vector3::z(), g.kappa(21.0) + 1.0, 21.0, 0.0);
        f.zone = 2;
        let v = g.evaluate(&f);
        assert_eq!(v.varphi, 1.0);
        assert!(!v.is_ground);
    }

    #[test]
    fn disabled_factors() {
        let g = gle();
        let f = features(Vector3::z(), 0.0, 8.0, 0.01);
        let u = g.evaluate_with(
            &f,
            Factors {
                elevation: false,
                flatness: false,
            },
        );
        assert!(u.is_ground);
        let ue = g.evaluate_with(
            &f,
            Factors {
                elevation: true,
                flatness: false,
            },
        );
        assert!(!ue.is_ground);
        assert_eq!(ue.varphi, 1.0);
    }
}
