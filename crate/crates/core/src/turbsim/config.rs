use serde::{Deserialize, Serialize};

use super::TurbError;

/// Optical and atmospheric parameters of one simulated capture.
///
/// Turbulence strength is `d_over_r0` when given, otherwise it is derived
/// from the path parameters through the plane-wave Fried parameter
/// `r0 = (0.423 k^2 Cn^2 L)^(-3/5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbulenceConfig {
    /// Refractive-index structure parameter, m^(-2/3).
    pub cn2: f64,
    /// Propagation distance, m.
    pub path_length: f64,
    /// Wavelength, m.
    pub wavelength: f64,
    /// Aperture diameter, m.
    pub aperture_diameter: f64,
    /// Explicit D/r0; overrides the value derived from `cn2`.
    pub d_over_r0: Option<f64>,
    /// Number of Noll modes including piston.
    pub num_zernike: usize,
    /// Pixels between coefficient-field anchors.
    pub grid_spacing: u32,
    /// Spatial correlation length of the coefficient field, pixels.
    pub correlation_length: f64,
    /// Image pixels per lambda/D in the focal plane.
    pub focal_plane_scale: f64,
    pub rng_seed: u64,
}

impl Default for TurbulenceConfig {
    fn default() -> Self {
        Self {
            cn2: 1e-15,
            path_length: 1000.0,
            wavelength: 525e-9,
            aperture_diameter: 0.2,
            d_over_r0: None,
            num_zernike: 36,
            grid_spacing: 32,
            correlation_length: 32.0,
            focal_plane_scale: 1.0,
            rng_seed: 0,
        }
    }
}

impl TurbulenceConfig {
    /// Config with an explicit turbulence strength and defaults elsewhere.
    pub fn with_strength(d_over_r0: f64, seed: u64) -> Self {
        Self {
            d_over_r0: Some(d_over_r0),
            rng_seed: seed,
            ..Self::default()
        }
    }

    /// Plane-wave Fried parameter in meters.
    pub fn fried_parameter(&self) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.wavelength;
        (0.423 * k * k * self.cn2 * self.path_length).powf(-3.0 / 5.0)
    }

    pub fn effective_d_over_r0(&self) -> f64 {
        self.d_over_r0
            .unwrap_or_else(|| self.aperture_diameter / self.fried_parameter())
    }

    pub fn validate(&self) -> Result<(), TurbError> {
        let bad = |what: &str| Err(TurbError::InvalidConfig(what.to_string()));
        let positive = [
            ("cn2", self.cn2),
            ("path_length", self.path_length),
            ("wavelength", self.wavelength),
            ("aperture_diameter", self.aperture_diameter),
            ("correlation_length", self.correlation_length),
            ("focal_plane_scale", self.focal_plane_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(d) = self.d_over_r0 {
            if !(d.is_finite() && d > 0.0) {
                return bad(&format!("d_over_r0 must be positive, got {d}"));
            }
        }
        if self.num_zernike < 3 {
            return bad("num_zernike must be at least 3");
        }
        if self.grid_spacing == 0 {
            return bad("grid_spacing must be at least 1");
        }
        Ok(())
    }
}
