//! Propagation-free turbulence simulation.
//!
//! Phase over the aperture is expanded in Noll-indexed Zernike modes. The
//! coefficients of each anchor point are drawn from the Kolmogorov inter-modal
//! covariance, and neighbouring anchors are correlated through a spatial
//! kernel. Degradation applies the tilt modes as a geometric warp and the
//! remaining modes as a spatially varying blur.

mod bessel;
mod config;
mod covariance;
mod degrade;
mod field;
mod psf;
mod zernike;

use thiserror::Error;

pub use bessel::bessel_j_upto;
pub use config::TurbulenceConfig;
pub use covariance::{covariance_matrix, noll_covariance, COVARIANCE_EXPONENT};
pub use degrade::{degrade, tilt_to_pixels};
pub use field::{frame_seed, sample_field, SpatialSampler, ZernikeField};
pub use psf::{psf_from_zernike, Psf, PAD_FACTOR, PUPIL_SAMPLES};
pub use zernike::{noll_to_nm, zernike_eval, zernike_radial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurbError {
    #[error("Noll index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("radial coordinate {0} outside [0, 1]")]
    RadialOutOfRange(f64),
    #[error("covariance matrix is not positive semidefinite ({0} modes)")]
    CovarianceNotPsd(usize),
    #[error("non-finite Zernike coefficient at position {0}")]
    NonFiniteCoefficient(usize),
    #[error("PSF size {0} must be odd and at most {1}")]
    BadPsfSize(usize, usize),
    #[error("field was sampled for {field_w}x{field_h} but the image is {image_w}x{image_h}")]
    FieldSizeMismatch {
        field_w: u32,
        field_h: u32,
        image_w: u32,
        image_h: u32,
    },
    #[error("invalid turbulence configuration: {0}")]
    InvalidConfig(String),
}
