//! Spatially and modally correlated Zernike coefficient fields.
//!
//! The joint covariance over anchors and modes is the Kronecker product of the
//! modal (Noll) covariance and an exponential spatial kernel
//! `exp(-d / correlation_length)`. Samples are `L_s Z L_m^T` with `Z` white.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::covariance::modal_factor;
use super::{TurbError, TurbulenceConfig};

/// Anchor grids up to this size use a dense Cholesky factor; larger grids
/// fall back to circulant embedding.
const DENSE_LIMIT: usize = 1024;

/// Coefficients `a_2..a_J` at every anchor of a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZernikeField {
    grid_width: usize,
    grid_height: usize,
    image_width: u32,
    image_height: u32,
    modes: usize,
    coeffs: Vec<f64>,
    config: TurbulenceConfig,
}

impl ZernikeField {
    /// Builds a field from explicit coefficients laid out anchor-major
    /// (`coeffs[(gy * grid_width + gx) * modes + i]`).
    pub fn from_coeffs(
        config: TurbulenceConfig,
        image_width: u32,
        image_height: u32,
        coeffs: Vec<f64>,
    ) -> Result<Self, TurbError> {
        config.validate()?;
        let (gw, gh) = grid_dims(&config, image_width, image_height)?;
        let modes = config.num_zernike - 1;
        if coeffs.len() != gw * gh * modes {
            return Err(TurbError::InvalidConfig(format!(
                "expected {} coefficients for a {gw}x{gh} grid, got {}",
                gw * gh * modes,
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(TurbError::NonFiniteCoefficient(i));
        }
        Ok(Self {
            grid_width: gw,
            grid_height: gh,
            image_width,
            image_height,
            modes,
            coeffs,
            config,
        })
    }

    /// The same coefficient vector at every anchor.
    pub fn uniform(
        config: TurbulenceConfig,
        image_width: u32,
        image_height: u32,
        per_anchor: &[f64],
    ) -> Result<Self, TurbError> {
        let (gw, gh) = grid_dims(&config, image_width, image_height)?;
        let modes = config.num_zernike.saturating_sub(1);
        if per_anchor.len() != modes {
            return Err(TurbError::InvalidConfig(format!(
                "expected {modes} coefficients per anchor, got {}",
                per_anchor.len()
            )));
        }
        let coeffs = per_anchor
            .iter()
            .copied()
            .cycle()
            .take(gw * gh * modes)
            .collect();
        Self::from_coeffs(config, image_width, image_height, coeffs)
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    /// Number of stored modes (`num_zernike - 1`).
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn config(&self) -> &TurbulenceConfig {
        &self.config
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn anchor_count(&self) -> usize {
        self.grid_width * self.grid_height
    }

    /// `a_2..a_J` at anchor `(gx, gy)`.
    pub fn coeffs_at(&self, gx: usize, gy: usize) -> &[f64] {
        let start = (gy * self.grid_width + gx) * self.modes;
        &self.coeffs[start..start + self.modes]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Pixel position of anchor `(gx, gy)`: the center of its grid cell.
    pub fn anchor_position(&self, gx: usize, gy: usize) -> (f64, f64) {
        let s = self.config.grid_spacing as f64;
        ((gx as f64 + 0.5) * s - 0.5, (gy as f64 + 0.5) * s - 0.5)
    }

    /// Bilinear weights of the (up to) four anchors surrounding pixel `(x, y)`,
    /// as `(anchor_index, weight)`. Outside the anchor hull the nearest edge is
    /// used.
    pub fn interp_weights(&self, x: f64, y: f64) -> [(usize, f64); 4] {
        let s = self.config.grid_spacing as f64;
        let (ix0, ix1, tx) = axis_weights((x + 0.5) / s - 0.5, self.grid_width);
        let (iy0, iy1, ty) = axis_weights((y + 0.5) / s - 0.5, self.grid_height);
        let gw = self.grid_width;
        [
            (iy0 * gw + ix0, (1.0 - tx) * (1.0 - ty)),
            (iy0 * gw + ix1, tx * (1.0 - ty)),
            (iy1 * gw + ix0, (1.0 - tx) * ty),
            (iy1 * gw + ix1, tx * ty),
        ]
    }

    /// Bilinearly interpolated coefficient `mode` (0 for `a_2`) at a pixel.
    pub fn interpolate(&self, mode: usize, x: f64, y: f64) -> f64 {
        self.interp_weights(x, y)
            .iter()
            .map(|&(a, w)| w * self.coeffs[a * self.modes + mode])
            .sum()
    }
}

fn axis_weights(f: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 || f <= 0.0 {
        return (0, 0, 0.0);
    }
    let max = (n - 1) as f64;
    if f >= max {
        return (n - 1, n - 1, 0.0);
    }
    let i0 = f.floor() as usize;
    (i0, i0 + 1, f - i0 as f64)
}

fn grid_dims(cfg: &TurbulenceConfig, w: u32, h: u32) -> Result<(usize, usize), TurbError> {
    if w == 0 || h == 0 {
        return Err(TurbError::InvalidConfig(format!(
            "image dimensions must be positive, got {w}x{h}"
        )));
    }
    if cfg.grid_spacing == 0 {
        return Err(TurbError::InvalidConfig("grid_spacing must be at least 1".into()));
    }
    Ok((
        w.div_ceil(cfg.grid_spacing) as usize,
        h.div_ceil(cfg.grid_spacing) as usize,
    ))
}

/// Draws stationary Gaussian fields with unit variance and exponential
/// correlation on an anchor grid.
#[derive(Debug)]
pub enum SpatialSampler {
    Dense {
        lower: DMatrix<f64>,
    },
    Circulant {
        grid_width: usize,
        grid_height: usize,
        torus_width: usize,
        torus_height: usize,
        /// `sqrt(max(eigenvalue, 0) / N)` per torus frequency.
        scale: Vec<f64>,
    },
}

impl SpatialSampler {
    /// `spacing` and `correlation_length` are in pixels.
    pub fn new(grid_width: usize, grid_height: usize, spacing: f64, correlation_length: f64) -> Self {
        let n = grid_width * grid_height;
        let rho = |dx: f64, dy: f64| (-(dx.hypot(dy)) * spacing / correlation_length).exp();
        if n <= DENSE_LIMIT {
            let cov = DMatrix::from_fn(n, n, |a, b| {
                let (ax, ay) = ((a % grid_width) as f64, (a / grid_width) as f64);
                let (bx, by) = ((b % grid_width) as f64, (b / grid_width) as f64);
                rho(ax - bx, ay - by)
            });
            // The exponential kernel is strictly positive definite.
            let lower = cov
                .clone()
                .cholesky()
                .or_else(|| (cov + DMatrix::identity(n, n) * (1e-10 * n as f64)).cholesky())
                .expect("exponential kernel is positive definite")
                .l();
            return SpatialSampler::Dense { lower };
        }
        let pad = (6.0 * correlation_length / spacing).ceil() as usize;
        let torus_width = (2 * grid_width).max(grid_width + pad);
        let torus_height = (2 * grid_height).max(grid_height + pad);
        let total = torus_width * torus_height;
        let mut kernel: Vec<Complex64> = (0..total)
            .map(|i| {
                let (x, y) = (i % torus_width, i / torus_width);
                let dx = x.min(torus_width - x) as f64;
                let dy = y.min(torus_height - y) as f64;
                Complex64::new(rho(dx, dy), 0.0)
            })
            .collect();
        fft2(&mut kernel, torus_width, torus_height);
        let scale = kernel
            .iter()
            .map(|c| (c.re.max(0.0) / total as f64).sqrt())
            .collect();
        SpatialSampler::Circulant {
            grid_width,
            grid_height,
            torus_width,
            torus_height,
            scale,
        }
    }

    /// Shared sampler for a grid geometry.
    pub fn cached(
        grid_width: usize,
        grid_height: usize,
        spacing: f64,
        correlation_length: f64,
    ) -> Arc<SpatialSampler> {
        type Key = (usize, usize, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<SpatialSampler>>>> = OnceLock::new();
        let key = (
            grid_width,
            grid_height,
            spacing.to_bits(),
            correlation_length.to_bits(),
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().expect("sampler cache poisoned").get(&key) {
            return Arc::clone(s);
        }
        let sampler = Arc::new(Self::new(grid_width, grid_height, spacing, correlation_length));
        cache
            .lock()
            .expect("sampler cache poisoned")
            .entry(key)
            .or_insert(sampler)
            .clone()
    }

    /// `count` independent fields, each of length `grid_width * grid_height`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
        match self {
            SpatialSampler::Dense { lower } => {
                let n = lower.nrows();
                (0..count)
                    .map(|_| {
                        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                        (0..n)
                            .map(|r| (0..=r).map(|c| lower[(r, c)] * z[c]).sum())
                            .collect()
                    })
                    .collect()
            }
            SpatialSampler::Circulant {
                grid_width,
                grid_height,
                torus_width,
                torus_height,
                scale,
            } => {
                let mut out = Vec::with_capacity(count);
                while out.len() < count {
                    let mut buf: Vec<Complex64> = scale
                        .iter()
                        .map(|&s| {
                            let re: f64 = StandardNormal.sample(rng);
                            let im: f64 = StandardNormal.sample(rng);
                            Complex64::new(s * re, s * im)
                        })
                        .collect();
                    fft2(&mut buf, *torus_width, *torus_height);
                    let crop = |f: fn(&Complex64) -> f64| -> Vec<f64> {
                        (0..grid_width * grid_height)
                            .map(|i| f(&buf[(i / grid_width) * torus_width + i % grid_width]))
                            .collect()
                    };
                    out.push(crop(|c| c.re));
                    if out.len() < count {
                        out.push(crop(|c| c.im));
                    }
                }
                out
            }
        }
    }
}

/// In-place unnormalized forward 2-D FFT of a row-major `width x height` buffer.
pub(crate) fn fft2(buf: &mut [Complex64], width: usize, height: usize) {
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(width);
    row.process(buf);
    let col = planner.plan_fft_forward(height);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = buf[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            buf[y * width + x] = column[y];
        }
    }
}

/// Samples a coefficient field for a `width x height` image.
///
/// Output depends only on `(config, width, height)`; `config.rng_seed` seeds a
/// ChaCha8 stream.
pub fn sample_field(
    config: &TurbulenceConfig,
    width: u32,
    height: u32,
) -> Result<ZernikeField, TurbError> {
    config.validate()?;
    let (gw, gh) = grid_dims(config, width, height)?;
    let modes = config.num_zernike - 1;
    let modal = modal_factor(config.num_zernike, config.effective_d_over_r0())?;
    let spatial = SpatialSampler::cached(
        gw,
        gh,
        config.grid_spacing as f64,
        config.correlation_length,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let white = spatial.draw(&mut rng, modes);
    let anchors = gw * gh;
    let mut coeffs = vec![0.0; anchors * modes];
    for p in 0..anchors {
        for i in 0..modes {
            let mut acc = 0.0;
            for (r, field) in white.iter().enumerate().take(i + 1) {
                acc += modal[(i, r)] * field[p];
            }
            coeffs[p * modes + i] = acc;
        }
    }
    Ok(ZernikeField {
        grid_width: gw,
        grid_height: gh,
        image_width: width,
        image_height: height,
        modes,
        coeffs,
        config: config.clone(),
    })
}

/// Derives a per-frame seed so consecutive frames see independent turbulence.
pub fn frame_seed(seed: u64, frame_index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: f64, seed: u64) -> TurbulenceConfig {
        TurbulenceConfig {
            num_zernike: 15,
            ..TurbulenceConfig::with_strength(d, seed)
        }
    }

    #[test]
    fn grid_shape_and_determinism() {
        let c = cfg(2.0, 9);
        let a = sample_field(&c, 100, 65).unwrap();
        assert_eq!((a.grid_width(), a.grid_height()), (4, 3));
        assert_eq!(a.coeffs_at(0, 0).len(), 14);
        let b = sample_field(&c, 100, 65).unwrap();
        assert_eq!(a, b);
        let other = sample_field(&cfg(2.0, 10), 100, 65).unwrap();
        assert_ne!(a.coeffs(), other.coeffs());
    }

    #[test]
    fn vanishing_strength_gives_vanishing_field() {
        let f = sample_field(&cfg(1e-12, 3), 64, 64).unwrap();
        assert!(f.coeffs().iter().all(|c| c.abs() < 1e-8));
    }

    #[test]
    fn zero_sized_image_is_rejected() {
        assert!(sample_field(&cfg(1.0, 0), 0, 10).is_err());
    }

    #[test]
    fn interpolation_reproduces_anchor_values_and_clamps() {
        let c = cfg(2.0, 4);
        let f = sample_field(&c, 96, 64).unwrap();
        let (x, y) = f.anchor_position(1, 1);
        assert!((f.interpolate(0, x, y) - f.coeffs_at(1, 1)[0]).abs() < 1e-12);
        // far outside: nearest corner
        assert!((f.interpolate(1, -50.0, -50.0) - f.coeffs_at(0, 0)[1]).abs() < 1e-12);
        let w: f64 = f.interp_weights(40.3, 17.9).iter().map(|p| p.1).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circulant_sampler_has_unit_variance_and_kernel_correlation() {
        let s = SpatialSampler::new(40, 30, 32.0, 32.0);
        assert!(matches!(s, SpatialSampler::Circulant { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fields = s.draw(&mut rng, 400);
        let (mut var, mut lag1) = (0.0, 0.0);
        let mut count = 0.0;
        for f in &fields {
            for y in 0..30 {
                for x in 0..39 {
                    let a = f[y * 40 + x];
                    var += a * a;
                    lag1 += a * f[y * 40 + x + 1];
                    count += 1.0;
                }
            }
        }
        let (var, lag1) = (var / count, lag1 / count);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        assert!((lag1 - (-1.0f64).exp()).abs() < 0.05, "lag-1 correlation {lag1}");
    }

    #[test]
    fn frame_seeds_differ() {
        assert_ne!(frame_seed(1, 0), frame_seed(1, 1));
        assert_eq!(frame_seed(5, 9), frame_seed(5, 9));
    }
}
