//! Point spread functions from aberrated pupil phase.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;

use super::field::fft2;
use super::zernike::{eval_nm, noll_to_nm};
use super::{TurbError, TurbulenceConfig};

/// Pupil samples across the aperture diameter.
pub const PUPIL_SAMPLES: usize = 128;
/// Zero-padding factor applied before the Fourier transform.
pub const PAD_FACTOR: usize = 4;

const FFT_SIZE: usize = PUPIL_SAMPLES * PAD_FACTOR;

/// Normalized, nonnegative, odd-sized convolution kernel in image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    kernel: Vec<f64>,
}

impl Psf {
    pub fn delta(size: usize) -> Self {
        let mut kernel = vec![0.0; size * size];
        kernel[(size / 2) * size + size / 2] = 1.0;
        Self { size, kernel }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Value at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.kernel[((dy + r) * self.size as isize + dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.kernel.iter().sum()
    }

    /// Intensity-weighted mean offset from the center, `(x, y)`.
    pub fn centroid(&self) -> (f64, f64) {
        let r = self.radius() as isize;
        let (mut cx, mut cy, mut total) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let v = self.at(dx, dy);
                cx += v * dx as f64;
                cy += v * dy as f64;
                total += v;
            }
        }
        (cx / total, cy / total)
    }

    /// Second central moment `E[|x - centroid|^2]`.
    pub fn second_moment(&self) -> f64 {
        let (cx, cy) = self.centroid();
        let r = self.radius() as isize;
        let mut m = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (ex, ey) = (dx as f64 - cx, dy as f64 - cy);
                m += self.at(dx, dy) * (ex * ex + ey * ey);
            }
        }
        m / self.sum()
    }
}

/// Zernike basis sampled at the pupil points inside the unit disk.
struct PupilBasis {
    points: Vec<usize>,
    /// `values[mode * points.len() + p]` for modes `j = 2..=num_zernike`.
    values: Vec<f64>,
}

fn pupil_basis(num_zernike: usize) -> Arc<PupilBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PupilBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("pupil cache poisoned");
    guard
        .entry(num_zernike)
        .or_insert_with(|| {
            let m = PUPIL_SAMPLES;
            let half = m as f64 / 2.0;
            let center = (m as f64 - 1.0) / 2.0;
            let mut points = Vec::new();
            let mut polar = Vec::new();
            for r in 0..m {
                for c in 0..m {
                    let x = (c as f64 - center) / half;
                    let y = (r as f64 - center) / half;
                    let rho = x.hypot(y);
                    if rho <= 1.0 {
                        points.push(r * FFT_SIZE + c);
                        polar.push((rho, y.atan2(x)));
                    }
                }
            }
            let mut values = Vec::with_capacity((num_zernike - 1) * points.len());
            for j in 2..=num_zernike {
                let (n, mm) = noll_to_nm(j).expect("j >= 1");
                values.extend(polar.iter().map(|&(rho, th)| eval_nm(j, n, mm, rho, th)));
            }
            Arc::new(PupilBasis { points, values })
        })
        .clone()
}

/// PSF for the higher-order modes of `coeffs = (a_2, ..., a_J)`.
///
/// Tilt (`a_2`, `a_3`) is ignored: it is applied geometrically by
/// [`super::degrade`].
pub fn psf_from_zernike(
    coeffs: &[f64],
    config: &TurbulenceConfig,
    psf_size: usize,
) -> Result<Psf, TurbError> {
    pupil_psf(coeffs, config.focal_plane_scale, psf_size, false)
}

pub(crate) fn pupil_psf(
    coeffs: &[f64],
    focal_plane_scale: f64,
    psf_size: usize,
    include_tilt: bool,
) -> Result<Psf, TurbError> {
    if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(TurbError::NonFiniteCoefficient(i));
    }
    let samples_per_px = PAD_FACTOR as f64 / focal_plane_scale;
    let max_size = 2 * ((FFT_SIZE as f64 / 2.0 - 1.0) / samples_per_px - 0.5).floor() as usize + 1;
    if psf_size % 2 == 0 || psf_size == 0 || psf_size > max_size {
        return Err(TurbError::BadPsfSize(psf_size, max_size));
    }

    let basis = pupil_basis(coeffs.len() + 1);
    let npts = basis.points.len();
    let mut phase = vec![0.0; npts];
    let first = if include_tilt { 0 } else { 2 };
    for (mode, &a) in coeffs.iter().enumerate().skip(first) {
        if a == 0.0 {
            continue;
        }
        let z = &basis.values[mode * npts..(mode + 1) * npts];
        for (p, zv) in phase.iter_mut().zip(z) {
            *p += a * zv;
        }
    }

    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE * FFT_SIZE];
    for (&idx, &ph) in basis.points.iter().zip(&phase) {
        buf[idx] = Complex64::from_polar(1.0, ph);
    }
    fft2(&mut buf, FFT_SIZE, FFT_SIZE);
    let intensity: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();

    // Integrate the finely sampled intensity over each image pixel.
    let r = (psf_size / 2) as isize;
    let taps: Vec<Vec<(usize, f64)>> = (-r..=r)
        .map(|u| pixel_taps(u as f64 * samples_per_px, samples_per_px))
        .collect();
    let mut kernel = vec![0.0; psf_size * psf_size];
    for (row, ty) in taps.iter().enumerate() {
        for (col, tx) in taps.iter().enumerate() {
            let mut acc = 0.0;
            for &(fy, wy) in ty {
                let line = &intensity[fy * FFT_SIZE..(fy + 1) * FFT_SIZE];
                for &(fx, wx) in tx {
                    acc += wy * wx * line[fx];
                }
            }
            kernel[row * psf_size + col] = acc;
        }
    }
    let total: f64 = kernel.iter().sum();
    for v in kernel.iter_mut() {
        *v /= total;
    }
    Ok(Psf {
        size: psf_size,
        kernel,
    })
}

/// FFT bins (wrapped to `[0, FFT_SIZE)`) overlapping a pixel of `width` bins
/// centered at `center`, with fractional overlap weights.
fn pixel_taps(center: f64, width: f64) -> Vec<(usize, f64)> {
    let (lo, hi) = (center - width / 2.0, center + width / 2.0);
    let first = (lo - 0.5).ceil() as isize;
    let last = (hi + 0.5).floor() as isize;
    (first..=last)
        .filter_map(|a| {
            let w = (a as f64 + 0.5).min(hi) - (a as f64 - 0.5).max(lo);
            (w > 0.0).then(|| (a.rem_euclid(FFT_SIZE as isize) as usize, w))
        })
        .collect()
}
