//! Tilt-then-blur image degradation.

use rayon::prelude::*;

use super::psf::{psf_from_zernike, Psf};
use super::{TurbError, TurbulenceConfig, ZernikeField};
use crate::model::ImageFrame;

/// Pixels of image shift per radian of tilt coefficient.
///
/// Tilt `a_2 Z_2` tilts the wavefront by `2 lambda a_2 / (pi D)` radians,
/// which is `2 a_2 / pi` in units of lambda/D.
pub fn tilt_to_pixels(config: &TurbulenceConfig) -> f64 {
    2.0 / std::f64::consts::PI * config.focal_plane_scale
}

/// Applies `field` to `image`: a geometric warp driven by `(a_2, a_3)`
/// followed by a spatially varying blur from the remaining modes.
///
/// An all-zero field returns the input unchanged. Anchors whose higher-order
/// coefficients are all zero contribute no blur.
pub fn degrade(
    image: &ImageFrame,
    field: &ZernikeField,
    psf_size: usize,
) -> Result<ImageFrame, TurbError> {
    if field.image_width() != image.width() || field.image_height() != image.height() {
        return Err(TurbError::FieldSizeMismatch {
            field_w: field.image_width(),
            field_h: field.image_height(),
            image_w: image.width(),
            image_h: image.height(),
        });
    }
    if psf_size % 2 == 0 {
        return Err(TurbError::BadPsfSize(psf_size, 0));
    }
    if field.is_zero() {
        return Ok(image.clone());
    }

    let warped = apply_tilt(image, field);

    let psfs: Vec<Psf> = (0..field.anchor_count())
        .into_par_iter()
        .map(|a| {
            let (gx, gy) = (a % field.grid_width(), a / field.grid_width());
            let c = field.coeffs_at(gx, gy);
            if c.iter().skip(2).all(|&v| v == 0.0) {
                Ok(Psf::delta(psf_size))
            } else {
                psf_from_zernike(c, field.config(), psf_size)
            }
        })
        .collect::<Result<_, _>>()?;
    let blurred = if psfs.iter().all(|p| p == &Psf::delta(psf_size)) {
        warped
    } else {
        apply_blur(&warped, image, field, &psfs)
    };

    let data = blurred.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(
        ImageFrame::new(image.width(), image.height(), image.channels(), data, image.frame_index())
            .expect("degradation preserves frame invariants"),
    )
}

fn apply_tilt(image: &ImageFrame, field: &ZernikeField) -> Vec<f64> {
    let (w, h, ch) = (
        image.width() as usize,
        image.height() as usize,
        image.channels() as usize,
    );
    let factor = tilt_to_pixels(field.config());
    let src = image.data();
    let mut out = vec![0.0; w * h * ch];
    out.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let dx = factor * field.interpolate(0, fx, fy);
            let dy = factor * field.interpolate(1, fx, fy);
            let (sx, sy) = (fx - dx, fy - dy);
            for c in 0..ch {
                row[x * ch + c] = bilinear_clamped(src, w, h, ch, c, sx, sy);
            }
        }
    });
    out
}

#[inline]
fn bilinear_clamped(src: &[f64], w: usize, h: usize, ch: usize, c: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| src[(yy * w + xx) * ch + c];
    if tx == 0.0 && ty == 0.0 {
        return at(x0, y0);
    }
    let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
    let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

fn apply_blur(src: &[f64], image: &ImageFrame, field: &ZernikeField, psfs: &[Psf]) -> Vec<f64> {
    let (w, h, ch) = (
        image.width() as usize,
        image.height() as usize,
        image.channels() as usize,
    );
    let mut out = vec![0.0; w * h * ch];
    out.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        let mut acc = vec![0.0; ch];
        for x in 0..w {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (anchor, weight) in field.interp_weights(x as f64, y as f64) {
                if weight == 0.0 {
                    continue;
                }
                let psf = &psfs[anchor];
                let r = psf.radius() as isize;
                for dy in -r..=r {
                    let sy = (y as isize - dy).clamp(0, h as isize - 1) as usize;
                    for dx in -r..=r {
                        let k = psf.at(dx, dy);
                        if k == 0.0 {
                            continue;
                        }
                        let sx = (x as isize - dx).clamp(0, w as isize - 1) as usize;
                        let base = (sy * w + sx) * ch;
                        for c in 0..ch {
                            acc[c] += weight * k * src[base + c];
                        }
                    }
                }
            }
            row[x * ch..(x + 1) * ch].copy_from_slice(&acc);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turbsim::sample_field;

    fn cfg(d: f64) -> TurbulenceConfig {
        TurbulenceConfig {
            num_zernike: 15,
            grid_spacing: 16,
            ..TurbulenceConfig::with_strength(d, 17)
        }
    }

    fn textured(w: u32, h: u32, ch: u32) -> ImageFrame {
        let data = (0..(w * h * ch) as usize)
            .map(|i| 0.5 + 0.4 * ((i as f64) * 0.37).sin())
            .collect();
        ImageFrame::new(w, h, ch, data, 3).unwrap()
    }

    #[test]
    fn zero_field_is_identity() {
        let img = textured(40, 30, 3);
        let field = ZernikeField::uniform(cfg(1.0), 40, 30, &[0.0; 14]).unwrap();
        assert_eq!(degrade(&img, &field, 33).unwrap(), img);
    }

    #[test]
    fn pure_tilt_shifts_a_delta() {
        // a_2 = pi maps to a 2 px shift in +x.
        let mut data = vec![0.0; 21 * 11];
        data[5 * 21 + 8] = 1.0;
        let img = ImageFrame::new(21, 11, 1, data, 0).unwrap();
        let mut per = [0.0; 14];
        per[0] = std::f64::consts::PI;
        let field = ZernikeField::uniform(cfg(1.0), 21, 11, &per).unwrap();
        let out = degrade(&img, &field, 33).unwrap();
        let shift = tilt_to_pixels(field.config()) * per[0];
        assert!((shift - 2.0).abs() < 1e-12);
        assert!((out.get(10, 5, 0) - 1.0).abs() < 1e-9);
        let total: f64 = out.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let img = textured(40, 30, 1);
        let field = ZernikeField::uniform(cfg(1.0), 41, 30, &[0.0; 14]).unwrap();
        assert!(matches!(
            degrade(&img, &field, 33),
            Err(TurbError::FieldSizeMismatch { .. })
        ));
    }

    #[test]
    fn output_is_deterministic_and_in_range() {
        let img = textured(48, 40, 1);
        let field = sample_field(&cfg(3.0), 48, 40).unwrap();
        let a = degrade(&img, &field, 17).unwrap();
        let b = degrade(&img, &field, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, img);
    }
}
