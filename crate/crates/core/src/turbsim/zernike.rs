//! Zernike polynomials, Noll ordering and normalization.

use super::TurbError;

/// Maps a Noll index `j >= 1` to radial order `n` and azimuthal frequency `m`.
pub fn noll_to_nm(j: usize) -> Result<(usize, usize), TurbError> {
    if j < 1 {
        return Err(TurbError::IndexOutOfRange(j));
    }
    let mut n = 0;
    while (n + 1) * (n + 2) / 2 < j {
        n += 1;
    }
    let r = j - n * (n + 1) / 2 - 1;
    let m = if n % 2 == 0 {
        2 * r.div_ceil(2)
    } else {
        2 * (r / 2) + 1
    };
    Ok((n, m))
}

/// Radial polynomial R_n^m(rho), unnormalized.
pub fn zernike_radial(n: usize, m: usize, rho: f64) -> f64 {
    debug_assert!(m <= n && (n - m) % 2 == 0);
    let half_diff = (n - m) / 2;
    let half_sum = (n + m) / 2;
    let mut acc = 0.0;
    for s in 0..=half_diff {
        let coeff = factorial(n - s) / (factorial(s) * factorial(half_sum - s) * factorial(half_diff - s));
        let term = coeff * rho.powi((n - 2 * s) as i32);
        if s % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

/// Noll-normalized Z_j(rho, theta): orthonormal under (1/pi) times the
/// integral over the unit disk.
pub fn zernike_eval(j: usize, rho: f64, theta: f64) -> Result<f64, TurbError> {
    let (n, m) = noll_to_nm(j)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(TurbError::RadialOutOfRange(rho));
    }
    Ok(eval_nm(j, n, m, rho, theta))
}

#[inline]
pub(crate) fn eval_nm(j: usize, n: usize, m: usize, rho: f64, theta: f64) -> f64 {
    let radial = zernike_radial(n, m, rho);
    if m == 0 {
        ((n + 1) as f64).sqrt() * radial
    } else {
        let norm = (2.0 * (n + 1) as f64).sqrt();
        let ang = m as f64 * theta;
        if j % 2 == 0 {
            norm * radial * ang.cos()
        } else {
            norm * radial * ang.sin()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noll_table_first_rows() {
        let expected = [
            (0, 0),
            (1, 1),
            (1, 1),
            (2, 0),
            (2, 2),
            (2, 2),
            (3, 1),
            (3, 1),
            (3, 3),
            (3, 3),
            (4, 0),
            (4, 2),
            (4, 2),
            (4, 4),
            (4, 4),
            (5, 1),
        ];
        for (i, nm) in expected.iter().enumerate() {
            assert_eq!(noll_to_nm(i + 1).unwrap(), *nm, "j = {}", i + 1);
        }
    }

    #[test]
    fn operation_examples() {
        assert_eq!(zernike_eval(1, 0.7, 2.1).unwrap(), 1.0);
        assert!((zernike_eval(4, 0.0, 0.0).unwrap() + 3f64.sqrt()).abs() < 1e-15);
        assert!((zernike_eval(2, 0.5, 0.0).unwrap() - 1.0).abs() < 1e-15);
        // j = 3 is the sine tilt
        assert!((zernike_eval(3, 0.5, std::f64::consts::FRAC_PI_2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(zernike_eval(0, 0.5, 0.0), Err(TurbError::IndexOutOfRange(0)));
        assert_eq!(zernike_eval(3, 1.5, 0.0), Err(TurbError::RadialOutOfRange(1.5)));
        assert!(zernike_eval(3, -0.1, 0.0).is_err());
    }

    #[test]
    fn radial_matches_closed_forms() {
        for &r in &[0.0, 0.3, 0.77, 1.0] {
            let r2: f64 = r * r;
            assert!((zernike_radial(4, 0, r) - (6.0 * r2 * r2 - 6.0 * r2 + 1.0)).abs() < 1e-12);
            assert!((zernike_radial(3, 1, r) - (3.0 * r2 * r - 2.0 * r)).abs() < 1e-12);
            // R_n^m(1) = 1 for every valid pair
            assert!((zernike_radial(6, 2, 1.0) - 1.0).abs() < 1e-12);
        }
    }
}
