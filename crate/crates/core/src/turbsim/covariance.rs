//! Kolmogorov inter-modal covariance of Zernike coefficients.
//!
//! For modes `j, j'` with orders `(n, m)`, `(n', m')` the covariance is zero
//! unless `m == m'` and, for `m != 0`, both indices have the same parity.
//! Otherwise
//!
//! ```text
//! E[a_j a_j'] = c * (D/(2 r0))^(5/3) * 2/pi * sqrt((n+1)(n'+1)) * (-1)^((n+n'-2m)/2)
//!               * Integral_0^inf k^(-14/3) J_{n+1}(2 pi k) J_{n'+1}(2 pi k) dk
//! ```
//!
//! with `c` the phase power-spectrum constant. The integral is evaluated
//! numerically and cached per radial order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::bessel::bessel_j_upto;
use super::zernike::noll_to_nm;
use super::TurbError;

/// Covariances scale as `(D/r0)^COVARIANCE_EXPONENT`.
pub const COVARIANCE_EXPONENT: f64 = 5.0 / 3.0;

/// Kolmogorov phase PSD constant, `Phi(f) = PSD_CONST * r0^(-5/3) * f^(-11/3)`.
fn psd_const() -> f64 {
    // (24/5 Gamma(6/5))^(5/6) Gamma(11/6)^2 / (2 pi^(11/3))
    const GAMMA_6_5: f64 = 0.918_168_742_399_760_4;
    const GAMMA_11_6: f64 = 0.940_655_858_256_771_9;
    (24.0 / 5.0 * GAMMA_6_5).powf(5.0 / 6.0) * GAMMA_11_6 * GAMMA_11_6
        / (2.0 * PI.powf(11.0 / 3.0))
}

/// Table of `I(a, b) = int k^(-14/3) J_a(2 pi k) J_b(2 pi k) dk` for
/// `2 <= a, b <= max_order + 1`.
struct BesselIntegrals {
    max_order: usize,
    values: Vec<f64>,
}

impl BesselIntegrals {
    fn get(&self, a: usize, b: usize) -> f64 {
        let side = self.max_order;
        self.values[(a - 2) * side + (b - 2)]
    }

    fn compute(max_order: usize) -> Self {
        let side = max_order; // orders 2..=max_order+1
        let top = max_order + 1;
        let mut acc = vec![0.0; side * side];
        let (gl_x, gl_w) = gauss_legendre(12);

        let accumulate = |k: f64, weight: f64, acc: &mut [f64]| {
            let j = bessel_j_upto(top, 2.0 * PI * k);
            let base = weight * k.powf(-14.0 / 3.0);
            for a in 2..=top {
                let ja = base * j[a];
                for b in a..=top {
                    let v = ja * j[b];
                    acc[(a - 2) * side + (b - 2)] += v;
                }
            }
        };

        // k in [0, 1] with k = u^3, which removes the k^(-2/3) endpoint singularity.
        let panels = 64;
        for p in 0..panels {
            let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in gl_x.iter().zip(&gl_w) {
                let u = mid + half * x;
                let k = u * u * u;
                accumulate(k, w * half * 3.0 * u * u, &mut acc);
            }
        }
        // k in [1, K] with panels shorter than the Bessel oscillation period.
        let upper = 160.0;
        let width = 0.25;
        let panels = ((upper - 1.0) / width) as usize;
        for p in 0..panels {
            let lo = 1.0 + p as f64 * width;
            let half = 0.5 * width;
            let mid = lo + half;
            for (x, w) in gl_x.iter().zip(&gl_w) {
                accumulate(mid + half * x, w * half, &mut acc);
            }
        }
        // Asymptotic tail: J_a J_b averages to cos((a-b) pi/2) / (pi x).
        for a in 2..=top {
            for b in a..=top {
                let phase = ((a as f64 - b as f64) * PI / 2.0).cos().round();
                acc[(a - 2) * side + (b - 2)] +=
                    phase / (2.0 * PI * PI) * (3.0 / 14.0) * upper.powf(-14.0 / 3.0);
            }
        }
        for a in 0..side {
            for b in 0..a {
                acc[a * side + b] = acc[b * side + a];
            }
        }
        Self {
            max_order,
            values: acc,
        }
    }
}

fn integrals_for(order: usize) -> Arc<BesselIntegrals> {
    static CACHE: OnceLock<Mutex<Option<Arc<BesselIntegrals>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(None));
    let mut guard = cache.lock().expect("integral cache poisoned");
    if let Some(t) = guard.as_ref() {
        if t.max_order >= order {
            return Arc::clone(t);
        }
    }
    // Round up so a growing request sequence does not recompute each step.
    let order = order.max(8);
    let table = Arc::new(BesselIntegrals::compute(order));
    *guard = Some(Arc::clone(&table));
    table
}

fn unit_covariance(j: usize, j2: usize, table: &BesselIntegrals) -> Result<f64, TurbError> {
    let (n, m) = noll_to_nm(j)?;
    let (n2, m2) = noll_to_nm(j2)?;
    if m != m2 || (m != 0 && j % 2 != j2 % 2) {
        return Ok(0.0);
    }
    let sign = if ((n + n2 - 2 * m) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let pref = psd_const() * 2f64.powf(-COVARIANCE_EXPONENT) * (2.0 / PI)
        * (((n + 1) * (n2 + 1)) as f64).sqrt();
    Ok(sign * pref * table.get(n + 1, n2 + 1))
}

/// `E[a_j a_j2]` in rad^2 for Kolmogorov turbulence of strength `d_over_r0`.
/// Piston (`j = 1`) is excluded.
pub fn noll_covariance(j: usize, j2: usize, d_over_r0: f64) -> Result<f64, TurbError> {
    if j < 2 {
        return Err(TurbError::IndexOutOfRange(j));
    }
    if j2 < 2 {
        return Err(TurbError::IndexOutOfRange(j2));
    }
    let order = noll_to_nm(j)?.0.max(noll_to_nm(j2)?.0);
    let table = integrals_for(order);
    Ok(unit_covariance(j, j2, &table)? * d_over_r0.powf(COVARIANCE_EXPONENT))
}

/// Covariance of `(a_2, ..., a_J)` for `num_zernike = J`.
pub fn covariance_matrix(num_zernike: usize, d_over_r0: f64) -> Result<DMatrix<f64>, TurbError> {
    static UNIT: OnceLock<Mutex<HashMap<usize, Arc<DMatrix<f64>>>>> = OnceLock::new();
    if num_zernike < 2 {
        return Err(TurbError::IndexOutOfRange(num_zernike));
    }
    let unit = {
        let cache = UNIT.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("covariance cache poisoned");
        if let Some(m) = guard.get(&num_zernike) {
            Arc::clone(m)
        } else {
            let order = noll_to_nm(num_zernike)?.0;
            let table = integrals_for(order);
            let size = num_zernike - 1;
            let mut mat = DMatrix::zeros(size, size);
            for r in 0..size {
                for c in r..size {
                    let v = unit_covariance(r + 2, c + 2, &table)?;
                    mat[(r, c)] = v;
                    mat[(c, r)] = v;
                }
            }
            let mat = Arc::new(mat);
            guard.insert(num_zernike, Arc::clone(&mat));
            mat
        }
    };
    Ok(unit.as_ref() * d_over_r0.powf(COVARIANCE_EXPONENT))
}

/// Lower Cholesky factor of the modal covariance, with trace-scaled jitter as
/// the only regularization.
pub(crate) fn modal_factor(num_zernike: usize, d_over_r0: f64) -> Result<DMatrix<f64>, TurbError> {
    let cov = covariance_matrix(num_zernike, d_over_r0)?;
    let sym = (&cov + cov.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.l());
    }
    let jitter = 1e-10 * sym.trace();
    let n = sym.nrows();
    let bumped = sym + DMatrix::identity(n, n) * jitter;
    bumped
        .cholesky()
        .map(|ch| ch.l())
        .ok_or(TurbError::CovarianceNotPsd(n))
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((integral - 2.0 / 23.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(noll_covariance(2, 3, 1.0).unwrap(), 0.0);
        assert_eq!(noll_covariance(2, 3, 7.5).unwrap(), 0.0);
        // different m
        assert_eq!(noll_covariance(4, 5, 1.0).unwrap(), 0.0);
        // same m, opposite parity
        assert_eq!(noll_covariance(2, 7, 1.0).unwrap(), 0.0);
        assert!(noll_covariance(2, 8, 1.0).unwrap() < 0.0);
        assert!(noll_covariance(3, 7, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn piston_is_rejected() {
        assert_eq!(noll_covariance(1, 2, 1.0), Err(TurbError::IndexOutOfRange(1)));
        assert_eq!(noll_covariance(2, 0, 1.0), Err(TurbError::IndexOutOfRange(0)));
    }

    #[test]
    fn scaling_exponent() {
        let r = noll_covariance(2, 2, 2.0).unwrap() / noll_covariance(2, 2, 1.0).unwrap();
        assert!((r - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);
        assert!((r - 3.1748).abs() < 1e-4);
    }

    #[test]
    fn matrix_is_symmetric_and_factorizable() {
        let m = covariance_matrix(36, 1.0).unwrap();
        assert_eq!(m.nrows(), 35);
        for r in 0..35 {
            for c in 0..35 {
                assert!((m[(r, c)] - m[(c, r)]).abs() <= 1e-12);
            }
        }
        assert!(modal_factor(36, 1.0).is_ok());
    }
}
