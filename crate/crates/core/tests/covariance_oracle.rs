//! Modal covariance against the closed-form Kolmogorov result, built from the
//! Weber-Schafheitlin integral of two Bessel functions.

use std::f64::consts::PI;

use farsight_core::turbsim::{noll_covariance, noll_to_nm};
use statrs::function::gamma::gamma;

const KOLMOGOROV: f64 = 0.0228955871;

/// `int_0^inf x^-lam J_mu(x) J_nu(x) dx`
fn weber_schafheitlin(lam: f64, mu: f64, nu: f64) -> f64 {
    gamma(lam) * gamma((mu + nu - lam + 1.0) / 2.0)
        / (2f64.powf(lam)
            * gamma((-mu + nu + lam + 1.0) / 2.0)
            * gamma((mu + nu + lam + 1.0) / 2.0)
            * gamma((mu - nu + lam + 1.0) / 2.0))
}

fn closed_form(j: usize, j2: usize, d_over_r0: f64) -> f64 {
    let (n, m) = noll_to_nm(j).unwrap();
    let (n2, m2) = noll_to_nm(j2).unwrap();
    if m != m2 || (m != 0 && j % 2 != j2 % 2) {
        return 0.0;
    }
    let sign = if ((n + n2 - 2 * m) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    // unit radius, so D = 2 and r0 = 2 / d_over_r0
    let lam = 14.0 / 3.0;
    let integral = (2.0 * PI).powf(lam - 1.0) * weber_schafheitlin(lam, (n + 1) as f64, (n2 + 1) as f64);
    KOLMOGOROV * (d_over_r0 / 2.0).powf(5.0 / 3.0) * (((n + 1) * (n2 + 1)) as f64).sqrt() * sign * 2.0 / PI
        * integral
}

#[test]
fn quadrature_matches_closed_form() {
    let mut worst: f64 = 0.0;
    for j in 2..=36 {
        for j2 in 2..=36 {
            let want = closed_form(j, j2, 1.0);
            let got = noll_covariance(j, j2, 1.0).unwrap();
            if want == 0.0 {
                assert!(got.abs() < 1e-14, "({j},{j2}) should vanish, got {got}");
            } else {
                let rel = (got / want - 1.0).abs();
                worst = worst.max(rel);
                assert!(rel < 1e-8, "({j},{j2}): {got} vs {want}");
            }
        }
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn frozen_values() {
    for (j, j2, v) in [
        (2, 2, 0.4488789736806448),
        (4, 4, 0.023217877948994863),
        (2, 8, -0.014164133989610373),
        (4, 11, -0.0038790078468175357),
        (7, 7, 0.006191434119731348),
        (11, 11, 0.0024539220596496284),
    ] {
        assert!((noll_covariance(j, j2, 1.0).unwrap() - v).abs() < 1e-12 * v.abs().max(1.0));
        assert!((closed_form(j, j2, 1.0) / v - 1.0).abs() < 1e-8);
    }
    let r = noll_covariance(2, 2, 2.0).unwrap() / noll_covariance(2, 2, 1.0).unwrap();
    assert!((r - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);
}
