//! Bessel functions of order zero and the Hankel function `H0^(1)`.
//!
//! Three regimes:
//!
//! * `x <= 2`: ascending power series for `J0` and the companion series for `Y0`.
//! * `2 < x <= 25`: Miller backward recurrence for `J_n`, normalised with
//!   `J0 + 2 sum J_2k = 1`, and the Neumann series
//!   `Y0 = (2/pi)(ln(x/2) + gamma) J0 - (4/pi) sum (-1)^k J_2k / k`.
//! * `x > 25`: Hankel's asymptotic expansion, truncated at the smallest term.

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 2.0;
const ASYMPTOTIC_MIN: f64 = 25.0;

fn series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut j0 = 1.0;
    let mut ysum = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j0 += term;
        ysum -= term * harmonic;
        if term.abs() < 1e-18 {
            break;
        }
    }
    let y0 = FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + ysum);
    (j0, y0)
}

fn miller(x: f64) -> (f64, f64) {
    // start well above x so that J_N(x)^2 is below double precision
    let mut n = (x + 30.0).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let mut j_next = 0.0; // J_{n+1}
    let mut j_cur = 1e-30; // J_n (unnormalised)
    let mut norm = 0.0;
    let mut ysum = 0.0;
    for m in (1..=n).rev() {
        // j_cur holds J_m; produce J_{m-1}
        let j_prev = 2.0 * m as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = m - 1;
        if idx > 0 && idx % 2 == 0 {
            let k = idx / 2;
            norm += 2.0 * j_cur;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            ysum += sign * j_cur / k as f64;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            ysum *= 1e-250;
        }
    }
    norm += j_cur;
    let j0 = j_cur / norm;
    let y0 = FRAC_2_PI * ((0.5 * x).ln() + EULER_GAMMA) * j0 - 2.0 * FRAC_2_PI * ysum / norm;
    (j0, y0)
}

fn asymptotic_h0(x: f64) -> Complex64 {
    // sum_k i^k a_k / x^k with a_k = a_{k-1} * (-(2k-1)^2) / (8k)
    let mut sum = Complex64::new(1.0, 0.0);
    let mut a = 1.0;
    let mut ipow = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        a *= -((2.0 * kf - 1.0).powi(2)) / (8.0 * kf * x);
        ipow *= Complex64::i();
        if a.abs() >= last {
            break;
        }
        last = a.abs();
        sum += ipow * a;
        if a.abs() < 1e-17 {
            break;
        }
    }
    let phase = Complex64::from_polar(1.0, x - 0.25 * PI);
    (2.0 / (PI * x)).sqrt() * phase * sum
}

fn check_arg(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel/Hankel argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// `(J0(x), Y0(x))` for `x > 0`.
pub fn bessel_j0_y0(x: f64) -> Result<(f64, f64)> {
    check_arg(x)?;
    Ok(if x <= SERIES_MAX {
        series(x)
    } else if x <= ASYMPTOTIC_MIN {
        miller(x)
    } else {
        let h = asymptotic_h0(x);
        (h.re, h.im)
    })
}

/// Hankel function of the first kind, `H0^(1)(z) = J0(z) + i Y0(z)`, for `z > 0`.
pub fn hankel_h0_first_kind(z: f64) -> Result<Complex64> {
    let (j0, y0) = bessel_j0_y0(z)?;
    Ok(Complex64::new(j0, y0))
}
