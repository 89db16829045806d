//! Free-space Helmholtz Green's functions, their far-field forms, and the
//! closed-form integrals over the cell that contains the source.

mod bessel;

use num_complex::Complex64;
use std::f64::consts::PI;

pub use bessel::{bessel_j0_y0, hankel_h0_first_kind, EULER_GAMMA};

use crate::error::{invalid, Error, Result};
use crate::numeric::{dist3, dot3, Point};

/// Upper bound on `k h` for the small-cell expansions.
pub const KH_LIMIT: f64 = 0.1;

/// Wavenumber `k > 0` in inverse length units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return invalid(format!("wavenumber must be positive and finite, got {k}"));
        }
        Ok(Self(k))
    }

    /// `k = 2 pi / wavelength`.
    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        Self::new(2.0 * PI / wavelength)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `k^{3/2}` in 2D, `k^2` in 3D: the prefactor of the scattering amplitude.
    pub fn amplitude_prefactor(self, dim: usize) -> f64 {
        if dim == 2 {
            self.0.powf(1.5)
        } else {
            self.0 * self.0
        }
    }
}

/// How to treat `k h >= KH_LIMIT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccuracyMode {
    #[default]
    Strict,
    Lenient,
}

impl AccuracyMode {
    pub fn check(self, k: Wavenumber, h: f64) -> Result<()> {
        let kh = k.value() * h;
        if kh < KH_LIMIT {
            return Ok(());
        }
        match self {
            AccuracyMode::Strict => Err(Error::Accuracy { kh, limit: KH_LIMIT }),
            AccuracyMode::Lenient => {
                log::warn!("k*h = {kh:.4} >= {KH_LIMIT}: singular-cell expansion is inaccurate");
                Ok(())
            }
        }
    }
}

/// 2D singular-cell constant `1/2 (3 + ln 2) - pi/4 - gamma + i pi/2`.
pub fn xi_2d() -> Complex64 {
    Complex64::new(0.5 * (3.0 + 2f64.ln()) - 0.25 * PI - EULER_GAMMA, 0.5 * PI)
}

/// 3D singular-cell constant `ln(26 + 15 sqrt 3) - pi/2`.
pub fn xi_3d() -> f64 {
    (26.0 + 15.0 * 3f64.sqrt()).ln() - 0.5 * PI
}

/// `zeta = h^2 (xi_3 + i k h)`.
pub fn zeta_3d(h: f64, k: Wavenumber) -> Complex64 {
    h * h * Complex64::new(xi_3d(), k.value() * h)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return invalid(format!("dimension must be 2 or 3, got {dim}"));
    }
    Ok(())
}

/// Green's function as a function of the distance `R > 0`.
pub fn greens_radial(dim: usize, distance: f64, k: Wavenumber) -> Result<Complex64> {
    check_dim(dim)?;
    if distance == 0.0 {
        return Err(Error::Singularity);
    }
    if !(distance > 0.0) || !distance.is_finite() {
        return invalid(format!("distance must be positive, got {distance}"));
    }
    let kr = k.value() * distance;
    Ok(if dim == 2 {
        Complex64::new(0.0, 0.25) * hankel_h0_first_kind(kr)?
    } else {
        Complex64::from_polar(1.0, kr) / (4.0 * PI * distance)
    })
}

/// `(i/4) H0^(1)(k|r - r'|)` in 2D, `e^{ik|r-r'|} / (4 pi |r - r'|)` in 3D.
pub fn greens(dim: usize, r: &Point, r_prime: &Point, k: Wavenumber) -> Result<Complex64> {
    greens_radial(dim, dist3(r, r_prime), k)
}

/// Small-argument form of the 2D Green's function,
/// `(1/2pi) ln(1/R) + i/4 - gamma/2pi - (1/2pi) ln(k/2)`.
pub fn greens_2d_near(distance: f64, k: Wavenumber) -> Complex64 {
    let two_pi = 2.0 * PI;
    Complex64::new(
        (1.0 / distance).ln() / two_pi - EULER_GAMMA / two_pi - (0.5 * k.value()).ln() / two_pi,
        0.25,
    )
}

/// Far-zone form of `G(r, r')` for `|r| >> |r'|`.
///
/// In 2D the first-order correction factor `1 + (r_hat . r') / (2|r|)` is
/// applied only when `correction` is set.
pub fn greens_far_field(dim: usize, r: &Point, r_prime: &Point, k: Wavenumber, correction: bool) -> Result<Complex64> {
    check_dim(dim)?;
    let rn = dot3(r, r).sqrt();
    if rn == 0.0 {
        return invalid("far-field point must be away from the origin");
    }
    let r_hat = [r[0] / rn, r[1] / rn, r[2] / rn];
    let kv = k.value();
    let proj = dot3(&r_hat, r_prime);
    let outgoing = Complex64::from_polar(1.0, kv * rn - kv * proj);
    Ok(if dim == 2 {
        let pre = Complex64::from_polar(1.0, 0.25 * PI) / (8.0 * PI * kv).sqrt();
        let corr = if correction { 1.0 + 0.5 * proj / rn } else { 1.0 };
        pre * outgoing / rn.sqrt() * corr
    } else {
        outgoing / (4.0 * PI * rn)
    })
}

/// Integral of `G(r, r_center)` over a cell of side `h` centred on the source:
/// `h^2 (xi_2 - ln(hk/2)) / (2 pi)` in 2D and `h^2 (xi_3 + i k h) / (4 pi)` in 3D.
pub fn cell_green_integral(dim: usize, h: f64, k: Wavenumber) -> Result<Complex64> {
    check_dim(dim)?;
    if !(h > 0.0) {
        return invalid("cell size must be positive");
    }
    Ok(if dim == 2 {
        h * h * (xi_2d() - (0.5 * h * k.value()).ln()) / (2.0 * PI)
    } else {
        zeta_3d(h, k) / (4.0 * PI)
    })
}

/// Amplitude contribution of the cell containing the source.
///
/// Returns `k^p * eta(r~) * e^{-i k r_hat . r~} * cell_green_integral`, with
/// `p = 3/2` in 2D and `p = 2` in 3D, so the value adds directly to the
/// non-singular cell sum.
pub fn singular_cell_integral(
    dim: usize,
    h: f64,
    k: Wavenumber,
    eta_tilde: f64,
    phase_point: &Point,
    detector: &Point,
    mode: AccuracyMode,
) -> Result<Complex64> {
    check_dim(dim)?;
    mode.check(k, h)?;
    if eta_tilde == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let phase = Complex64::from_polar(1.0, -k.value() * dot3(detector, phase_point));
    Ok(k.amplitude_prefactor(dim) * eta_tilde * phase * cell_green_integral(dim, h, k)?)
}
