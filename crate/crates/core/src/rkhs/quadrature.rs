//! Quasi-Monte Carlo nodes for the Sobolev spectral integral.
//!
//! The frequency ball `|u| <= U` is sampled in polar form: the radius by the
//! inverse CDF of a piecewise-linear radial density shaped like the spectral
//! decay, the direction by an area-preserving map of the unit cube onto the
//! sphere. Uniforms come from the `R_d` additive recurrence with a seeded
//! Cranley–Patterson shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Quadrature settings for the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Number of QMC points.
    pub points: usize,
    /// Radius of the frequency ball.
    pub truncation: f64,
    /// Seed of the random shift.
    pub seed: u64,
    /// Nodes of the tabulated radial CDF.
    pub radial_nodes: usize,
}

impl QuadratureConfig {
    /// Name recorded in manifests.
    pub const SCHEME: &'static str = "rd-polar-qmc";

    pub fn default_for(d_in: usize) -> Self {
        Self {
            points: if d_in == 4 { 65_536 } else { 200_000 },
            truncation: 8.0,
            seed: 0x5eed,
            radial_nodes: 20_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return invalid("quadrature needs at least one point");
        }
        if !(self.truncation > 0.0) || !self.truncation.is_finite() {
            return invalid("truncation radius must be positive");
        }
        if self.radial_nodes < 2 {
            return invalid("radial table needs at least two nodes");
        }
        Ok(())
    }
}

/// Sum of all complete homogeneous polynomials of degree `0..=s` in
/// `w_j = (2 pi u_j)^2`, i.e. `1 + sum_{0<|alpha|<=s} prod (2 pi u_j)^{2 alpha_j}`.
pub fn spectral_denominator(u: &[f64], s: usize) -> f64 {
    let mut h = vec![0.0; s + 1];
    h[0] = 1.0;
    for &uj in u {
        let w = (2.0 * PI * uj).powi(2);
        for m in 1..=s {
            h[m] += w * h[m - 1];
        }
    }
    h.iter().sum()
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        4 => 2.0 * PI * PI,
        6 => PI * PI * PI,
        _ => {
            // 2 pi^{d/2} / Gamma(d/2) for the general case
            let half = d as f64 / 2.0;
            let mut gamma = if d.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
            let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
            while x < half {
                gamma *= x;
                x += 1.0;
            }
            2.0 * PI.powf(half) / gamma
        }
    }
}

/// Generalised golden ratio: the positive root of `x^{d+1} = x + 1`.
fn harmonious(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..200 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

struct RadialTable {
    r: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialTable {
    fn new(d: usize, s: usize, truncation: f64, nodes: usize) -> Self {
        let r: Vec<f64> = (0..=nodes).map(|i| truncation * i as f64 / nodes as f64).collect();
        let dens: Vec<f64> = r
            .iter()
            .map(|&x| {
                let t = (2.0 * PI * x).powi(2);
                x.powi(d as i32 - 1) * (1.0 + t) / (1.0 + t.powi(s as i32))
            })
            .collect();
        let mut cdf = vec![0.0; r.len()];
        for i in 1..r.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (r[i] - r[i - 1]);
        }
        let total = cdf[cdf.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { r, cdf }
    }

    /// Radius for uniform `v` and the exact `dr/dv` of the piecewise-linear map.
    fn invert(&self, v: f64) -> (f64, f64) {
        let n = self.cdf.len();
        let idx = match self.cdf.partition_point(|&c| c <= v) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let (c0, c1) = (self.cdf[idx], self.cdf[idx + 1]);
        let (r0, r1) = (self.r[idx], self.r[idx + 1]);
        let jac = (r1 - r0) / (c1 - c0);
        (r0 + (v - c0) * jac, jac)
    }
}

/// Map of `d - 1` uniforms to a point on the unit sphere in `R^d` (d even),
/// viewing `R^d` as `C^{d/2}`: squared moduli uniform on the simplex, phases
/// uniform.
fn sphere_point(v: &[f64], out: &mut [f64]) {
    let m = out.len() / 2;
    let mut moduli = [0.0f64; 3];
    match m {
        2 => {
            moduli[0] = v[0];
            moduli[1] = 1.0 - v[0];
        }
        3 => {
            let a = v[0].sqrt();
            moduli[0] = 1.0 - a;
            moduli[1] = a * (1.0 - v[1]);
            moduli[2] = a * v[1];
        }
        _ => unreachable!("sphere map is defined for R^4 and R^6"),
    }
    for j in 0..m {
        let rho = moduli[j].max(0.0).sqrt();
        let phi = 2.0 * PI * v[m - 1 + j];
        out[2 * j] = rho * phi.cos();
        out[2 * j + 1] = rho * phi.sin();
    }
}

/// Frequency nodes (flattened, stride `d`) and weights such that
/// `sum_q w_q g(u_q)` approximates `int_{|u|<=U} g(u) / D(u) du`.
pub(crate) fn build_nodes(d: usize, s: usize, cfg: &QuadratureConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if d != 4 && d != 6 {
        return invalid(format!("kernel input dimension must be 4 or 6, got {d}"));
    }
    let table = RadialTable::new(d, s, cfg.truncation, cfg.radial_nodes);
    let phi = harmonious(d);
    let alpha: Vec<f64> = (1..=d).map(|j| phi.powi(-(j as i32))).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let area = sphere_area(d);
    let q = cfg.points;
    let mut nodes = vec![0.0; q * d];
    let mut weights = vec![0.0; q];
    let mut v = vec![0.0; d];
    let mut dir = vec![0.0; d];
    for i in 0..q {
        let n = (i + 1) as f64;
        for j in 0..d {
            v[j] = (shift[j] + n * alpha[j]).fract();
        }
        let (rad, jac) = table.invert(v[0]);
        sphere_point(&v[1..], &mut dir);
        let u = &mut nodes[i * d..(i + 1) * d];
        for j in 0..d {
            u[j] = rad * dir[j];
        }
        weights[i] = area * rad.powi(d as i32 - 1) * jac / (spectral_denominator(u, s) * q as f64);
    }
    Ok((nodes, weights))
}

/// Upper bound on the spectral mass outside the ball `|u| > U`, using
/// `D(u) >= (2 pi |u|)^{2s} / s!`.
pub fn tail_bound(d: usize, s: usize, truncation: f64) -> f64 {
    let fact: f64 = (1..=s).map(|i| i as f64).product();
    sphere_area(d) * fact / (2.0 * PI).powi(2 * s as i32) * truncation.powi(d as i32 - 2 * s as i32)
        / (2 * s - d) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denominator_matches_multi_index_sum() {
        // d = 2, s = 2: 1 + a + b + a^2 + ab + b^2
        let u = [0.3, -0.7];
        let a = (2.0 * PI * 0.3f64).powi(2);
        let b = (2.0 * PI * 0.7f64).powi(2);
        let expect = 1.0 + a + b + a * a + a * b + b * b;
        assert!((spectral_denominator(&u, 2) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn harmonious_roots() {
        // d = 3 is the known 1.2207...
        assert!((harmonious(3) - 1.220_744_084_605_759_6).abs() < 1e-14);
        for d in [4, 6] {
            let x = harmonious(d);
            assert!((x.powi(d as i32 + 1) - x - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_points_are_unit() {
        let mut out = [0.0; 6];
        sphere_point(&[0.2, 0.9, 0.1, 0.5, 0.77], &mut out);
        let n: f64 = out.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-14);
        let mut out4 = [0.0; 4];
        sphere_point(&[0.3, 0.6, 0.05], &mut out4);
        let n: f64 = out4.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weights_integrate_radial_volume() {
        // with D replaced by 1 the weights would sum to the ball volume; check
        // the cheaper identity sum w_q D(u_q) = vol(B_U)
        let cfg = QuadratureConfig {
            points: 20_000,
            truncation: 2.0,
            seed: 1,
            radial_nodes: 4000,
        };
        let (nodes, w) = build_nodes(4, 3, &cfg).unwrap();
        let total: f64 = w
            .iter()
            .enumerate()
            .map(|(i, wi)| wi * spectral_denominator(&nodes[i * 4..i * 4 + 4], 3))
            .sum();
        let vol = PI * PI / 2.0 * 2f64.powi(4);
        assert!((total / vol - 1.0).abs() < 0.05, "{total} vs {vol}");
    }
}
