//! Sobolev reproducing kernels on `R^4` and `R^6`, Gram assembly, and
//! representer-theorem fitting of the scattering amplitude.

mod fit;
mod kernel;
mod model;
mod quadrature;

pub use fit::{misfit, objective, relative_lambda, representer_fit, stationarity_residual};
pub use kernel::{SobolevKernel, SobolevKernelSpec};
pub use model::{CoordinateFrame, Lambda, RepresenterModel};
pub use quadrature::{spectral_denominator, sphere_area, tail_bound, QuadratureConfig};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;

/// `kappa(x, t)` for a kernel built from `spec`.
///
/// Builds the node set on every call; hold a [`SobolevKernel`] for repeated use.
pub fn kernel_eval(spec: &SobolevKernelSpec, x: &[f64], t: &[f64]) -> Result<f64> {
    SobolevKernel::new(*spec)?.eval(x, t)
}

/// Laplacian of `kappa(x, t)` in `t` over `active`.
pub fn kernel_laplacian(spec: &SobolevKernelSpec, x: &[f64], t: &[f64], active: &[usize]) -> Result<f64> {
    SobolevKernel::new(*spec)?.laplacian(x, t, active)
}

/// Gram matrix of `centers`.
pub fn gram_matrix(spec: &SobolevKernelSpec, centers: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    SobolevKernel::new(*spec)?.gram(centers)
}

/// `f(t)` for a fitted model.
pub fn surrogate_eval(model: &RepresenterModel, t: &[f64]) -> Result<Complex64> {
    model.surrogate_eval(t)
}

/// Leading-block Laplacian of `f` at `t` for a fitted model.
pub fn surrogate_laplacian(model: &RepresenterModel, t: &[f64]) -> Result<Complex64> {
    model.surrogate_laplacian(t)
}
