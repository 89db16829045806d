use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

use super::fit::{relative_lambda, representer_fit, stationarity_residual};
use super::kernel::SobolevKernel;
use crate::error::{invalid, Result};
use crate::forward::ScatteringData;
use crate::numeric::{pairwise_sum_complex, Point};

/// Map from physical coordinates to kernel inputs: positions are divided by
/// `length_scale`, detector directions are used as they are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateFrame {
    pub length_scale: f64,
}

impl CoordinateFrame {
    pub fn new(length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0) || !length_scale.is_finite() {
            return invalid("length scale must be positive");
        }
        Ok(Self { length_scale })
    }

    /// Kernel input `(r / L, r_hat)` for a `dim`-dimensional problem.
    pub fn input(&self, dim: usize, position: &Point, direction: &Point) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * dim);
        x.extend(position[..dim].iter().map(|v| v / self.length_scale));
        x.extend_from_slice(&direction[..dim]);
        x
    }

    /// Factor converting a Laplacian in kernel coordinates to physical units.
    pub fn laplacian_scale(&self) -> f64 {
        1.0 / (self.length_scale * self.length_scale)
    }
}

/// How the regularisation weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Absolute(f64),
    /// `rel * trace(K) / n`
    RelativeTrace(f64),
}

impl Default for Lambda {
    fn default() -> Self {
        Lambda::RelativeTrace(1e-8)
    }
}

/// Fitted kernel expansion `f(t) = sum_i c_i kappa(x_i, t)`.
#[derive(Debug, Clone)]
pub struct RepresenterModel {
    kernel: Arc<SobolevKernel>,
    frame: CoordinateFrame,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<Complex64>,
    lambda: f64,
    gram: Option<DMatrix<f64>>,
    stationarity: f64,
    // sum_i c_i w_q cos(2 pi x_i.u_q) and the sine counterpart, per node
    beta_c: Vec<Complex64>,
    beta_s: Vec<Complex64>,
}

impl RepresenterModel {
    /// Fit the amplitude matrix of `data`. Centers follow the row-major
    /// (source, detector) order of the data.
    pub fn fit(
        kernel: Arc<SobolevKernel>,
        data: &ScatteringData,
        frame: CoordinateFrame,
        lambda: Lambda,
    ) -> Result<Self> {
        let dim = data.dim();
        if kernel.spec().spatial_dim() != dim {
            return invalid(format!(
                "kernel expects {}-dimensional positions, data is {dim}-dimensional",
                kernel.spec().spatial_dim()
            ));
        }
        let centers: Vec<Vec<f64>> = data
            .sources()
            .positions()
            .iter()
            .flat_map(|p| data.detectors().directions().iter().map(move |d| (p, d)))
            .map(|(p, d)| frame.input(dim, p, d))
            .collect();
        let gram = kernel.gram(&centers)?;
        let lambda = match lambda {
            Lambda::Absolute(v) => v,
            Lambda::RelativeTrace(rel) => relative_lambda(&gram, rel),
        };
        let coefficients = representer_fit(&gram, data.amplitudes(), lambda, None)?;
        let stationarity = stationarity_residual(&gram, data.amplitudes(), &coefficients, lambda)?;
        if stationarity > 1e-8 {
            log::warn!("representer fit stationarity residual {stationarity:e} exceeds 1e-8");
        }
        Self::assemble(kernel, frame, centers, coefficients, lambda, Some(gram), stationarity)
    }

    /// Rebuild a model from stored centers and coefficients. The Gram matrix
    /// is not kept, so fitted values are evaluated through the surrogate.
    pub fn from_parts(
        kernel: Arc<SobolevKernel>,
        frame: CoordinateFrame,
        centers: Vec<Vec<f64>>,
        coefficients: Vec<Complex64>,
        lambda: f64,
    ) -> Result<Self> {
        Self::assemble(kernel, frame, centers, coefficients, lambda, None, f64::NAN)
    }

    fn assemble(
        kernel: Arc<SobolevKernel>,
        frame: CoordinateFrame,
        centers: Vec<Vec<f64>>,
        coefficients: Vec<Complex64>,
        lambda: f64,
        gram: Option<DMatrix<f64>>,
        stationarity: f64,
    ) -> Result<Self> {
        let d = kernel.spec().d_in;
        if centers.iter().any(|c| c.len() != d) {
            return invalid(format!("every center needs {d} coordinates"));
        }
        if centers.len() != coefficients.len() {
            return invalid("one coefficient per center required");
        }
        let (beta_c, beta_s): (Vec<Complex64>, Vec<Complex64>) = (0..kernel.n_nodes())
            .into_par_iter()
            .map(|q| {
                let u = kernel.node(q);
                let mut tc = Vec::with_capacity(centers.len());
                let mut ts = Vec::with_capacity(centers.len());
                for (x, c) in centers.iter().zip(&coefficients) {
                    let p = 2.0 * PI * x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
                    let (s, co) = p.sin_cos();
                    tc.push(c * co);
                    ts.push(c * s);
                }
                let w = kernel.weights()[q];
                (pairwise_sum_complex(&tc) * w, pairwise_sum_complex(&ts) * w)
            })
            .unzip();
        Ok(Self {
            kernel,
            frame,
            centers,
            coefficients,
            lambda,
            gram,
            stationarity,
            beta_c,
            beta_s,
        })
    }

    pub fn kernel(&self) -> &Arc<SobolevKernel> {
        &self.kernel
    }

    pub fn frame(&self) -> CoordinateFrame {
        self.frame
    }

    pub fn spatial_dim(&self) -> usize {
        self.kernel.spec().spatial_dim()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Gram matrix of the centers, present for freshly fitted models.
    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.gram.as_ref()
    }

    /// Relative stationarity residual of the fit (NaN for loaded models).
    pub fn stationarity(&self) -> f64 {
        self.stationarity
    }

    /// Same centers with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        let c = self.coefficients.iter().map(|z| z * factor).collect();
        Self::assemble(
            self.kernel.clone(),
            self.frame,
            self.centers.clone(),
            c,
            self.lambda,
            self.gram.clone(),
            self.stationarity,
        )
    }

    fn check(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.kernel.spec().d_in {
            return invalid(format!(
                "surrogate input has {} coordinates, expected {}",
                t.len(),
                self.kernel.spec().d_in
            ));
        }
        Ok(())
    }

    /// `(f(t), Laplacian of f at t)` in kernel coordinates.
    pub fn eval_with_laplacian(&self, t: &[f64]) -> Result<(Complex64, Complex64)> {
        self.check(t)?;
        let lap = self.kernel.laplacian_factors();
        let q = self.kernel.n_nodes();
        let mut fv = Vec::with_capacity(q);
        let mut lv = Vec::with_capacity(q);
        for (i, l) in lap.iter().enumerate() {
            let u = self.kernel.node(i);
            let p = 2.0 * PI * t.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
            let (s, c) = p.sin_cos();
            let term = self.beta_c[i] * c + self.beta_s[i] * s;
            fv.push(term);
            lv.push(term * l);
        }
        Ok((pairwise_sum_complex(&fv), pairwise_sum_complex(&lv)))
    }

    /// Surrogate value `f(t)` in kernel coordinates.
    pub fn surrogate_eval(&self, t: &[f64]) -> Result<Complex64> {
        Ok(self.eval_with_laplacian(t)?.0)
    }

    /// Laplacian of `f` over the leading spatial block, in kernel coordinates.
    pub fn surrogate_laplacian(&self, t: &[f64]) -> Result<Complex64> {
        Ok(self.eval_with_laplacian(t)?.1)
    }

    /// `(f, Laplacian f)` at a physical position and detector direction; the
    /// Laplacian is in physical units.
    pub fn eval_physical(&self, position: &Point, direction: &Point) -> Result<(Complex64, Complex64)> {
        let t = self.frame.input(self.spatial_dim(), position, direction);
        let (f, l) = self.eval_with_laplacian(&t)?;
        Ok((f, l * self.frame.laplacian_scale()))
    }

    /// Surrogate values at the fitted centers, i.e. `K c`.
    pub fn fitted_values(&self) -> Result<Vec<Complex64>> {
        let Some(gram) = &self.gram else {
            return self.centers.par_iter().map(|x| self.surrogate_eval(x)).collect();
        };
        let n = self.centers.len();
        Ok((0..n)
            .map(|i| {
                let terms: Vec<Complex64> = (0..n).map(|j| self.coefficients[j] * gram[(i, j)]).collect();
                pairwise_sum_complex(&terms)
            })
            .collect())
    }
}
