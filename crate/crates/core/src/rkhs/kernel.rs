use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::quadrature::{build_nodes, tail_bound, QuadratureConfig};
use crate::error::{invalid, Result};
use crate::numeric::pairwise_sum;

/// Input dimension, smoothness and quadrature of a Sobolev kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevKernelSpec {
    pub d_in: usize,
    pub s: usize,
    pub quadrature: QuadratureConfig,
}

impl SobolevKernelSpec {
    pub fn new(d_in: usize, s: usize, quadrature: QuadratureConfig) -> Result<Self> {
        if d_in != 4 && d_in != 6 {
            return invalid(format!("kernel input dimension must be 4 or 6, got {d_in}"));
        }
        if 2 * s <= d_in {
            return invalid(format!("smoothness s = {s} must exceed d/2 = {}", d_in / 2));
        }
        quadrature.validate()?;
        Ok(Self { d_in, s, quadrature })
    }

    /// `W_2^3(R^4)` for planar problems, `W_2^4(R^6)` for volumes.
    pub fn for_spatial_dim(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::new(4, 3, QuadratureConfig::default_for(4)),
            3 => Self::new(6, 4, QuadratureConfig::default_for(6)),
            _ => invalid(format!("spatial dimension must be 2 or 3, got {dim}")),
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.d_in / 2
    }

    /// Bound on the spectral mass discarded by truncation.
    pub fn tail_bound(&self) -> f64 {
        tail_bound(self.d_in, self.s, self.quadrature.truncation)
    }
}

/// Sobolev reproducing kernel
/// `kappa(x, t) = int cos(2 pi (x - t) . u) / D(u) du`
/// evaluated with a fixed node set.
///
/// `D` is even in every coordinate, so this equals the product-of-cosines form
/// of the integrand; the dot-product form factorises into features
/// `cos(2 pi x.u), sin(2 pi x.u)`, which is what makes Gram assembly and
/// surrogate evaluation cheap.
#[derive(Debug, Clone)]
pub struct SobolevKernel {
    spec: SobolevKernelSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `-4 pi^2 sum_{j < spatial_dim} u_j^2` per node
    lap: Vec<f64>,
}

/// Number of nodes handled per feature block during Gram assembly.
const CHUNK: usize = 2048;

impl SobolevKernel {
    pub fn new(spec: SobolevKernelSpec) -> Result<Self> {
        let (nodes, weights) = build_nodes(spec.d_in, spec.s, &spec.quadrature)?;
        let d = spec.d_in;
        let m = spec.spatial_dim();
        let lap = nodes
            .chunks_exact(d)
            .map(|u| -4.0 * PI * PI * u[..m].iter().map(|v| v * v).sum::<f64>())
            .collect();
        Ok(Self {
            spec,
            nodes,
            weights,
            lap,
        })
    }

    pub fn spec(&self) -> &SobolevKernelSpec {
        &self.spec
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.spec.d_in..(q + 1) * self.spec.d_in]
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn laplacian_factors(&self) -> &[f64] {
        &self.lap
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.d_in {
            return invalid(format!(
                "kernel input has {} coordinates, expected {}",
                x.len(),
                self.spec.d_in
            ));
        }
        Ok(())
    }

    fn check_active(&self, active: &[usize]) -> Result<()> {
        let m = self.spec.spatial_dim();
        if active.len() != m || active.iter().enumerate().any(|(i, &a)| a != i) {
            return invalid(format!(
                "Laplacian must act on the leading {m} coordinates, got {active:?}"
            ));
        }
        Ok(())
    }

    /// `2 pi (x - t) . u_q`
    fn phases(&self, x: &[f64], t: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = x.iter().zip(t).map(|(a, b)| a - b).collect();
        self.nodes
            .chunks_exact(self.spec.d_in)
            .map(|u| 2.0 * PI * diff.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// `kappa(x, t)`.
    pub fn eval(&self, x: &[f64], t: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(t)?;
        let terms: Vec<f64> = self
            .phases(x, t)
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * p.cos())
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// Laplacian of `kappa(x, t)` in `t` over the coordinates listed in
    /// `active`, which must be the leading spatial block.
    pub fn laplacian(&self, x: &[f64], t: &[f64], active: &[usize]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(t)?;
        self.check_active(active)?;
        let terms: Vec<f64> = self
            .phases(x, t)
            .iter()
            .zip(&self.weights)
            .zip(&self.lap)
            .map(|((p, w), l)| w * l * p.cos())
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// `kappa(0, 0)`, the kernel's value on the diagonal.
    pub fn diagonal(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Gram matrix `K_ij = kappa(x_i, x_j)`, assembled from features.
    ///
    /// Node blocks are split into a fixed number of groups summed in order, so
    /// the result does not depend on the thread count. The output is exactly
    /// symmetric.
    pub fn gram(&self, centers: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        for c in centers {
            self.check_point(c)?;
        }
        let n = centers.len();
        if n == 0 {
            return invalid("Gram matrix needs at least one center");
        }
        let q = self.n_nodes();
        let chunks: Vec<(usize, usize)> = (0..q).step_by(CHUNK).map(|a| (a, (a + CHUNK).min(q))).collect();
        let groups = if n > 2000 { 4 } else { 16 };
        let per = chunks.len().div_ceil(groups);
        let partials: Vec<DMatrix<f64>> = chunks
            .par_chunks(per.max(1))
            .map(|group| {
                let mut acc = DMatrix::<f64>::zeros(n, n);
                for &(a, b) in group {
                    let (fc, fs) = self.scaled_features(centers, a, b);
                    acc.gemm(1.0, &fc, &fc.transpose(), 1.0);
                    acc.gemm(1.0, &fs, &fs.transpose(), 1.0);
                }
                acc
            })
            .collect();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for p in &partials {
            k += p;
        }
        for i in 0..n {
            for j in i + 1..n {
                k[(j, i)] = k[(i, j)];
            }
        }
        Ok(k)
    }

    /// `sqrt(w_q) cos(2 pi x_i . u_q)` and the sine counterpart for nodes `a..b`.
    fn scaled_features(&self, centers: &[Vec<f64>], a: usize, b: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = centers.len();
        let m = b - a;
        let mut fc = DMatrix::<f64>::zeros(n, m);
        let mut fs = DMatrix::<f64>::zeros(n, m);
        for (col, qi) in (a..b).enumerate() {
            let u = self.node(qi);
            let sw = self.weights[qi].sqrt();
            for (i, x) in centers.iter().enumerate() {
                let p = 2.0 * PI * x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
                let (s, c) = p.sin_cos();
                fc[(i, col)] = sw * c;
                fs[(i, col)] = sw * s;
            }
        }
        (fc, fs)
    }
}
