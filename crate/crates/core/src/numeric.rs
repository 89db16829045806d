//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Point in up to three spatial dimensions; unused trailing coordinates are zero.
pub type Point = [f64; 3];

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed reduction tree.
///
/// The tree depends only on the slice length, so the result is reproducible
/// regardless of how the terms were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

pub fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn dist3(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Minimum-norm least-squares solution via truncated SVD.
///
/// Singular values below `rcond * sigma_max` are discarded. With `rcond >= 1`
/// every singular value is discarded and the zero vector is returned.
pub fn tsvd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * sigma_max;
    let utb = u.transpose() * b;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            scaled[i] = utb[i] / s;
        }
    }
    v_t.transpose() * scaled
}
