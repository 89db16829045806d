use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// `lambda = rel * trace(K) / n`.
pub fn relative_lambda(k: &DMatrix<f64>, rel: f64) -> f64 {
    rel * k.trace() / k.nrows() as f64
}

fn check(k: &DMatrix<f64>, data: &[Complex64], lambda: f64) -> Result<()> {
    if !k.is_square() {
        return invalid("Gram matrix must be square");
    }
    if data.len() != k.nrows() {
        return invalid(format!(
            "data vector has {} entries, Gram matrix is {}x{}",
            data.len(),
            k.nrows(),
            k.ncols()
        ));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be non-negative, got {lambda}"));
    }
    Ok(())
}

/// Representer coefficients `c = A K [K (n lambda I + K)]^+`.
///
/// `K` is symmetric, so the generalised inverse is taken through its
/// eigendecomposition `K = V diag(l) V^T`: `c = V diag(l_i / m_i) V^T A` with
/// `m_i = l_i (n lambda + l_i)`, and eigen-directions with
/// `|m_i| <= rcond * max |m|` dropped. Real and imaginary parts share `K` and
/// are fitted by the same linear map.
pub fn representer_fit(
    k: &DMatrix<f64>,
    data: &[Complex64],
    lambda: f64,
    rcond: Option<f64>,
) -> Result<Vec<Complex64>> {
    check(k, data, lambda)?;
    let n = k.nrows();
    if k.iter().all(|&v| v == 0.0) {
        log::warn!("Gram matrix is identically zero: degenerate kernel, returning zero coefficients");
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let rcond = rcond.unwrap_or(n as f64 * f64::EPSILON);
    let eig = k.clone().symmetric_eigen();
    let nl = n as f64 * lambda;
    let m: Vec<f64> = eig.eigenvalues.iter().map(|&l| l * (nl + l)).collect();
    let m_max = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = rcond * m_max;
    let factor: Vec<f64> = eig
        .eigenvalues
        .iter()
        .zip(&m)
        .map(|(&l, &mi)| if mi.abs() > cutoff && mi != 0.0 { l / mi } else { 0.0 })
        .collect();
    let v = &eig.eigenvectors;
    let apply = |b: DVector<f64>| -> DVector<f64> {
        let mut proj = v.transpose() * b;
        proj.iter_mut().zip(&factor).for_each(|(p, f)| *p *= f);
        v * proj
    };
    let re = apply(DVector::from_iterator(n, data.iter().map(|a| a.re)));
    let im = apply(DVector::from_iterator(n, data.iter().map(|a| a.im)));
    Ok(re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

fn mul(k: &DMatrix<f64>, c: &[Complex64]) -> Vec<Complex64> {
    let n = k.nrows();
    let re = k * DVector::from_iterator(n, c.iter().map(|z| z.re));
    let im = k * DVector::from_iterator(n, c.iter().map(|z| z.im));
    re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative residual of the first-order optimality condition,
/// `|| -2/n A K + 2 c K (lambda I + K/n) || / || A K ||`.
pub fn stationarity_residual(k: &DMatrix<f64>, data: &[Complex64], c: &[Complex64], lambda: f64) -> Result<f64> {
    check(k, data, lambda)?;
    if c.len() != data.len() {
        return invalid("coefficient vector has the wrong length");
    }
    let n = k.nrows() as f64;
    let ak = mul(k, data);
    let kc = mul(k, c);
    let kkc = mul(k, &kc);
    let grad: Vec<Complex64> = ak
        .iter()
        .zip(kc.iter().zip(&kkc))
        .map(|(a, (kc, kkc))| -2.0 / n * a + 2.0 * (lambda * kc + kkc / n))
        .collect();
    let scale = norm(&ak);
    Ok(if scale == 0.0 { norm(&grad) } else { norm(&grad) / scale })
}

/// Regularised objective `1/n sum |A_i - (K c)_i|^2 + lambda c^H K c`.
pub fn objective(k: &DMatrix<f64>, data: &[Complex64], c: &[Complex64], lambda: f64) -> Result<f64> {
    check(k, data, lambda)?;
    let kc = mul(k, c);
    let n = k.nrows() as f64;
    let misfit: f64 = data.iter().zip(&kc).map(|(a, f)| (a - f).norm_sqr()).sum::<f64>() / n;
    let penalty: f64 = c.iter().zip(&kc).map(|(ci, f)| (ci.conj() * f).re).sum();
    Ok(misfit + lambda * penalty)
}

/// Data-misfit term `1/n sum |A_i - (K c)_i|^2`.
pub fn misfit(k: &DMatrix<f64>, data: &[Complex64], c: &[Complex64]) -> Result<f64> {
    objective(k, data, c, 0.0)
}
