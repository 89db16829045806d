use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ReconstructedField;
use crate::error::{invalid, Result};
use crate::forward::{BornOperator, ScatteringData};
use crate::greens::AccuracyMode;
use crate::numeric::tsvd_solve;
use crate::scene::VoxelGrid;

/// Result of the linear-system inversion: the field and the amplitudes it
/// predicts through the same linear map.
#[derive(Debug, Clone)]
pub struct LinearInversion {
    pub field: ReconstructedField,
    pub predicted: Vec<Complex64>,
}

/// Least-squares inversion of the discretised weak-scattering map.
///
/// Real and imaginary rows are stacked into a real system (eta is real) and
/// solved by truncated SVD with cutoff `rcond * sigma_max`.
pub fn baseline_linear_inversion(
    data: &ScatteringData,
    forward_grid: &VoxelGrid,
    rcond: f64,
    mode: AccuracyMode,
) -> Result<LinearInversion> {
    let n_cells = forward_grid.n_cells();
    if data.len() < n_cells {
        return invalid(format!(
            "linear system is underdetermined: {} measurements for {n_cells} cells",
            data.len()
        ));
    }
    if !(rcond >= 0.0) {
        return invalid("rcond must be non-negative");
    }
    let op = BornOperator::new_lenient_sources(forward_grid, data.sources(), data.detectors(), data.k(), mode)?;
    let n = data.len();
    let nd = data.n_detectors();
    let mut m = DMatrix::<f64>::zeros(2 * n, n_cells);
    for row in 0..n {
        let (s, d) = (row / nd, row % nd);
        for c in 0..n_cells {
            let e = op.entry(s, d, c);
            m[(row, c)] = e.re;
            m[(n + row, c)] = e.im;
        }
    }
    let mut b = DVector::<f64>::zeros(2 * n);
    for (i, a) in data.amplitudes().iter().enumerate() {
        b[i] = a.re;
        b[n + i] = a.im;
    }
    let eta = tsvd_solve(&m, &b, rcond);
    let values: Vec<f64> = eta.iter().copied().collect();
    let predicted = op.apply(&values)?;
    let field = ReconstructedField::from_real(forward_grid.clone(), values)?;
    Ok(LinearInversion { field, predicted })
}
