use num_complex::Complex64;

use super::ReconstructedField;
use crate::error::{invalid, Error, Result};
use crate::forward::ScatteringData;
use crate::numeric::pairwise_sum;
use crate::rkhs::RepresenterModel;
use crate::scene::SusceptibilityField;

/// `sum |A - A_rec|^2 / sum |A|^2` for any predicted amplitudes.
pub fn amplitude_chi_squared(data: &ScatteringData, predicted: &[Complex64]) -> Result<f64> {
    if predicted.len() != data.len() {
        return invalid("prediction does not match the data size");
    }
    let num: Vec<f64> = data
        .amplitudes()
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).norm_sqr())
        .collect();
    let den: Vec<f64> = data.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let den = pairwise_sum(&den);
    if den == 0.0 {
        return Err(Error::UndefinedMetric("chi^2 is undefined for all-zero data".into()));
    }
    Ok(pairwise_sum(&num) / den)
}

/// Relative amplitude misfit of a fitted model at its own data points.
pub fn chi_squared(data: &ScatteringData, model: &RepresenterModel) -> Result<f64> {
    if model.centers().len() != data.len() {
        return invalid("model centers do not correspond to the data points");
    }
    amplitude_chi_squared(data, &model.fitted_values()?)
}

/// Mean absolute error `1/N sum |eta_true - eta_rec|` over the reconstruction
/// grid; the truth is sampled at each reconstruction cell centre.
pub fn delta_error(truth: &SusceptibilityField, recon: &ReconstructedField) -> Result<f64> {
    if truth.grid().dim() != recon.grid.dim() {
        return invalid("truth and reconstruction dimensions differ");
    }
    let mut diffs = Vec::with_capacity(recon.values.len());
    for (cell, v) in recon.values.iter().enumerate() {
        let c = recon.grid.center(cell);
        match truth.value_at(&c) {
            Some(t) => diffs.push((t - v).abs()),
            None => {
                return invalid(format!("reconstruction cell centre {c:?} lies outside the truth grid"));
            }
        }
    }
    Ok(pairwise_sum(&diffs) / diffs.len() as f64)
}
