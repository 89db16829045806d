use num_complex::Complex64;
use rayon::prelude::*;

use super::ScatteringData;
use crate::error::{invalid, Result};
use crate::greens::{cell_green_integral, greens, AccuracyMode, Wavenumber};
use crate::numeric::{dot3, pairwise_sum_complex};
use crate::scene::{DetectorSet, SourceSet, SusceptibilityField, VoxelGrid};

/// Discrete linear map from cell susceptibilities to amplitudes.
///
/// Row `(s, d)` (row-major) holds `a_s k^p e^{-ik r_d . r_c} W_sc`, where
/// `W_sc = G(r_c, r_s) h^dim` for ordinary cells and the closed-form cell
/// integral for the cell containing source `s`.
#[derive(Debug, Clone)]
pub struct BornOperator {
    grid: VoxelGrid,
    n_detectors: usize,
    /// per source: weighted Green's values over all cells
    weights: Vec<Vec<Complex64>>,
    /// per detector: phase factors over all cells
    phases: Vec<Vec<Complex64>>,
}

impl BornOperator {
    pub fn new(
        grid: &VoxelGrid,
        sources: &SourceSet,
        detectors: &DetectorSet,
        k: Wavenumber,
        mode: AccuracyMode,
    ) -> Result<Self> {
        Self::build(grid, sources, detectors, k, mode, true)
    }

    /// Like [`BornOperator::new`], but a source outside the grid box (e.g.
    /// after position noise) is allowed; it then has no singular cell.
    pub fn new_lenient_sources(
        grid: &VoxelGrid,
        sources: &SourceSet,
        detectors: &DetectorSet,
        k: Wavenumber,
        mode: AccuracyMode,
    ) -> Result<Self> {
        Self::build(grid, sources, detectors, k, mode, false)
    }

    fn build(
        grid: &VoxelGrid,
        sources: &SourceSet,
        detectors: &DetectorSet,
        k: Wavenumber,
        mode: AccuracyMode,
        require_inside: bool,
    ) -> Result<Self> {
        let dim = grid.dim();
        if sources.dim() != dim || detectors.dim() != dim {
            return invalid("grid, sources and detectors must share a dimension");
        }
        mode.check(k, grid.spacing())?;
        grid.check_wavenumber(k.value());
        let centers = grid.centers();
        let mut own_cells = Vec::with_capacity(sources.len());
        for p in sources.positions() {
            let cell = grid.cell_of(p);
            if cell.is_none() && require_inside {
                return invalid(format!("source {p:?} lies outside the grid box"));
            }
            own_cells.push(cell);
        }
        let vol = grid.cell_volume();
        let pre = k.amplitude_prefactor(dim);
        let singular = cell_green_integral(dim, grid.spacing(), k)?;
        let weights = sources
            .positions()
            .par_iter()
            .zip(sources.amplitudes().par_iter())
            .zip(own_cells.par_iter())
            .map(|((src, &amp), &own)| {
                centers
                    .iter()
                    .enumerate()
                    .map(|(c, rc)| {
                        let w = if Some(c) == own {
                            singular
                        } else {
                            greens(dim, rc, src, k)? * vol
                        };
                        Ok(w * (amp * pre))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let kv = k.value();
        let phases = detectors
            .directions()
            .iter()
            .map(|d| {
                centers
                    .iter()
                    .map(|rc| Complex64::from_polar(1.0, -kv * dot3(d, rc)))
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            n_detectors: detectors.len(),
            weights,
            phases,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn n_rows(&self) -> usize {
        self.weights.len() * self.n_detectors
    }

    pub fn n_cols(&self) -> usize {
        self.grid.n_cells()
    }

    /// Matrix entry for row `(s, d)` and cell `c`.
    pub fn entry(&self, source: usize, detector: usize, cell: usize) -> Complex64 {
        self.phases[detector][cell] * self.weights[source][cell]
    }

    /// Apply the operator to a susceptibility vector.
    pub fn apply(&self, eta: &[f64]) -> Result<Vec<Complex64>> {
        if eta.len() != self.n_cols() {
            return invalid("susceptibility vector does not match the operator grid");
        }
        let nd = self.n_detectors;
        let rows: Vec<Complex64> = (0..self.n_rows())
            .into_par_iter()
            .map(|row| {
                let (s, d) = (row / nd, row % nd);
                let terms: Vec<Complex64> = eta
                    .iter()
                    .enumerate()
                    .map(|(c, &e)| self.phases[d][c] * self.weights[s][c] * e)
                    .collect();
                pairwise_sum_complex(&terms)
            })
            .collect();
        Ok(rows)
    }
}

/// Weak-scattering amplitude for every (source, detector) pair.
pub fn born_amplitude(
    field: &SusceptibilityField,
    sources: &SourceSet,
    detectors: &DetectorSet,
    k: Wavenumber,
    mode: AccuracyMode,
) -> Result<ScatteringData> {
    let op = BornOperator::new(field.grid(), sources, detectors, k, mode)?;
    let amplitudes = op.apply(field.values())?;
    ScatteringData::new(amplitudes, sources.clone(), detectors.clone(), k)
}
