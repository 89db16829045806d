//! Susceptibility from the Laplacian of the amplitude, detector averaging,
//! slice assembly, and two independent baselines.

mod baseline;
mod hull;
mod metrics;
mod oracle;

use num_complex::Complex64;
use rayon::prelude::*;

pub use baseline::{baseline_linear_inversion, LinearInversion};
pub use hull::Hull;
pub use metrics::{amplitude_chi_squared, chi_squared, delta_error};
pub use oracle::reconstruct_fd_oracle;

use crate::error::{invalid, Result};
use crate::greens::Wavenumber;
use crate::numeric::{dot3, pairwise_sum_complex, Point};
use crate::rkhs::RepresenterModel;
use crate::scene::{DetectorSet, SusceptibilityField, VoxelGrid};

/// Reconstructed susceptibility on a grid.
///
/// `values` is the real part of `values_complex`; the imaginary part is kept
/// as a diagnostic of numerical error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedField {
    pub grid: VoxelGrid,
    pub values_complex: Vec<Complex64>,
    pub values: Vec<f64>,
    /// Per-detector reconstructions before averaging, detector-major.
    pub per_detector: Option<Vec<Vec<Complex64>>>,
    /// Cells outside the convex hull of the source positions.
    pub outside_hull: Vec<bool>,
    /// Physical heights of assembled layers, when built from slices.
    pub layer_heights: Option<Vec<f64>>,
}

impl ReconstructedField {
    pub fn from_complex(grid: VoxelGrid, values_complex: Vec<Complex64>) -> Result<Self> {
        if values_complex.len() != grid.n_cells() {
            return invalid("reconstruction does not match its grid");
        }
        let values = values_complex.iter().map(|z| z.re).collect();
        let n = grid.n_cells();
        Ok(Self {
            grid,
            values_complex,
            values,
            per_detector: None,
            outside_hull: vec![false; n],
            layer_heights: None,
        })
    }

    pub fn from_real(grid: VoxelGrid, values: Vec<f64>) -> Result<Self> {
        Self::from_complex(grid, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    /// Largest `|Im eta|` over the grid.
    pub fn imag_max(&self) -> f64 {
        self.values_complex.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn n_outside_hull(&self) -> usize {
        self.outside_hull.iter().filter(|&&b| b).count()
    }

    /// Real part as a susceptibility field.
    pub fn to_field(&self) -> Result<SusceptibilityField> {
        SusceptibilityField::new(self.grid.clone(), self.values.clone())
    }

    /// Two-dimensional cross-section at third-axis index `layer`.
    pub fn layer(&self, layer: usize) -> Result<ReconstructedField> {
        if self.grid.dim() != 3 {
            return Ok(self.clone());
        }
        let shape = self.grid.shape();
        if layer >= shape[2] {
            return invalid(format!("layer {layer} out of range 0..{}", shape[2]));
        }
        let g2 = VoxelGrid::new(2, &shape[..2], self.grid.spacing(), &self.grid.origin()[..2])?;
        let mut vals = Vec::with_capacity(g2.n_cells());
        let mut flags = Vec::with_capacity(g2.n_cells());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                let f = self.grid.flat_index(&[i, j, layer]);
                vals.push(self.values_complex[f]);
                flags.push(self.outside_hull[f]);
            }
        }
        let mut out = Self::from_complex(g2, vals)?;
        out.outside_hull = flags;
        Ok(out)
    }
}

/// Options for [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReconstructOptions {
    /// Keep the per-detector reconstructions.
    pub keep_per_detector: bool,
}

/// `eta(g) = -e^{ik r_hat.g} / k^p (Laplacian f + k^2 f)` at every cell
/// centre `g`, averaged over `detectors` (`p = 3/2` in 2D, `2` in 3D).
///
/// Pass a single-detector set for the one-block mode. Cells outside the convex
/// hull of the fitted source positions are flagged and logged, not skipped.
pub fn reconstruct(
    model: &RepresenterModel,
    recon_grid: &VoxelGrid,
    detectors: &DetectorSet,
    k: Wavenumber,
    options: ReconstructOptions,
) -> Result<ReconstructedField> {
    let dim = recon_grid.dim();
    if model.spatial_dim() != dim || detectors.dim() != dim {
        return invalid("model, grid and detectors must share a spatial dimension");
    }
    let centers = recon_grid.centers();
    let kv = k.value();
    let pre = k.amplitude_prefactor(dim);
    let per_cell: Vec<Vec<Complex64>> = centers
        .par_iter()
        .map(|g| {
            detectors
                .directions()
                .iter()
                .map(|d| {
                    let (f, lap) = model.eval_physical(g, d)?;
                    let phase = Complex64::from_polar(1.0, kv * dot3(d, g));
                    Ok(-phase / pre * (lap + kv * kv * f))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let nd = detectors.len() as f64;
    let averaged: Vec<Complex64> = per_cell.iter().map(|v| pairwise_sum_complex(v) / nd).collect();
    let mut out = ReconstructedField::from_complex(recon_grid.clone(), averaged)?;
    if options.keep_per_detector {
        out.per_detector = Some(
            (0..detectors.len())
                .map(|j| per_cell.iter().map(|v| v[j]).collect())
                .collect(),
        );
    }
    let sources = model_source_positions(model);
    let hull = Hull::new(dim, &sources);
    out.outside_hull = centers.iter().map(|g| !hull.contains(g)).collect();
    let outside = out.n_outside_hull();
    if outside > 0 {
        log::warn!("{outside} reconstruction cells lie outside the source hull and are extrapolated");
    }
    Ok(out)
}

/// Distinct physical source positions behind a model's centers.
fn model_source_positions(model: &RepresenterModel) -> Vec<Point> {
    let dim = model.spatial_dim();
    let l = model.frame().length_scale;
    let mut out: Vec<Point> = Vec::new();
    for c in model.centers() {
        let mut p = [0.0; 3];
        for a in 0..dim {
            p[a] = c[a] * l;
        }
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Stack 2D layer reconstructions along a third axis.
///
/// The volume uses the in-plane spacing for its grid; the true layer heights
/// are carried in `layer_heights` when given.
pub fn assemble_slices(
    layers: &[ReconstructedField],
    z_origin: f64,
    heights: Option<Vec<f64>>,
) -> Result<ReconstructedField> {
    let first = match layers.first() {
        Some(f) => f,
        None => return invalid("no layers to assemble"),
    };
    if layers.iter().any(|l| l.grid != first.grid || l.grid.dim() != 2) {
        return invalid("all layers must share the same 2D grid");
    }
    if let Some(h) = &heights {
        if h.len() != layers.len() {
            return invalid("one height per layer required");
        }
    }
    let s = first.grid.shape();
    let o = first.grid.origin();
    let grid = VoxelGrid::new(
        3,
        &[s[0], s[1], layers.len()],
        first.grid.spacing(),
        &[o[0], o[1], z_origin],
    )?;
    let n = grid.n_cells();
    let mut vals = vec![Complex64::new(0.0, 0.0); n];
    let mut flags = vec![false; n];
    for (l, layer) in layers.iter().enumerate() {
        for i in 0..s[0] {
            for j in 0..s[1] {
                let src = first.grid.flat_index(&[i, j]);
                let dst = grid.flat_index(&[i, j, l]);
                vals[dst] = layer.values_complex[src];
                flags[dst] = layer.outside_hull[src];
            }
        }
    }
    let mut out = ReconstructedField::from_complex(grid, vals)?;
    out.outside_hull = flags;
    out.layer_heights = heights;
    Ok(out)
}
