use num_complex::Complex64;

use super::ReconstructedField;
use crate::error::{invalid, Result};
use crate::forward::ScatteringData;
use crate::numeric::{dot3, pairwise_sum_complex};
use crate::scene::VoxelGrid;

/// Sorted distinct coordinates along one axis, with the common step.
fn axis_lattice(values: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let span = v[v.len() - 1] - v[0];
    let tol = 1e-9 * span.max(1.0);
    let mut uniq: Vec<f64> = Vec::new();
    for x in v {
        if uniq.last().is_none_or(|&l| x - l > tol) {
            uniq.push(x);
        }
    }
    if uniq.len() < 3 {
        return invalid("a lattice needs at least 3 points per axis");
    }
    let step = (uniq[uniq.len() - 1] - uniq[0]) / (uniq.len() - 1) as f64;
    for (i, &x) in uniq.iter().enumerate() {
        if (x - (uniq[0] + i as f64 * step)).abs() > 1e-6 * step {
            return invalid("source coordinates are not equally spaced");
        }
    }
    Ok((uniq, step))
}

/// Finite-difference version of the inversion formula applied directly to
/// data on a regular source lattice; no kernel fit involved.
///
/// The result lives on the interior lattice points (a grid whose cell centres
/// are those points).
pub fn reconstruct_fd_oracle(data: &ScatteringData) -> Result<ReconstructedField> {
    let dim = data.dim();
    let pos = data.sources().positions();
    let mut axes = Vec::with_capacity(dim);
    for a in 0..dim {
        let coords: Vec<f64> = pos.iter().map(|p| p[a]).collect();
        axes.push(axis_lattice(&coords)?);
    }
    let step = axes[0].1;
    if axes.iter().any(|(_, s)| (s - step).abs() > 1e-6 * step) {
        return invalid("lattice spacing must be equal on every axis");
    }
    let shape: Vec<usize> = axes.iter().map(|(u, _)| u.len()).collect();
    let total: usize = shape.iter().product();
    if total != pos.len() {
        return invalid("sources do not form a complete regular lattice");
    }
    let full = VoxelGrid::new(
        dim,
        &shape,
        step,
        &axes.iter().map(|(u, _)| u[0] - 0.5 * step).collect::<Vec<_>>(),
    )?;
    // lattice slot -> source row
    let mut slot = vec![usize::MAX; total];
    for (s, p) in pos.iter().enumerate() {
        let mut idx = [0usize; 3];
        for a in 0..dim {
            idx[a] = ((p[a] - axes[a].0[0]) / step).round() as usize;
        }
        let f = full.flat_index(&idx[..dim]);
        if slot[f] != usize::MAX {
            return invalid("duplicate lattice point");
        }
        slot[f] = s;
    }
    let inner_shape: Vec<usize> = shape.iter().map(|n| n - 2).collect();
    let inner_origin: Vec<f64> = axes.iter().map(|(u, _)| u[1] - 0.5 * step).collect();
    let inner = VoxelGrid::new(dim, &inner_shape, step, &inner_origin)?;
    let k = data.k();
    let kv = k.value();
    let pre = k.amplitude_prefactor(dim);
    let dets = data.detectors().directions();
    let mut per_detector = vec![Vec::with_capacity(inner.n_cells()); dets.len()];
    let mut averaged = Vec::with_capacity(inner.n_cells());
    for cell in 0..inner.n_cells() {
        let mi = inner.multi_index(cell);
        let mut centre = [0usize; 3];
        for a in 0..dim {
            centre[a] = mi[a] + 1;
        }
        let row = |idx: &[usize; 3]| slot[full.flat_index(&idx[..dim])];
        let c_row = row(&centre);
        let g = pos[c_row];
        let mut vals = Vec::with_capacity(dets.len());
        for (j, d) in dets.iter().enumerate() {
            let a0 = data.at(c_row, j);
            let mut lap = -2.0 * dim as f64 * a0;
            for a in 0..dim {
                let mut lo = centre;
                let mut hi = centre;
                lo[a] -= 1;
                hi[a] += 1;
                lap += data.at(row(&lo), j) + data.at(row(&hi), j);
            }
            lap /= step * step;
            let phase = Complex64::from_polar(1.0, kv * dot3(d, &g));
            let eta = -phase / pre * (lap + kv * kv * a0);
            per_detector[j].push(eta);
            vals.push(eta);
        }
        averaged.push(pairwise_sum_complex(&vals) / dets.len() as f64);
    }
    let mut out = ReconstructedField::from_complex(inner, averaged)?;
    out.per_detector = Some(per_detector);
    Ok(out)
}
