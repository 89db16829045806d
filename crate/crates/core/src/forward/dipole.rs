//! Coupled-dipole (discretised Lippmann–Schwinger) solver.
//!
//! Only cells with `eta != 0` couple, so the linear system is assembled on that
//! support; the field elsewhere follows by one explicit sum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::ScatteringData;
use crate::error::{invalid, Error, Result};
use crate::greens::{cell_green_integral, greens_radial, AccuracyMode, Wavenumber};
use crate::numeric::{dot3, pairwise_sum_complex, Point};
use crate::scene::{DetectorSet, SourceSet, SusceptibilityField, VoxelGrid};

/// Support size above which the iterative solver replaces dense LU.
pub const DENSE_LIMIT: usize = 5000;
const RESIDUAL_TOL: f64 = 1e-10;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 2000;

/// Total and incident field on every cell for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub grid: VoxelGrid,
    pub total_field: Vec<Complex64>,
    pub incident_field: Vec<Complex64>,
}

impl FieldSolution {
    pub fn scattered_field(&self) -> Vec<Complex64> {
        self.total_field
            .iter()
            .zip(&self.incident_field)
            .map(|(u, ui)| u - ui)
            .collect()
    }
}

/// `G_eff` between cells, tabulated by absolute index offset.
#[derive(Debug, Clone)]
struct OffsetTable {
    shape: [usize; 3],
    values: Vec<Complex64>,
}

impl OffsetTable {
    fn new(grid: &VoxelGrid, k: Wavenumber) -> Result<Self> {
        let dim = grid.dim();
        let mut shape = [1usize; 3];
        shape[..dim].copy_from_slice(grid.shape());
        let h = grid.spacing();
        let vol = grid.cell_volume();
        let diag = cell_green_integral(dim, h, k)?;
        let n = shape[0] * shape[1] * shape[2];
        let values = (0..n)
            .into_par_iter()
            .map(|flat| {
                let i = flat / (shape[1] * shape[2]);
                let j = (flat / shape[2]) % shape[1];
                let l = flat % shape[2];
                if flat == 0 {
                    return Ok(diag);
                }
                let r = h * ((i * i + j * j + l * l) as f64).sqrt();
                Ok(greens_radial(dim, r, k)? * vol)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape, values })
    }

    fn get(&self, a: &[usize; 3], b: &[usize; 3]) -> Complex64 {
        let d = [a[0].abs_diff(b[0]), a[1].abs_diff(b[1]), a[2].abs_diff(b[2])];
        self.values[(d[0] * self.shape[1] + d[1]) * self.shape[2] + d[2]]
    }
}

enum Solver {
    Dense(nalgebra::linalg::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative,
}

/// Factorised coupled-dipole system for a fixed medium and wavenumber; reused
/// across sources.
pub struct CoupledDipoleSystem {
    field: SusceptibilityField,
    k: Wavenumber,
    table: OffsetTable,
    indices: Vec<[usize; 3]>,
    support: Vec<usize>,
    solver: Solver,
}

impl CoupledDipoleSystem {
    pub fn new(field: &SusceptibilityField, k: Wavenumber, mode: AccuracyMode) -> Result<Self> {
        let grid = field.grid();
        mode.check(k, grid.spacing())?;
        grid.check_wavenumber(k.value());
        let table = OffsetTable::new(grid, k)?;
        let indices: Vec<[usize; 3]> = (0..grid.n_cells()).map(|c| grid.multi_index(c)).collect();
        let support: Vec<usize> = field
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(c, _)| c)
            .collect();
        let mut sys = Self {
            field: field.clone(),
            k,
            table,
            indices,
            support,
            solver: Solver::Iterative,
        };
        if sys.support.len() <= DENSE_LIMIT && !sys.support.is_empty() {
            let m = sys.dense_matrix();
            let lu = m.lu();
            let diag_min = (0..lu.u().nrows())
                .map(|i| lu.u()[(i, i)].norm())
                .fold(f64::INFINITY, f64::min);
            if !(diag_min > 0.0) || !diag_min.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "coupled-dipole matrix is singular (smallest pivot {diag_min:e})"
                )));
            }
            sys.solver = Solver::Dense(lu);
        }
        Ok(sys)
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    fn k2(&self) -> f64 {
        self.k.value() * self.k.value()
    }

    fn dense_matrix(&self) -> DMatrix<Complex64> {
        let n = self.support.len();
        let k2 = self.k2();
        let eta = self.field.values();
        let cols: Vec<Vec<Complex64>> = self
            .support
            .par_iter()
            .enumerate()
            .map(|(col, &m)| {
                (0..n)
                    .map(|row| {
                        let j = self.support[row];
                        let id = if row == col { 1.0 } else { 0.0 };
                        id - k2 * eta[m] * self.table.get(&self.indices[j], &self.indices[m])
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |r, c| cols[c][r])
    }

    /// `k^2 sum_m G_eff(j, m) eta_m u_m` at every target cell `j` in `targets`.
    fn coupling(&self, targets: &[usize], u_support: &[Complex64]) -> Vec<Complex64> {
        let k2 = self.k2();
        let eta = self.field.values();
        targets
            .par_iter()
            .map(|&j| {
                let terms: Vec<Complex64> = self
                    .support
                    .iter()
                    .zip(u_support)
                    .map(|(&m, &u)| self.table.get(&self.indices[j], &self.indices[m]) * (eta[m] * u))
                    .collect();
                pairwise_sum_complex(&terms) * k2
            })
            .collect()
    }

    /// One sweep of the scattering operator, `k^2 G_eff eta u`, on every cell.
    pub fn apply_scattering(&self, u: &[Complex64]) -> Vec<Complex64> {
        let us: Vec<Complex64> = self.support.iter().map(|&m| u[m]).collect();
        let all: Vec<usize> = (0..self.indices.len()).collect();
        self.coupling(&all, &us)
    }

    fn support_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let coupled = self.coupling(&self.support, x);
        x.iter().zip(coupled).map(|(a, b)| a - b).collect()
    }

    /// Incident field of a source with amplitude `amplitude` at `source`.
    ///
    /// The cell containing the source carries the cell average of `G`.
    pub fn incident_field(&self, source: &Point, amplitude: f64) -> Result<Vec<Complex64>> {
        let grid = self.field.grid();
        let own = grid.cell_of(source);
        let avg = cell_green_integral(grid.dim(), grid.spacing(), self.k)? / grid.cell_volume();
        grid.centers()
            .par_iter()
            .enumerate()
            .map(|(c, rc)| {
                let g = if Some(c) == own {
                    avg
                } else {
                    crate::greens::greens(grid.dim(), rc, source, self.k)?
                };
                Ok(g * amplitude)
            })
            .collect()
    }

    /// Total field for one source.
    pub fn solve(&self, source: &Point, amplitude: f64) -> Result<FieldSolution> {
        let incident = self.incident_field(source, amplitude)?;
        let grid = self.field.grid().clone();
        if self.support.is_empty() {
            return Ok(FieldSolution {
                grid,
                total_field: incident.clone(),
                incident_field: incident,
            });
        }
        let b: Vec<Complex64> = self.support.iter().map(|&m| incident[m]).collect();
        let x = match &self.solver {
            Solver::Dense(lu) => {
                let sol = lu
                    .solve(&DVector::from_column_slice(&b))
                    .ok_or_else(|| Error::SolverFailure("LU back-substitution failed".into()))?;
                sol.as_slice().to_vec()
            }
            Solver::Iterative => self.gmres(&b)?,
        };
        let residual = self.relative_residual(&x, &b);
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::SolverFailure(format!(
                "coupled-dipole residual {residual:e} exceeds {RESIDUAL_TOL:e}"
            )));
        }
        let all: Vec<usize> = (0..self.indices.len()).collect();
        let scattered = self.coupling(&all, &x);
        let total = incident.iter().zip(scattered).map(|(a, b)| a + b).collect();
        Ok(FieldSolution {
            grid,
            total_field: total,
            incident_field: incident,
        })
    }

    fn relative_residual(&self, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = self.support_matvec(x);
        let num: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
    fn gmres(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = b.len();
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let bnorm = norm(b);
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let target = 0.1 * RESIDUAL_TOL * bnorm;
        let mut iters = 0;
        let mut last = f64::INFINITY;
        while iters < GMRES_MAX_ITER {
            let ax = self.support_matvec(&x);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let beta = norm(&r);
            last = beta;
            if beta <= target {
                return Ok(x);
            }
            let m = GMRES_RESTART;
            let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
            let mut hess = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
            let mut cs = vec![Complex64::new(0.0, 0.0); m];
            let mut sn = vec![Complex64::new(0.0, 0.0); m];
            let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
            g[0] = Complex64::new(beta, 0.0);
            let mut used = 0;
            for j in 0..m {
                let mut w = self.support_matvec(&basis[j]);
                for (i, v) in basis.iter().enumerate() {
                    let hij: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    hess[i][j] = hij;
                    w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
                }
                let wn = norm(&w);
                hess[j + 1][j] = Complex64::new(wn, 0.0);
                for i in 0..j {
                    let t = cs[i].conj() * hess[i][j] + sn[i].conj() * hess[i + 1][j];
                    hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                    hess[i][j] = t;
                }
                let (a, bb) = (hess[j][j], hess[j + 1][j]);
                let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
                if d == 0.0 {
                    return Err(Error::SolverFailure("GMRES breakdown".into()));
                }
                cs[j] = a / d;
                sn[j] = bb / d;
                hess[j][j] = Complex64::new(d, 0.0);
                hess[j + 1][j] = Complex64::new(0.0, 0.0);
                g[j + 1] = -sn[j] * g[j];
                g[j] = cs[j].conj() * g[j];
                used = j + 1;
                iters += 1;
                if g[j + 1].norm() <= target || wn == 0.0 {
                    break;
                }
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            let mut y = vec![Complex64::new(0.0, 0.0); used];
            for i in (0..used).rev() {
                let mut s = g[i];
                for l in i + 1..used {
                    s -= hess[i][l] * y[l];
                }
                y[i] = s / hess[i][i];
            }
            for (i, yi) in y.iter().enumerate() {
                x.iter_mut().zip(&basis[i]).for_each(|(xk, vk)| *xk += yi * vk);
            }
        }
        Err(Error::SolverFailure(format!(
            "GMRES did not converge in {GMRES_MAX_ITER} iterations (residual {:e})",
            last / bnorm
        )))
    }

    /// Far-field amplitude `k^p sum_j e^{-ik r_hat . r_j} eta_j U_j h^dim`
    /// for every detector.
    pub fn amplitude_from_field(&self, total: &[Complex64], detectors: &DetectorSet) -> Vec<Complex64> {
        let grid = self.field.grid();
        let pre = self.k.amplitude_prefactor(grid.dim()) * grid.cell_volume();
        let centers = grid.centers();
        let kv = self.k.value();
        detectors
            .directions()
            .iter()
            .map(|d| {
                let terms: Vec<Complex64> = self
                    .field
                    .values()
                    .iter()
                    .zip(total)
                    .zip(&centers)
                    .map(|((&e, &u), rc)| Complex64::from_polar(1.0, -kv * dot3(d, rc)) * (e * u))
                    .collect();
                pairwise_sum_complex(&terms) * pre
            })
            .collect()
    }
}

/// Total field inside the medium for a single source of unit amplitude.
pub fn coupled_dipole_solve(
    field: &SusceptibilityField,
    source: &Point,
    k: Wavenumber,
    mode: AccuracyMode,
) -> Result<FieldSolution> {
    CoupledDipoleSystem::new(field, k, mode)?.solve(source, 1.0)
}

/// Amplitudes computed from the full-wave field instead of the incident field.
pub fn full_wave_amplitude(
    field: &SusceptibilityField,
    sources: &SourceSet,
    detectors: &DetectorSet,
    k: Wavenumber,
    mode: AccuracyMode,
) -> Result<ScatteringData> {
    if sources.dim() != field.grid().dim() || detectors.dim() != field.grid().dim() {
        return invalid("field, sources and detectors must share a dimension");
    }
    if !sources.all_inside(field.grid()) {
        return invalid("all sources must lie inside the grid box");
    }
    let sys = CoupledDipoleSystem::new(field, k, mode)?;
    let rows = sources
        .positions()
        .par_iter()
        .zip(sources.amplitudes().par_iter())
        .map(|(p, &a)| {
            let sol = sys.solve(p, a)?;
            Ok(sys.amplitude_from_field(&sol.total_field, detectors))
        })
        .collect::<Result<Vec<_>>>()?;
    ScatteringData::new(rows.concat(), sources.clone(), detectors.clone(), k)
}
