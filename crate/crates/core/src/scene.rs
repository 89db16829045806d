//! Grids, susceptibility phantoms, source placements and detector sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::numeric::{dist3, Point};

/// Regular pixel (2D) or voxel (3D) grid with uniform spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dim: usize,
    shape: Vec<usize>,
    spacing: f64,
    origin: Vec<f64>,
}

/// Build a grid, validating dimension, shape and spacing.
pub fn make_grid(dim: usize, shape: &[usize], spacing: f64, origin: &[f64]) -> Result<VoxelGrid> {
    VoxelGrid::new(dim, shape, spacing, origin)
}

impl VoxelGrid {
    pub fn new(dim: usize, shape: &[usize], spacing: f64, origin: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return invalid(format!("grid dimension must be 2 or 3, got {dim}"));
        }
        if shape.len() != dim || origin.len() != dim {
            return invalid(format!(
                "shape and origin must have {dim} entries (got {} and {})",
                shape.len(),
                origin.len()
            ));
        }
        if shape.contains(&0) {
            return invalid("grid shape entries must be >= 1");
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return invalid(format!("grid spacing must be positive, got {spacing}"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return invalid("grid origin must be finite");
        }
        Ok(Self {
            dim,
            shape: shape.to_vec(),
            spacing,
            origin: origin.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    /// Cell measure `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Box extent along each axis.
    pub fn extent(&self) -> Vec<f64> {
        self.shape.iter().map(|&n| n as f64 * self.spacing).collect()
    }

    /// Largest box side, used as the normalisation length.
    pub fn domain_side(&self) -> f64 {
        self.extent().into_iter().fold(0.0, f64::max)
    }

    pub fn upper_corner(&self) -> Point {
        let mut p = [0.0; 3];
        for (a, (o, n)) in self.origin.iter().zip(&self.shape).enumerate() {
            p[a] = o + *n as f64 * self.spacing;
        }
        p
    }

    pub fn lower_corner(&self) -> Point {
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(&self.origin);
        p
    }

    /// Row-major flat index, last axis fastest.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        out
    }

    /// Center of the cell with the given flat index: `origin + (i + 1/2) h`.
    pub fn center(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.spacing;
        }
        p
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.n_cells()).map(|i| self.center(i)).collect()
    }

    /// True when `p` lies in the closed bounding box.
    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|a| {
            let lo = self.origin[a];
            let hi = lo + self.shape[a] as f64 * self.spacing;
            p[a] >= lo && p[a] <= hi
        })
    }

    /// Cell containing `p`. Points on an interior cell face belong to the
    /// lower-index cell; points on the outer faces belong to the boundary cell.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            let t = (p[a] - self.origin[a]) / self.spacing;
            let mut i = t.floor() as isize;
            if t == t.floor() && i > 0 {
                i -= 1;
            }
            idx[a] = (i.max(0) as usize).min(self.shape[a] - 1);
        }
        Some(self.flat_index(&idx[..self.dim]))
    }

    /// Emit a diagnostic when `k h` leaves the small-cell regime.
    pub fn check_wavenumber(&self, k: f64) -> bool {
        let kh = k * self.spacing;
        if kh >= crate::greens::KH_LIMIT {
            log::warn!("k*h = {kh:.4} is not small; singular-cell expansion may be inaccurate");
            false
        } else {
            true
        }
    }
}

/// Real susceptibility per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityField {
    grid: VoxelGrid,
    values: Vec<f64>,
}

impl SusceptibilityField {
    pub fn new(grid: VoxelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return invalid(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.n_cells()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("susceptibility values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: VoxelGrid) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Sample a function at cell centers.
    pub fn from_fn(grid: VoxelGrid, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = grid.centers().iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value of the cell containing `p`, or `None` outside the grid.
    pub fn value_at(&self, p: &Point) -> Option<f64> {
        self.grid.cell_of(p).map(|i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Two-dimensional cross-section at third-axis cell index `layer`.
    pub fn slice_layer(&self, layer: usize) -> Result<SusceptibilityField> {
        if self.grid.dim != 3 {
            return invalid("only 3D fields can be sliced");
        }
        let shape = self.grid.shape();
        if layer >= shape[2] {
            return invalid(format!("layer {layer} out of range 0..{}", shape[2]));
        }
        let g2 = VoxelGrid::new(2, &shape[..2], self.grid.spacing, &self.grid.origin[..2])?;
        let mut values = Vec::with_capacity(shape[0] * shape[1]);
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                values.push(self.values[self.grid.flat_index(&[i, j, layer])]);
            }
        }
        SusceptibilityField::new(g2, values)
    }
}

/// Point sources inside the medium.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    dim: usize,
    positions: Vec<Point>,
    amplitudes: Vec<f64>,
}

impl SourceSet {
    /// Unit-amplitude sources.
    pub fn new(dim: usize, positions: Vec<Point>) -> Result<Self> {
        let n = positions.len();
        Self::with_amplitudes(dim, positions, vec![1.0; n])
    }

    pub fn with_amplitudes(dim: usize, positions: Vec<Point>, amplitudes: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return invalid("source dimension must be 2 or 3");
        }
        if positions.is_empty() {
            return invalid("source set is empty");
        }
        if positions.len() != amplitudes.len() {
            return invalid("one amplitude per source required");
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("source positions must be finite");
        }
        Ok(Self {
            dim,
            positions,
            amplitudes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn all_inside(&self, grid: &VoxelGrid) -> bool {
        self.positions.iter().all(|p| grid.contains(p))
    }

    /// Positions mirrored about the plane `axis = center`.
    pub fn mirrored(&self, axis: usize, center: f64) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| {
                let mut q = *p;
                q[axis] = 2.0 * center - q[axis];
                q
            })
            .collect();
        Self {
            dim: self.dim,
            positions,
            amplitudes: self.amplitudes.clone(),
        }
    }
}

/// Far-field detector directions (unit vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSet {
    dim: usize,
    directions: Vec<Point>,
}

impl DetectorSet {
    pub fn new(dim: usize, directions: Vec<Point>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return invalid("detector dimension must be 2 or 3");
        }
        if directions.is_empty() {
            return invalid("detector set is empty");
        }
        for d in &directions {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return invalid(format!("detector direction {d:?} is not a unit vector"));
            }
            if dim == 2 && d[2] != 0.0 {
                return invalid("2D detector directions must have zero third component");
            }
        }
        Ok(Self { dim, directions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Point] {
        &self.directions
    }

    /// Keep only the listed detectors.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut dirs = Vec::with_capacity(indices.len());
        for &i in indices {
            match self.directions.get(i) {
                Some(d) => dirs.push(*d),
                None => return invalid(format!("detector index {i} out of range")),
            }
        }
        Self::new(self.dim, dirs)
    }
}

/// Detector directions equally spaced along an L-shaped path.
///
/// In 2D the `n_d` directions span 0° to 90° in the plane. In 3D the path runs
/// from the x axis up to the z axis and down to the y axis (180° in total); points
/// on the first quarter-arc lie in the x–z plane and the rest in the y–z plane,
/// so the shared z direction appears at most once.
pub fn l_shape_detectors(dim: usize, n_d: usize) -> Result<DetectorSet> {
    if n_d < 2 {
        return invalid("an L-shaped detector set needs at least 2 detectors");
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let dirs = match dim {
        2 => (0..n_d)
            .map(|i| {
                let a = half_pi * i as f64 / (n_d - 1) as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        3 => (0..n_d)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / (n_d - 1) as f64;
                if a <= half_pi {
                    [a.cos(), 0.0, a.sin()]
                } else {
                    let b = a - half_pi;
                    [0.0, b.sin(), b.cos()]
                }
            })
            .collect(),
        _ => return invalid("detector dimension must be 2 or 3"),
    };
    DetectorSet::new(dim, dirs)
}

/// `n_s` sources drawn uniformly inside the grid box, reproducible from `seed`.
pub fn place_sources_random(grid: &VoxelGrid, n_s: usize, seed: u64) -> Result<SourceSet> {
    if n_s == 0 {
        return invalid("n_s must be >= 1");
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let lo = grid.lower_corner();
    let ext = grid.extent();
    let positions = (0..n_s)
        .map(|_| {
            let mut p = [0.0; 3];
            for a in 0..grid.dim() {
                // open interval so that every source is strictly inside
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                p[a] = lo[a] + u * ext[a];
            }
            p
        })
        .collect();
    SourceSet::new(grid.dim(), positions)
}

/// Sources on the regular lattice `origin + (i + 1/2) * step`, `m` per axis.
pub fn lattice_sources(grid: &VoxelGrid, m: usize) -> Result<SourceSet> {
    if m == 0 {
        return invalid("lattice needs at least one point per axis");
    }
    let lo = grid.lower_corner();
    let ext = grid.extent();
    let dim = grid.dim();
    let total = m.pow(dim as u32);
    let positions = (0..total)
        .map(|mut flat| {
            let mut p = [0.0; 3];
            for a in (0..dim).rev() {
                let i = flat % m;
                flat /= m;
                p[a] = lo[a] + (i as f64 + 0.5) * ext[a] / m as f64;
            }
            p
        })
        .collect();
    SourceSet::new(dim, positions)
}

/// Three spheres in a 70×70×40 nm sample (all lengths in nm, multiplied by `scale`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeBall {
    pub centers: [Point; 3],
    pub radius: f64,
    pub etas: [f64; 3],
    pub clearance: f64,
    pub min_gap: f64,
    pub scale: f64,
}

impl ThreeBall {
    /// Reference geometry: radius 12, lowest points 3 above the bottom face,
    /// pairwise gaps of at least 5; susceptibilities 1.275, 1.275, 1.885.
    pub fn reference() -> Self {
        Self::scaled(1.0)
    }

    pub fn scaled(scale: f64) -> Self {
        let c = |x: f64, y: f64, z: f64| [x * scale, y * scale, z * scale];
        Self {
            centers: [c(20.0, 20.0, 15.0), c(50.0, 24.0, 15.0), c(33.0, 48.0, 15.0)],
            radius: 12.0 * scale,
            etas: [1.275, 1.275, 1.885],
            clearance: 3.0 * scale,
            min_gap: 5.0 * scale,
            scale,
        }
    }

    /// Surface gap between spheres `i` and `j`.
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        dist3(&self.centers[i], &self.centers[j]) - 2.0 * self.radius
    }

    /// Check clearance, gap and containment relative to a box `[lo, lo + extent]`.
    pub fn validate(&self, extent: &[f64]) -> Result<()> {
        if extent.len() != 3 {
            return Err(Error::GeometryInfeasible("three-ball model needs a 3D box".into()));
        }
        let tol = 1e-9 * self.scale.max(1.0);
        for (i, c) in self.centers.iter().enumerate() {
            if ((c[2] - self.radius) - self.clearance).abs() > tol {
                return Err(Error::GeometryInfeasible(format!(
                    "sphere {i} lowest point is not {} above the bottom face",
                    self.clearance
                )));
            }
            for a in 0..3 {
                if c[a] - self.radius < -tol || c[a] + self.radius > extent[a] + tol {
                    return Err(Error::GeometryInfeasible(format!(
                        "sphere {i} does not fit in box {extent:?}"
                    )));
                }
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if self.gap(i, j) < self.min_gap - tol {
                    return Err(Error::GeometryInfeasible(format!(
                        "spheres {i} and {j} are closer than {}",
                        self.min_gap
                    )));
                }
            }
        }
        Ok(())
    }

    /// Susceptibility at a point given relative to the box's lower corner.
    pub fn value_at(&self, p: &Point) -> f64 {
        let r2 = self.radius * self.radius;
        for (c, &eta) in self.centers.iter().zip(&self.etas) {
            let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < r2 {
                return eta;
            }
        }
        0.0
    }

    /// Height band `[lowest, highest]` occupied by the spheres.
    pub fn z_band(&self) -> (f64, f64) {
        let z = self.centers[0][2];
        (z - self.radius, z + self.radius)
    }

    /// `n_layers` plane heights evenly covering the occupied band, mirror
    /// symmetric about the common sphere-center height.
    pub fn layer_heights(&self, n_layers: usize) -> Vec<f64> {
        let (lo, hi) = self.z_band();
        let dz = (hi - lo) / n_layers as f64;
        let zc = self.centers[0][2];
        (0..n_layers)
            .map(|l| zc + (l as f64 - (n_layers as f64 - 1.0) / 2.0) * dz)
            .collect()
    }

    /// Cross-section at height `z` sampled on a 2D grid whose origin is the box corner.
    pub fn layer_field(&self, grid: &VoxelGrid, z: f64) -> Result<SusceptibilityField> {
        if grid.dim() != 2 {
            return invalid("layer grid must be 2D");
        }
        let o = grid.lower_corner();
        SusceptibilityField::from_fn(grid.clone(), |p| self.value_at(&[p[0] - o[0], p[1] - o[1], z]))
    }
}

/// Voxelised three-ball phantom on a 3D grid at reference scale.
pub fn three_ball_phantom(grid: &VoxelGrid) -> Result<SusceptibilityField> {
    three_ball_phantom_scaled(grid, 1.0)
}

/// Voxelised three-ball phantom with all lengths multiplied by `scale`.
///
/// A cell takes a sphere's value when its center lies inside that sphere.
pub fn three_ball_phantom_scaled(grid: &VoxelGrid, scale: f64) -> Result<SusceptibilityField> {
    if grid.dim() != 3 {
        return invalid("three-ball phantom requires a 3D grid");
    }
    if !(scale > 0.0) {
        return invalid("phantom scale must be positive");
    }
    let model = ThreeBall::scaled(scale);
    model.validate(&grid.extent())?;
    let o = grid.lower_corner();
    SusceptibilityField::from_fn(grid.clone(), |p| {
        model.value_at(&[p[0] - o[0], p[1] - o[1], p[2] - o[2]])
    })
}

/// Isotropic Gaussian bump `amplitude * exp(-|r - center|^2 / (2 sigma^2))`.
pub fn gaussian_bump(grid: &VoxelGrid, center: Point, sigma: f64, amplitude: f64) -> Result<SusceptibilityField> {
    if !(sigma > 0.0) {
        return invalid("bump width must be positive");
    }
    SusceptibilityField::from_fn(grid.clone(), |p| {
        let r2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
        amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}
