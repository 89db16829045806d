//! Scattering amplitudes under the weak-scattering approximation, full-wave
//! amplitudes from a coupled-dipole solve, and measurement noise.

mod born;
mod dipole;
mod noise;

use num_complex::Complex64;

pub use born::{born_amplitude, BornOperator};
pub use dipole::{coupled_dipole_solve, full_wave_amplitude, CoupledDipoleSystem, FieldSolution};
pub use noise::{add_noise, NoiseModel};

use crate::error::{invalid, Result};
use crate::greens::Wavenumber;
use crate::scene::{DetectorSet, SourceSet};

/// Seed and level of the noise that was applied to a data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMeta {
    pub seed: u64,
    pub level: f64,
}

/// Complex amplitude matrix `A(r1, r2_hat)`: one row per source, one column
/// per detector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    amplitudes: Vec<Complex64>,
    sources: SourceSet,
    detectors: DetectorSet,
    k: Wavenumber,
    noise: Option<NoiseMeta>,
}

impl ScatteringData {
    pub fn new(amplitudes: Vec<Complex64>, sources: SourceSet, detectors: DetectorSet, k: Wavenumber) -> Result<Self> {
        if sources.dim() != detectors.dim() {
            return invalid("sources and detectors must share a dimension");
        }
        if amplitudes.len() != sources.len() * detectors.len() {
            return invalid(format!(
                "amplitude matrix has {} entries, expected {} x {}",
                amplitudes.len(),
                sources.len(),
                detectors.len()
            ));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return invalid("amplitudes must be finite");
        }
        Ok(Self {
            amplitudes,
            sources,
            detectors,
            k,
            noise: None,
        })
    }

    pub fn with_noise_meta(mut self, meta: Option<NoiseMeta>) -> Self {
        self.noise = meta;
        self
    }

    pub fn dim(&self) -> usize {
        self.sources.dim()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Total number of measurements `n = n_s * n_d`.
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn at(&self, source: usize, detector: usize) -> Complex64 {
        self.amplitudes[source * self.detectors.len() + detector]
    }

    pub fn sources(&self) -> &SourceSet {
        &self.sources
    }

    pub fn detectors(&self) -> &DetectorSet {
        &self.detectors
    }

    pub fn k(&self) -> Wavenumber {
        self.k
    }

    pub fn noise_meta(&self) -> Option<NoiseMeta> {
        self.noise
    }

    /// Same amplitudes attached to a different (e.g. perturbed) source set.
    pub fn with_sources(mut self, sources: SourceSet) -> Result<Self> {
        if sources.len() != self.sources.len() || sources.dim() != self.sources.dim() {
            return invalid("replacement source set must match in size and dimension");
        }
        self.sources = sources;
        Ok(self)
    }

    /// Every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.amplitudes.iter_mut().for_each(|a| *a *= factor);
        out
    }

    /// Root-mean-square of `|A|`.
    pub fn rms(&self) -> f64 {
        let sq: Vec<f64> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        (crate::numeric::pairwise_sum(&sq) / sq.len() as f64).sqrt()
    }
}
