use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{NoiseMeta, ScatteringData};
use crate::error::{invalid, Result};
use crate::scene::SourceSet;

/// Gaussian perturbation of amplitudes and source positions.
///
/// Amplitude noise has standard deviation `level * amplitude_scale` (split
/// evenly between real and imaginary parts); positions are perturbed per
/// coordinate with standard deviation `level * position_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub level: f64,
    /// Reference amplitude; `None` uses the RMS of `|A|`.
    pub amplitude_scale: Option<f64>,
    /// Reference length, normally the domain side.
    pub position_scale: f64,
}

impl NoiseModel {
    pub fn new(level: f64, domain_side: f64) -> Self {
        Self {
            level,
            amplitude_scale: None,
            position_scale: domain_side,
        }
    }
}

/// Noisy copy of `data` and the perturbed source positions.
///
/// Draw order is fixed: real then imaginary part of every amplitude in
/// row-major order, then every source coordinate.
pub fn add_noise(
    data: &ScatteringData,
    sources: &SourceSet,
    model: &NoiseModel,
    seed: u64,
) -> Result<(ScatteringData, SourceSet)> {
    if !(model.level >= 0.0) || !model.level.is_finite() {
        return invalid(format!("noise level must be non-negative, got {}", model.level));
    }
    if sources.len() != data.n_sources() {
        return invalid("source set does not match the data rows");
    }
    if model.level == 0.0 {
        return Ok((data.clone(), sources.clone()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reference = model.amplitude_scale.unwrap_or_else(|| data.rms());
    let sigma = model.level * reference / std::f64::consts::SQRT_2;
    let amplitudes: Vec<Complex64> = data
        .amplitudes()
        .iter()
        .map(|a| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            a + Complex64::new(re, im) * sigma
        })
        .collect();
    let pos_sigma = model.level * model.position_scale;
    let dim = sources.dim();
    let positions = sources
        .positions()
        .iter()
        .map(|p| {
            let mut q = *p;
            for v in q.iter_mut().take(dim) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += z * pos_sigma;
            }
            q
        })
        .collect();
    let perturbed = SourceSet::with_amplitudes(dim, positions, sources.amplitudes().to_vec())?;
    let noisy = ScatteringData::new(amplitudes, perturbed.clone(), data.detectors().clone(), data.k())?
        .with_noise_meta(Some(NoiseMeta {
            seed,
            level: model.level,
        }));
    Ok((noisy, perturbed))
}
