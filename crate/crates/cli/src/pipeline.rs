//! Stage-by-stage experiment runner.
//!
//! Every stage reads its inputs from the run directory and writes its outputs
//! back, so the stages can be run one at a time or chained by
//! [`run_pipeline`]. Planar three-ball runs are a stack of independent layer
//! problems; their files carry a `layerNN_` prefix.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use inscat_core::array_file::ArrayFile;
use inscat_core::forward::{add_noise, born_amplitude, full_wave_amplitude, NoiseModel};
use inscat_core::inversion::{
    amplitude_chi_squared, assemble_slices, baseline_linear_inversion, delta_error, reconstruct, ReconstructOptions,
};
use inscat_core::numeric::{pairwise_sum, Point};
use inscat_core::rkhs::{CoordinateFrame, RepresenterModel};
use inscat_core::scene::{
    gaussian_bump, l_shape_detectors, lattice_sources, place_sources_random, three_ball_phantom_scaled, ThreeBall,
};
use inscat_core::{
    DetectorSet, Error as CoreError, ReconstructedField, ScatteringData, SobolevKernel, SobolevKernelSpec, SourceSet,
    SusceptibilityField, VoxelGrid,
};
use num_complex::Complex64;

use crate::config::{ConfigTable, Engine, ExperimentConfig, PhantomKind, SourceLayout};
use crate::error::{CliError, CliResult, StageExt};
use crate::render::write_slice;

pub const MANIFEST: &str = "manifest.cfg";
pub const METRICS: &str = "metrics.txt";
pub const STATUS: &str = "status.txt";

/// One independent scattering problem of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    /// File prefix; empty for single-problem runs.
    pub name: String,
    /// Plane height of a three-ball layer.
    pub height: Option<f64>,
}

/// Output directory of a run.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn file(&self, unit: &Unit, stem: &str) -> PathBuf {
        if unit.name.is_empty() {
            self.root.join(stem)
        } else {
            self.root.join(format!("{}_{stem}", unit.name))
        }
    }

    pub fn shared(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn read(path: &Path) -> CliResult<ArrayFile> {
    if !path.exists() {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing input {}; run the earlier stages first", path.display()),
        )));
    }
    ArrayFile::read(path).stage("io")
}

fn write_real(path: &Path, dims: &[usize], values: Vec<f64>) -> CliResult<()> {
    let dims = dims.iter().map(|&d| d as u64).collect();
    ArrayFile::real(dims, values).and_then(|a| a.write(path)).stage("io")
}

fn write_complex(path: &Path, dims: &[usize], values: Vec<Complex64>) -> CliResult<()> {
    let dims = dims.iter().map(|&d| d as u64).collect();
    ArrayFile::complex(dims, values).and_then(|a| a.write(path)).stage("io")
}

fn write_points(path: &Path, dim: usize, points: &[Point]) -> CliResult<()> {
    let flat = points.iter().flat_map(|p| p[..dim].to_vec()).collect();
    write_real(path, &[points.len(), dim], flat)
}

fn read_points(path: &Path, dim: usize) -> CliResult<Vec<Point>> {
    let a = read(path)?;
    if a.dims.len() != 2 || a.dims[1] != dim as u64 {
        return Err(CliError::Stage {
            stage: "io",
            source: CoreError::Format(format!("{} does not hold {dim}-dimensional points", path.display())),
        });
    }
    let v = a.as_real().stage("io")?;
    Ok(v.chunks(dim)
        .map(|c| {
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(c);
            p
        })
        .collect())
}

/// Simple `key=value` text records.
fn write_records(path: &Path, records: &[(String, String)]) -> CliResult<()> {
    let mut out = String::new();
    for (k, v) in records {
        let _ = writeln!(out, "{k}={v}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_records(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn record_f64(records: &HashMap<String, String>, key: &str, path: &Path) -> CliResult<f64> {
    records
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Stage {
            stage: "io",
            source: CoreError::Format(format!("{} lacks a numeric `{key}`", path.display())),
        })
}

pub fn forward_grid(cfg: &ExperimentConfig) -> CliResult<VoxelGrid> {
    VoxelGrid::new(cfg.dim, &cfg.forward.shape, cfg.forward.spacing, &vec![0.0; cfg.dim]).stage("phantom")
}

/// Reconstruction grid; by default centred in the forward box.
pub fn recon_grid(cfg: &ExperimentConfig) -> CliResult<VoxelGrid> {
    let fwd = forward_grid(cfg)?;
    let origin = match &cfg.recon.origin {
        Some(o) => o.clone(),
        None => fwd
            .extent()
            .iter()
            .zip(&cfg.recon.shape)
            .map(|(e, &n)| 0.5 * (e - n as f64 * cfg.recon.spacing))
            .collect(),
    };
    VoxelGrid::new(cfg.dim, &cfg.recon.shape, cfg.recon.spacing, &origin).stage("invert")
}

fn three_ball(cfg: &ExperimentConfig) -> ThreeBall {
    ThreeBall::scaled(cfg.phantom.scale)
}

pub fn units(cfg: &ExperimentConfig) -> Vec<Unit> {
    if cfg.layered() {
        let heights = three_ball(cfg).layer_heights(cfg.phantom.n_layers);
        cfg.phantom
            .layers
            .iter()
            .map(|&l| Unit {
                name: format!("layer{l:02}"),
                height: Some(heights[l - 1]),
            })
            .collect()
    } else {
        vec![Unit {
            name: String::new(),
            height: None,
        }]
    }
}

fn truth_field(cfg: &ExperimentConfig, unit: &Unit) -> CliResult<SusceptibilityField> {
    let grid = forward_grid(cfg)?;
    let field = match cfg.phantom.kind {
        PhantomKind::ThreeBall => match unit.height {
            Some(z) => {
                let tb = three_ball(cfg);
                let ext = grid.extent();
                tb.validate(&[ext[0], ext[1], tb.z_band().1 + tb.clearance])
                    .and_then(|_| tb.layer_field(&grid, z))
            }
            None => three_ball_phantom_scaled(&grid, cfg.phantom.scale),
        },
        PhantomKind::Gaussian => {
            let mut c = [0.0; 3];
            match &cfg.phantom.bump_center {
                Some(v) => c[..cfg.dim].copy_from_slice(v),
                None => {
                    for (a, e) in grid.extent().iter().enumerate() {
                        c[a] = 0.5 * e;
                    }
                }
            }
            gaussian_bump(&grid, c, cfg.phantom.bump_sigma, cfg.phantom.bump_amplitude)
        }
        PhantomKind::Zero => Ok(SusceptibilityField::zeros(grid)),
    };
    field.stage("phantom")
}

fn read_truth(cfg: &ExperimentConfig, dir: &RunDir, unit: &Unit) -> CliResult<SusceptibilityField> {
    let a = read(&dir.file(unit, "phantom.scat"))?;
    SusceptibilityField::new(forward_grid(cfg)?, a.as_real().stage("io")?.to_vec()).stage("io")
}

/// Reuse of earlier layer results whose inputs are byte-identical.
struct Dedup {
    enabled: bool,
    seen: HashMap<Vec<u8>, Unit>,
}

impl Dedup {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            enabled: cfg.dedup_layers && cfg.layered(),
            seen: HashMap::new(),
        }
    }

    /// The earlier unit with identical inputs, recording `unit` otherwise.
    fn check(&mut self, dir: &RunDir, unit: &Unit, inputs: &[&str]) -> CliResult<Option<Unit>> {
        if !self.enabled {
            return Ok(None);
        }
        let mut key = Vec::new();
        for stem in inputs {
            key.extend(std::fs::read(dir.file(unit, stem))?);
        }
        if let Some(prev) = self.seen.get(&key) {
            return Ok(Some(prev.clone()));
        }
        self.seen.insert(key, unit.clone());
        Ok(None)
    }

    fn copy(dir: &RunDir, from: &Unit, to: &Unit, outputs: &[&str]) -> CliResult<()> {
        log::info!("{} has the same inputs as {}; reusing its results", to.name, from.name);
        for stem in outputs {
            let src = dir.file(from, stem);
            if src.exists() {
                std::fs::copy(src, dir.file(to, stem))?;
            }
        }
        Ok(())
    }
}

pub fn stage_phantom(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<()> {
    for unit in units(cfg) {
        let f = truth_field(cfg, &unit)?;
        let shape = f.grid().shape().to_vec();
        write_real(&dir.file(&unit, "phantom.scat"), &shape, f.into_values())?;
    }
    Ok(())
}

fn make_sources(cfg: &ExperimentConfig, grid: &VoxelGrid) -> CliResult<SourceSet> {
    match cfg.layout {
        SourceLayout::Random => place_sources_random(grid, cfg.n_sources, cfg.source_seed),
        SourceLayout::Lattice => lattice_sources(grid, cfg.lattice),
    }
    .stage("forward")
}

fn detectors(cfg: &ExperimentConfig) -> CliResult<DetectorSet> {
    l_shape_detectors(cfg.dim, cfg.n_detectors).stage("forward")
}

const FORWARD_OUT: &[&str] = &["data_clean.scat", "data.scat", "fit_sources.scat"];

/// Simulated measurements. Sources and the noise seed are shared by all
/// layers, so mirror-symmetric layers see identical data.
pub fn stage_forward(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<()> {
    let grid = forward_grid(cfg)?;
    let sources = make_sources(cfg, &grid)?;
    let dets = detectors(cfg)?;
    write_points(&dir.shared("sources.scat"), cfg.dim, sources.positions())?;
    write_points(&dir.shared("detectors.scat"), cfg.dim, dets.directions())?;
    let noise = NoiseModel {
        level: cfg.noise_level,
        amplitude_scale: cfg.noise_amplitude_scale,
        position_scale: cfg.noise_position_scale.unwrap_or(grid.domain_side()),
    };
    let mut dedup = Dedup::new(cfg);
    for unit in units(cfg) {
        if let Some(prev) = dedup.check(dir, &unit, &["phantom.scat"])? {
            Dedup::copy(dir, &prev, &unit, FORWARD_OUT)?;
            continue;
        }
        let truth = read_truth(cfg, dir, &unit)?;
        let clean = match cfg.engine {
            Engine::Born => born_amplitude(&truth, &sources, &dets, cfg.k, cfg.accuracy),
            Engine::FullWave => full_wave_amplitude(&truth, &sources, &dets, cfg.k, cfg.accuracy),
        }
        .stage("forward")?;
        let (noisy, moved) = add_noise(&clean, &sources, &noise, cfg.noise_seed).stage("noise")?;
        let dims = [sources.len(), dets.len()];
        write_complex(&dir.file(&unit, "data_clean.scat"), &dims, clean.amplitudes().to_vec())?;
        write_complex(&dir.file(&unit, "data.scat"), &dims, noisy.amplitudes().to_vec())?;
        write_points(&dir.file(&unit, "fit_sources.scat"), cfg.dim, moved.positions())?;
    }
    Ok(())
}

/// Measured data attached to the source positions used for fitting.
fn read_data(cfg: &ExperimentConfig, dir: &RunDir, unit: &Unit) -> CliResult<ScatteringData> {
    let positions = if cfg.fit_true_positions {
        read_points(&dir.shared("sources.scat"), cfg.dim)?
    } else {
        read_points(&dir.file(unit, "fit_sources.scat"), cfg.dim)?
    };
    let sources = SourceSet::new(cfg.dim, positions).stage("io")?;
    let dets = DetectorSet::new(cfg.dim, read_points(&dir.shared("detectors.scat"), cfg.dim)?).stage("io")?;
    let amps = read(&dir.file(unit, "data.scat"))?;
    ScatteringData::new(amps.as_complex().stage("io")?.to_vec(), sources, dets, cfg.k).stage("io")
}

pub fn kernel(cfg: &ExperimentConfig) -> CliResult<Arc<SobolevKernel>> {
    let s = if cfg.dim == 2 { 3 } else { 4 };
    let spec = SobolevKernelSpec::new(2 * cfg.dim, s, cfg.quadrature).stage("fit")?;
    Ok(Arc::new(SobolevKernel::new(spec).stage("fit")?))
}

fn frame(cfg: &ExperimentConfig) -> CliResult<CoordinateFrame> {
    let l = match cfg.length_scale {
        Some(l) => l,
        None => forward_grid(cfg)?.domain_side(),
    };
    CoordinateFrame::new(l).stage("fit")
}

const FIT_OUT: &[&str] = &[
    "model_centers.scat",
    "model_coefficients.scat",
    "model_fitted.scat",
    "model.txt",
];

pub fn stage_fit(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<()> {
    let kern = kernel(cfg)?;
    let frame = frame(cfg)?;
    let positions = if cfg.fit_true_positions {
        "data.scat"
    } else {
        "fit_sources.scat"
    };
    let mut dedup = Dedup::new(cfg);
    for unit in units(cfg) {
        if let Some(prev) = dedup.check(dir, &unit, &["data.scat", positions])? {
            Dedup::copy(dir, &prev, &unit, FIT_OUT)?;
            continue;
        }
        let data = read_data(cfg, dir, &unit)?;
        let model = RepresenterModel::fit(kern.clone(), &data, frame, cfg.lambda).stage("fit")?;
        let n = model.centers().len();
        let flat = model.centers().iter().flatten().copied().collect();
        write_real(&dir.file(&unit, "model_centers.scat"), &[n, 2 * cfg.dim], flat)?;
        write_complex(
            &dir.file(&unit, "model_coefficients.scat"),
            &[n],
            model.coefficients().to_vec(),
        )?;
        let fitted = model.fitted_values().stage("fit")?;
        write_complex(
            &dir.file(&unit, "model_fitted.scat"),
            &[data.n_sources(), data.n_detectors()],
            fitted,
        )?;
        write_records(
            &dir.file(&unit, "model.txt"),
            &[
                ("lambda".into(), format!("{:e}", model.lambda())),
                ("length_scale".into(), format!("{:e}", frame.length_scale)),
                ("stationarity".into(), format!("{:e}", model.stationarity())),
                ("kernel_dim".into(), kern.spec().d_in.to_string()),
                ("kernel_smoothness".into(), kern.spec().s.to_string()),
            ],
        )?;
    }
    Ok(())
}

pub fn load_model(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    unit: &Unit,
    kern: Arc<SobolevKernel>,
) -> CliResult<RepresenterModel> {
    let meta_path = dir.file(unit, "model.txt");
    let meta = read_records(&meta_path)?;
    let lambda = record_f64(&meta, "lambda", &meta_path)?;
    let frame = CoordinateFrame::new(record_f64(&meta, "length_scale", &meta_path)?).stage("io")?;
    let centers = read(&dir.file(unit, "model_centers.scat"))?;
    let d_in = 2 * cfg.dim;
    let centers: Vec<Vec<f64>> = centers
        .as_real()
        .stage("io")?
        .chunks(d_in)
        .map(<[f64]>::to_vec)
        .collect();
    let coeffs = read(&dir.file(unit, "model_coefficients.scat"))?;
    let coeffs = coeffs.as_complex().stage("io")?.to_vec();
    RepresenterModel::from_parts(kern, frame, centers, coeffs, lambda).stage("io")
}

const INVERT_OUT: &[&str] = &[
    "recon.scat",
    "recon_complex.scat",
    "outside_hull.scat",
    "occupancy.scat",
    "recon.pgm",
    "baseline.scat",
    "baseline_predicted.scat",
];

fn occupancy(values: &[f64], threshold: f64) -> Vec<f64> {
    values.iter().map(|&v| if v >= threshold { 1.0 } else { 0.0 }).collect()
}

fn write_recon(cfg: &ExperimentConfig, dir: &RunDir, unit: &Unit, r: &ReconstructedField) -> CliResult<()> {
    let shape = r.grid.shape().to_vec();
    write_real(&dir.file(unit, "recon.scat"), &shape, r.values.clone())?;
    write_complex(&dir.file(unit, "recon_complex.scat"), &shape, r.values_complex.clone())?;
    let flags = r.outside_hull.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_real(&dir.file(unit, "outside_hull.scat"), &shape, flags)?;
    write_real(
        &dir.file(unit, "occupancy.scat"),
        &shape,
        occupancy(&r.values, cfg.threshold),
    )?;
    if r.grid.dim() == 2 {
        write_slice(&dir.file(unit, "recon.pgm"), r, 0, cfg.render_range)?;
    } else {
        for z in 0..shape[2] {
            write_slice(&dir.file(unit, &format!("recon_z{z:02}.pgm")), r, z, cfg.render_range)?;
        }
    }
    Ok(())
}

pub fn stage_invert(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<()> {
    let kern = kernel(cfg)?;
    let grid = recon_grid(cfg)?;
    let all = DetectorSet::new(cfg.dim, read_points(&dir.shared("detectors.scat"), cfg.dim)?).stage("io")?;
    let blocks = if cfg.all_detector_blocks {
        all
    } else {
        all.subset(&[0]).stage("invert")?
    };
    let mut dedup = Dedup::new(cfg);
    let mut layers = Vec::new();
    for unit in units(cfg) {
        let inputs = [
            "model_centers.scat",
            "model_coefficients.scat",
            "model.txt",
            "data.scat",
        ];
        if let Some(prev) = dedup.check(dir, &unit, &inputs)? {
            Dedup::copy(dir, &prev, &unit, INVERT_OUT)?;
            let r = read(&dir.file(&unit, "recon_complex.scat"))?;
            let mut field =
                ReconstructedField::from_complex(grid.clone(), r.as_complex().stage("io")?.to_vec()).stage("io")?;
            let flags = read(&dir.file(&unit, "outside_hull.scat"))?;
            field.outside_hull = flags.as_real().stage("io")?.iter().map(|&v| v != 0.0).collect();
            layers.push(field);
            continue;
        }
        let model = load_model(cfg, dir, &unit, kern.clone())?;
        let r = reconstruct(&model, &grid, &blocks, cfg.k, ReconstructOptions::default()).stage("invert")?;
        write_recon(cfg, dir, &unit, &r)?;
        if let Some(rcond) = cfg.baseline {
            let data = read_data(cfg, dir, &unit)?;
            let fwd = forward_grid(cfg)?;
            let base = baseline_linear_inversion(&data, &fwd, rcond, cfg.accuracy).stage("baseline")?;
            write_real(&dir.file(&unit, "baseline.scat"), fwd.shape(), base.field.values)?;
            let dims = [data.n_sources(), data.n_detectors()];
            write_complex(&dir.file(&unit, "baseline_predicted.scat"), &dims, base.predicted)?;
        }
        layers.push(r);
    }
    if cfg.layered() {
        let heights: Vec<f64> = units(cfg).iter().filter_map(|u| u.height).collect();
        let z0 = heights[0] - 0.5 * grid.spacing();
        let vol = assemble_slices(&layers, z0, Some(heights.clone())).stage("invert")?;
        let shape = vol.grid.shape().to_vec();
        write_real(&dir.shared("volume.scat"), &shape, vol.values.clone())?;
        write_real(
            &dir.shared("volume_occupancy.scat"),
            &shape,
            occupancy(&vol.values, cfg.threshold),
        )?;
        write_real(&dir.shared("volume_heights.scat"), &[heights.len()], heights)?;
    }
    Ok(())
}

/// Metrics of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitReport {
    pub name: String,
    /// `None` when the data are identically zero.
    pub chi2: Option<f64>,
    pub delta: f64,
    pub data_energy: f64,
    pub imag_max: f64,
    pub outside_hull: usize,
    pub lambda: f64,
    pub stationarity: f64,
    pub baseline_chi2: Option<f64>,
    pub baseline_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub label: String,
    pub units: Vec<UnitReport>,
    pub chi2: Option<f64>,
    pub delta: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:e}"))
}

impl RunReport {
    pub fn records(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("label".to_string(), self.label.clone()),
            ("units".to_string(), self.units.len().to_string()),
            ("chi2".to_string(), fmt_opt(self.chi2)),
            ("delta".to_string(), format!("{:e}", self.delta)),
        ];
        for u in &self.units {
            let p = if u.name.is_empty() {
                String::new()
            } else {
                format!("{}.", u.name)
            };
            let mut push = |k: &str, v: String| out.push((format!("{p}{k}"), v));
            if !u.name.is_empty() {
                push("chi2", fmt_opt(u.chi2));
                push("delta", format!("{:e}", u.delta));
            }
            push("imag_max", format!("{:e}", u.imag_max));
            push("outside_hull", u.outside_hull.to_string());
            push("lambda", format!("{:e}", u.lambda));
            push("stationarity", format!("{:e}", u.stationarity));
            if u.baseline_chi2.is_some() || u.baseline_delta.is_some() {
                push("baseline_chi2", fmt_opt(u.baseline_chi2));
                push("baseline_delta", fmt_opt(u.baseline_delta));
            }
        }
        out
    }
}

fn chi2_or_undefined(r: inscat_core::Result<f64>) -> CliResult<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::UndefinedMetric(msg)) => {
            log::warn!("{msg}");
            Ok(None)
        }
        Err(e) => Err(CliError::Stage {
            stage: "metrics",
            source: e,
        }),
    }
}

pub fn stage_metrics(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<RunReport> {
    let grid = recon_grid(cfg)?;
    let mut reports = Vec::new();
    for unit in units(cfg) {
        let truth = read_truth(cfg, dir, &unit)?;
        let data = read_data(cfg, dir, &unit)?;
        let fitted = read(&dir.file(&unit, "model_fitted.scat"))?;
        let chi2 = chi2_or_undefined(amplitude_chi_squared(&data, fitted.as_complex().stage("io")?))?;
        let rc = read(&dir.file(&unit, "recon_complex.scat"))?;
        let mut recon =
            ReconstructedField::from_complex(grid.clone(), rc.as_complex().stage("io")?.to_vec()).stage("io")?;
        let flags = read(&dir.file(&unit, "outside_hull.scat"))?;
        recon.outside_hull = flags.as_real().stage("io")?.iter().map(|&v| v != 0.0).collect();
        let delta = delta_error(&truth, &recon).stage("metrics")?;
        let meta_path = dir.file(&unit, "model.txt");
        let meta = read_records(&meta_path)?;
        let (mut baseline_chi2, mut baseline_delta) = (None, None);
        if cfg.baseline.is_some() {
            let pred = read(&dir.file(&unit, "baseline_predicted.scat"))?;
            baseline_chi2 = chi2_or_undefined(amplitude_chi_squared(&data, pred.as_complex().stage("io")?))?;
            let b = read(&dir.file(&unit, "baseline.scat"))?;
            let field =
                ReconstructedField::from_real(forward_grid(cfg)?, b.as_real().stage("io")?.to_vec()).stage("io")?;
            baseline_delta = Some(delta_error(&truth, &field).stage("metrics")?);
        }
        let energy: Vec<f64> = data.amplitudes().iter().map(|a| a.norm_sqr()).collect();
        reports.push(UnitReport {
            name: unit.name.clone(),
            chi2,
            delta,
            data_energy: pairwise_sum(&energy),
            imag_max: recon.imag_max(),
            outside_hull: recon.n_outside_hull(),
            lambda: record_f64(&meta, "lambda", &meta_path)?,
            stationarity: record_f64(&meta, "stationarity", &meta_path)?,
            baseline_chi2,
            baseline_delta,
        });
    }
    // every unit has the same cell count, so the overall mean error is the
    // mean of the unit means; chi^2 pools residual and data energy
    let deltas: Vec<f64> = reports.iter().map(|u| u.delta).collect();
    let delta = pairwise_sum(&deltas) / deltas.len() as f64;
    let chi2 = if reports.iter().all(|u| u.chi2.is_some()) {
        let num: Vec<f64> = reports.iter().map(|u| u.chi2.unwrap() * u.data_energy).collect();
        let den: Vec<f64> = reports.iter().map(|u| u.data_energy).collect();
        Some(pairwise_sum(&num) / pairwise_sum(&den))
    } else {
        None
    };
    let report = RunReport {
        label: cfg.label.clone(),
        units: reports,
        chi2,
        delta,
    };
    write_records(&dir.shared(METRICS), &report.records())?;
    Ok(report)
}

pub fn write_manifest(cfg: &ExperimentConfig, dir: &RunDir) -> CliResult<()> {
    let text = format!(
        "# inscat {} run manifest; rerun with `inscat pipeline --config {MANIFEST} --out <dir>`\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.table().to_manifest()
    );
    std::fs::write(dir.shared(MANIFEST), text)?;
    Ok(())
}

fn write_status(dir: &RunDir, lines: &[(&str, String)]) -> CliResult<()> {
    let records: Vec<(String, String)> = lines.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    write_records(&dir.shared(STATUS), &records)
}

/// All stages in order. On failure the status file names the failing stage
/// and marks the directory contents as partial.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunReport> {
    let dir = RunDir::create(out)?;
    write_manifest(cfg, &dir)?;
    write_status(&dir, &[("status", "running".into())])?;
    let result = (|| {
        stage_phantom(cfg, &dir)?;
        stage_forward(cfg, &dir)?;
        stage_fit(cfg, &dir)?;
        stage_invert(cfg, &dir)?;
        stage_metrics(cfg, &dir)
    })();
    match &result {
        Ok(_) => write_status(&dir, &[("status", "complete".into())])?,
        Err(e) => {
            let stage = match e {
                CliError::Stage { stage, .. } => stage.to_string(),
                _ => "unknown".into(),
            };
            write_status(
                &dir,
                &[
                    ("status", "failed (outputs are partial)".into()),
                    ("stage", stage),
                    ("error", e.to_string()),
                ],
            )?;
        }
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sources,
    Detectors,
    Lambda,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Sources => "sources.count",
            SweepAxis::Detectors => "detectors.count",
            SweepAxis::Lambda => "fit.lambda_rel",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sources => "sources",
            SweepAxis::Detectors => "detectors",
            SweepAxis::Lambda => "lambda",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "sources" => Ok(SweepAxis::Sources),
            "detectors" => Ok(SweepAxis::Detectors),
            "lambda" => Ok(SweepAxis::Lambda),
            _ => Err(CliError::Config(format!("unknown sweep axis `{s}`"))),
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub chi2: Option<f64>,
    pub delta: f64,
}

/// One pipeline run per value, each in `out/<axis>_<value>`; the table goes
/// to `out/sweep_<axis>.txt`.
pub fn sweep(base: &ConfigTable, axis: SweepAxis, values: &[String], out: &Path) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let mut configs = Vec::new();
    for v in values {
        if !v.parse::<f64>().is_ok_and(|x| x > 0.0) {
            return Err(CliError::Config(format!("sweep value `{v}` must be positive")));
        }
        let mut t = base.clone();
        t.set(axis.key(), v)?;
        configs.push(ExperimentConfig::from_table(&t)?);
    }
    std::fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for (v, cfg) in values.iter().zip(&configs) {
        let report = run_pipeline(cfg, &out.join(format!("{}_{v}", axis.name())))?;
        rows.push(SweepRow {
            value: v.clone(),
            chi2: report.chi2,
            delta: report.delta,
        });
    }
    let mut text = format!("{} chi2 delta\n", axis.name());
    for r in &rows {
        let _ = writeln!(text, "{} {} {:e}", r.value, fmt_opt(r.chi2), r.delta);
    }
    std::fs::write(out.join(format!("sweep_{}.txt", axis.name())), text)?;
    Ok(rows)
}
