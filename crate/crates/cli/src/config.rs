//! Experiment configuration.
//!
//! Files are line-oriented `key = value` pairs grouped under `[section]`
//! headers. Every key has a default; unknown sections or keys are rejected so
//! that a typo cannot silently change an experiment. The fully resolved table
//! is written back as the run manifest, which therefore reproduces the run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ini::Ini;
use inscat_core::greens::AccuracyMode;
use inscat_core::rkhs::{Lambda, QuadratureConfig};
use inscat_core::Wavenumber;

use crate::error::{CliError, CliResult};

/// `(section, key, default)` for every accepted setting, in manifest order.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("experiment", "dim", "2"),
    ("experiment", "label", "run"),
    ("phantom", "kind", "three-ball"),
    ("phantom", "scale", "1"),
    ("phantom", "layers", "9"),
    ("phantom", "n_layers", "17"),
    ("phantom", "bump_center", "center"),
    ("phantom", "bump_sigma", "10"),
    ("phantom", "bump_amplitude", "0.1"),
    ("forward", "shape", "35,35"),
    ("forward", "spacing", "2"),
    ("forward", "engine", "born"),
    ("forward", "wavelength", "500"),
    ("forward", "k", "none"),
    ("forward", "accuracy", "strict"),
    ("reconstruction", "shape", "31,31"),
    ("reconstruction", "spacing", "forward"),
    ("reconstruction", "origin", "centered"),
    ("reconstruction", "detector_blocks", "single"),
    ("reconstruction", "positions", "perturbed"),
    ("reconstruction", "dedup_layers", "false"),
    ("sources", "layout", "random"),
    ("sources", "count", "150"),
    ("sources", "lattice", "13"),
    ("sources", "seed", "1"),
    ("detectors", "count", "7"),
    ("noise", "level", "0"),
    ("noise", "seed", "1001"),
    ("noise", "amplitude_scale", "rms"),
    ("noise", "position_scale", "domain"),
    ("fit", "lambda_rel", "1e-8"),
    ("fit", "lambda", "none"),
    ("fit", "length_scale", "domain"),
    ("fit", "quadrature_points", "auto"),
    ("fit", "truncation", "8"),
    ("fit", "quadrature_seed", "24301"),
    ("fit", "radial_nodes", "20000"),
    ("baseline", "enabled", "false"),
    ("baseline", "rcond", "1e-3"),
    ("render", "threshold", "0.085"),
    ("render", "range", "auto"),
];

/// Resolved `section.key -> value` table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigTable {
    values: BTreeMap<String, String>,
}

impl Default for ConfigTable {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|(s, k, v)| (format!("{s}.{k}"), v.to_string()))
            .collect();
        Self { values }
    }
}

fn known(key: &str) -> bool {
    SCHEMA.iter().any(|(s, k, _)| key.split_once('.') == Some((s, k)))
}

impl ConfigTable {
    /// Parse a config file's contents on top of the defaults.
    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        let mut table = Self::default();
        let mut seen = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let Some(section) = section else {
                    return Err(CliError::Config(format!("key `{key}` appears before any [section]")));
                };
                let full = format!("{section}.{key}");
                if seen.insert(full.clone(), ()).is_some() {
                    return Err(CliError::Config(format!("`{full}` is set twice")));
                }
                table.set(&full, value)?;
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Set one `section.key`; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Apply a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("no schema entry for {key}"))
    }

    /// Canonical text form with every key, in schema order.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (s, k, _) in SCHEMA {
            if *s != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                current = s;
            }
            let _ = writeln!(out, "{k} = {}", self.get(&format!("{s}.{k}")));
        }
        out
    }
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("`{key}` = `{value}`: {what}"))
}

fn parse_f64(t: &ConfigTable, key: &str) -> CliResult<f64> {
    let v = t.get(key);
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "expected a finite number"))
}

fn parse_usize(t: &ConfigTable, key: &str) -> CliResult<usize> {
    let v = t.get(key);
    v.parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
}

fn parse_u64(t: &ConfigTable, key: &str) -> CliResult<u64> {
    let v = t.get(key);
    v.parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
}

fn parse_bool(t: &ConfigTable, key: &str) -> CliResult<bool> {
    match t.get(key) {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(bad(key, v, "expected true or false")),
    }
}

fn parse_list<T: std::str::FromStr>(t: &ConfigTable, key: &str) -> CliResult<Vec<T>> {
    let v = t.get(key);
    v.split(',')
        .map(|p| p.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad(key, v, "expected a comma-separated list"))
}

/// Optional number where a keyword selects the automatic choice.
fn parse_auto_f64(t: &ConfigTable, key: &str, keyword: &str) -> CliResult<Option<f64>> {
    if t.get(key) == keyword {
        Ok(None)
    } else {
        parse_f64(t, key).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    ThreeBall,
    Gaussian,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Born,
    FullWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLayout {
    Random,
    Lattice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub scale: f64,
    /// One-based layer indices (planar three-ball runs only).
    pub layers: Vec<usize>,
    pub n_layers: usize,
    pub bump_center: Option<Vec<f64>>,
    pub bump_sigma: f64,
    pub bump_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: f64,
    /// `None` centres the grid in the forward domain.
    pub origin: Option<Vec<f64>>,
}

/// Typed view of a [`ConfigTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub label: String,
    pub phantom: PhantomSpec,
    pub forward: GridSpec,
    pub engine: Engine,
    pub k: Wavenumber,
    pub accuracy: AccuracyMode,
    pub recon: GridSpec,
    pub all_detector_blocks: bool,
    pub fit_true_positions: bool,
    pub dedup_layers: bool,
    pub layout: SourceLayout,
    pub n_sources: usize,
    pub lattice: usize,
    pub source_seed: u64,
    pub n_detectors: usize,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub noise_amplitude_scale: Option<f64>,
    pub noise_position_scale: Option<f64>,
    pub lambda: Lambda,
    pub length_scale: Option<f64>,
    pub quadrature: QuadratureConfig,
    pub baseline: Option<f64>,
    pub threshold: f64,
    pub render_range: Option<(f64, f64)>,
    table: ConfigTable,
}

impl ExperimentConfig {
    pub fn from_table(t: &ConfigTable) -> CliResult<Self> {
        let dim = parse_usize(t, "experiment.dim")?;
        if dim != 2 && dim != 3 {
            return Err(bad("experiment.dim", t.get("experiment.dim"), "must be 2 or 3"));
        }
        let kind = match t.get("phantom.kind") {
            "three-ball" => PhantomKind::ThreeBall,
            "gaussian" => PhantomKind::Gaussian,
            "zero" => PhantomKind::Zero,
            v => return Err(bad("phantom.kind", v, "expected three-ball, gaussian or zero")),
        };
        let n_layers = parse_usize(t, "phantom.n_layers")?;
        if n_layers == 0 {
            return Err(bad("phantom.n_layers", "0", "must be positive"));
        }
        let layers = match t.get("phantom.layers") {
            "all" => (1..=n_layers).collect(),
            _ => parse_list::<usize>(t, "phantom.layers")?,
        };
        if layers.iter().any(|&l| l == 0 || l > n_layers) {
            return Err(bad(
                "phantom.layers",
                t.get("phantom.layers"),
                "layer indices run from 1 to n_layers",
            ));
        }
        let bump_center = match t.get("phantom.bump_center") {
            "center" => None,
            _ => Some(parse_list::<f64>(t, "phantom.bump_center")?),
        };
        let phantom = PhantomSpec {
            kind,
            scale: parse_f64(t, "phantom.scale")?,
            layers,
            n_layers,
            bump_center,
            bump_sigma: parse_f64(t, "phantom.bump_sigma")?,
            bump_amplitude: parse_f64(t, "phantom.bump_amplitude")?,
        };
        let forward = GridSpec {
            shape: parse_list(t, "forward.shape")?,
            spacing: parse_f64(t, "forward.spacing")?,
            origin: Some(vec![0.0; dim]),
        };
        let engine = match t.get("forward.engine") {
            "born" => Engine::Born,
            "full-wave" => Engine::FullWave,
            v => return Err(bad("forward.engine", v, "expected born or full-wave")),
        };
        let k = match parse_auto_f64(t, "forward.k", "none")? {
            Some(k) => k,
            None => 2.0 * PI / parse_f64(t, "forward.wavelength")?,
        };
        let k = Wavenumber::new(k).map_err(|e| CliError::Config(e.to_string()))?;
        let accuracy = match t.get("forward.accuracy") {
            "strict" => AccuracyMode::Strict,
            "lenient" => AccuracyMode::Lenient,
            v => return Err(bad("forward.accuracy", v, "expected strict or lenient")),
        };
        let recon = GridSpec {
            shape: parse_list(t, "reconstruction.shape")?,
            spacing: parse_auto_f64(t, "reconstruction.spacing", "forward")?.unwrap_or(forward.spacing),
            origin: match t.get("reconstruction.origin") {
                "centered" => None,
                _ => Some(parse_list(t, "reconstruction.origin")?),
            },
        };
        let all_detector_blocks = match t.get("reconstruction.detector_blocks") {
            "single" => false,
            "all" => true,
            v => return Err(bad("reconstruction.detector_blocks", v, "expected single or all")),
        };
        let fit_true_positions = match t.get("reconstruction.positions") {
            "perturbed" => false,
            "true" => true,
            v => return Err(bad("reconstruction.positions", v, "expected perturbed or true")),
        };
        let layout = match t.get("sources.layout") {
            "random" => SourceLayout::Random,
            "lattice" => SourceLayout::Lattice,
            v => return Err(bad("sources.layout", v, "expected random or lattice")),
        };
        let lambda = match parse_auto_f64(t, "fit.lambda", "none")? {
            Some(v) => Lambda::Absolute(v),
            None => Lambda::RelativeTrace(parse_f64(t, "fit.lambda_rel")?),
        };
        let d_in = 2 * dim;
        let defaults = QuadratureConfig::default_for(d_in);
        let quadrature = QuadratureConfig {
            points: match t.get("fit.quadrature_points") {
                "auto" => defaults.points,
                _ => parse_usize(t, "fit.quadrature_points")?,
            },
            truncation: parse_f64(t, "fit.truncation")?,
            seed: parse_u64(t, "fit.quadrature_seed")?,
            radial_nodes: parse_usize(t, "fit.radial_nodes")?,
        };
        let render_range = match t.get("render.range") {
            "auto" => None,
            _ => match parse_list::<f64>(t, "render.range")?.as_slice() {
                [lo, hi] if lo < hi => Some((*lo, *hi)),
                _ => {
                    return Err(bad(
                        "render.range",
                        t.get("render.range"),
                        "expected min,max with min < max",
                    ))
                }
            },
        };
        let cfg = Self {
            dim,
            label: t.get("experiment.label").to_string(),
            phantom,
            forward,
            engine,
            k,
            accuracy,
            recon,
            all_detector_blocks,
            fit_true_positions,
            dedup_layers: parse_bool(t, "reconstruction.dedup_layers")?,
            layout,
            n_sources: parse_usize(t, "sources.count")?,
            lattice: parse_usize(t, "sources.lattice")?,
            source_seed: parse_u64(t, "sources.seed")?,
            n_detectors: parse_usize(t, "detectors.count")?,
            noise_level: parse_f64(t, "noise.level")?,
            noise_seed: parse_u64(t, "noise.seed")?,
            noise_amplitude_scale: parse_auto_f64(t, "noise.amplitude_scale", "rms")?,
            noise_position_scale: parse_auto_f64(t, "noise.position_scale", "domain")?,
            lambda,
            length_scale: parse_auto_f64(t, "fit.length_scale", "domain")?,
            quadrature,
            baseline: if parse_bool(t, "baseline.enabled")? {
                Some(parse_f64(t, "baseline.rcond")?)
            } else {
                None
            },
            threshold: parse_f64(t, "render.threshold")?,
            render_range,
            table: t.clone(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Cross-field consistency.
    fn check(&self) -> CliResult<()> {
        let dim = self.dim;
        let grid_ok = |g: &GridSpec| g.shape.len() == dim && g.shape.iter().all(|&n| n > 0);
        if !grid_ok(&self.forward) {
            return Err(bad(
                "forward.shape",
                self.table.get("forward.shape"),
                "needs one positive entry per dimension",
            ));
        }
        if !grid_ok(&self.recon) {
            return Err(bad(
                "reconstruction.shape",
                self.table.get("reconstruction.shape"),
                "needs one positive entry per dimension",
            ));
        }
        if let Some(o) = &self.recon.origin {
            if o.len() != dim {
                return Err(bad(
                    "reconstruction.origin",
                    self.table.get("reconstruction.origin"),
                    "needs one entry per dimension",
                ));
            }
        }
        if let Some(c) = &self.phantom.bump_center {
            if c.len() != dim {
                return Err(bad(
                    "phantom.bump_center",
                    self.table.get("phantom.bump_center"),
                    "needs one entry per dimension",
                ));
            }
        }
        for (key, v) in [
            ("forward.spacing", self.forward.spacing),
            ("reconstruction.spacing", self.recon.spacing),
            ("phantom.scale", self.phantom.scale),
            ("phantom.bump_sigma", self.phantom.bump_sigma),
        ] {
            if !(v > 0.0) {
                return Err(bad(key, &v.to_string(), "must be positive"));
            }
        }
        if !(self.noise_level >= 0.0) {
            return Err(bad(
                "noise.level",
                self.table.get("noise.level"),
                "must be non-negative",
            ));
        }
        match self.layout {
            SourceLayout::Random if self.n_sources == 0 => {
                return Err(bad("sources.count", "0", "must be positive"));
            }
            SourceLayout::Lattice if self.lattice < 3 => {
                return Err(bad(
                    "sources.lattice",
                    self.table.get("sources.lattice"),
                    "needs at least 3 points per axis",
                ));
            }
            _ => {}
        }
        if self.n_detectors < 2 {
            return Err(bad(
                "detectors.count",
                self.table.get("detectors.count"),
                "needs at least 2 detectors",
            ));
        }
        match self.lambda {
            Lambda::Absolute(v) | Lambda::RelativeTrace(v) if !(v >= 0.0) => {
                return Err(CliError::Config(format!(
                    "regularisation weight must be non-negative, got {v}"
                )));
            }
            _ => {}
        }
        if let Err(e) = self.quadrature.validate() {
            return Err(CliError::Config(e.to_string()));
        }
        if let Some(r) = self.baseline {
            if !(r >= 0.0) {
                return Err(bad(
                    "baseline.rcond",
                    self.table.get("baseline.rcond"),
                    "must be non-negative",
                ));
            }
        }
        if self.accuracy == AccuracyMode::Strict
            && self.k.value() * self.forward.spacing >= inscat_core::greens::KH_LIMIT
        {
            return Err(CliError::Config(format!(
                "k*h = {:.4} is too large for the small-cell expansion; set forward.accuracy = lenient to proceed",
                self.k.value() * self.forward.spacing
            )));
        }
        Ok(())
    }

    /// Number of sources actually placed.
    pub fn source_count(&self) -> usize {
        match self.layout {
            SourceLayout::Random => self.n_sources,
            SourceLayout::Lattice => self.lattice.pow(self.dim as u32),
        }
    }

    /// Whether the run is a stack of planar three-ball cross-sections.
    pub fn layered(&self) -> bool {
        self.dim == 2 && self.phantom.kind == PhantomKind::ThreeBall
    }

    pub fn table(&self) -> &ConfigTable {
        &self.table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = ExperimentConfig::from_table(&ConfigTable::default()).unwrap();
        assert_eq!(cfg.forward.shape, vec![35, 35]);
        assert!((cfg.k.value() - 2.0 * PI / 500.0).abs() < 1e-18);
        assert_eq!(cfg.phantom.layers, vec![9]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigTable::parse("[sources]\ncuont = 3\n").is_err());
        assert!(ConfigTable::parse("[nonsense]\ncount = 3\n").is_err());
        assert!(ConfigTable::parse("count = 3\n").is_err());
        assert!(ConfigTable::parse("[sources]\ncount = 3\ncount = 4\n").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut t = ConfigTable::parse("[sources]\ncount = 60\n; comment\n[noise]\nlevel=0.01\n").unwrap();
        t.apply_override("fit.lambda_rel=1e-5").unwrap();
        let again = ConfigTable::parse(&t.to_manifest()).unwrap();
        assert_eq!(again, t);
        assert_eq!(again.get("sources.count"), "60");
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            "[experiment]\ndim = 4\n",
            "[forward]\nshape = 3\n",
            "[forward]\nspacing = 20\n",
            "[noise]\nlevel = -1\n",
            "[render]\nrange = 1,0\n",
        ] {
            let t = ConfigTable::parse(text).unwrap();
            assert!(
                matches!(ExperimentConfig::from_table(&t), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }
}
