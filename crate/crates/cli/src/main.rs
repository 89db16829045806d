use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inscat_cli::config::{ConfigTable, ExperimentConfig};
use inscat_cli::pipeline::{self, RunDir};
use inscat_cli::render::write_slice;
use inscat_cli::{CliError, CliResult, SweepAxis};
use inscat_core::array_file::ArrayFile;
use inscat_core::{ReconstructedField, VoxelGrid};

#[derive(Parser)]
#[command(name = "inscat", version, about = "Internal-source inverse scattering experiments")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Config file; keys not given keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Override any key, e.g. `--set noise.level=0.01`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Same as `--set sources.count=N`.
    #[arg(long)]
    sources: Option<usize>,
    /// Same as `--set detectors.count=N`.
    #[arg(long)]
    detectors: Option<usize>,
    /// Same as `--set sources.seed=N`.
    #[arg(long)]
    seed: Option<u64>,
    /// Same as `--set noise.level=X`.
    #[arg(long)]
    noise: Option<f64>,
    /// Same as `--set noise.seed=N`.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Same as `--set fit.lambda_rel=X`.
    #[arg(long)]
    lambda_rel: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the true susceptibility.
    Phantom(RunArgs),
    /// Simulate (noisy) scattering amplitudes.
    Forward(RunArgs),
    /// Fit the kernel surrogate to the amplitudes.
    Fit(RunArgs),
    /// Reconstruct the susceptibility from the fitted surrogate.
    Invert(RunArgs),
    /// Compare the reconstruction with the truth and the data.
    Metrics(RunArgs),
    /// Run every stage.
    Pipeline(RunArgs),
    /// One pipeline per value of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// sources, detectors or lambda
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write one layer of an array file as an 8-bit graymap.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Index along the third axis for volumes.
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Fixed `min,max` for the gray map.
        #[arg(long, value_delimiter = ',')]
        range: Option<Vec<f64>>,
    },
}

impl RunArgs {
    fn table(&self) -> CliResult<ConfigTable> {
        let mut t = match &self.config {
            Some(p) => ConfigTable::load(p)?,
            None => ConfigTable::default(),
        };
        for o in &self.overrides {
            t.apply_override(o)?;
        }
        let named = [
            ("sources.count", self.sources.map(|v| v.to_string())),
            ("detectors.count", self.detectors.map(|v| v.to_string())),
            ("sources.seed", self.seed.map(|v| v.to_string())),
            ("noise.level", self.noise.map(|v| v.to_string())),
            ("noise.seed", self.noise_seed.map(|v| v.to_string())),
            ("fit.lambda_rel", self.lambda_rel.map(|v| v.to_string())),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                t.set(key, &v)?;
            }
        }
        Ok(t)
    }

    fn config(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_table(&self.table()?)
    }
}

fn stage(args: &RunArgs, f: fn(&ExperimentConfig, &RunDir) -> CliResult<()>) -> CliResult<()> {
    let cfg = args.config()?;
    let dir = RunDir::create(&args.out)?;
    pipeline::write_manifest(&cfg, &dir)?;
    f(&cfg, &dir)
}

fn print_report(path: &Path) -> CliResult<()> {
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}

fn render(input: &Path, out: &Path, layer: usize, range: Option<Vec<f64>>) -> CliResult<()> {
    let a = ArrayFile::read(input).map_err(|e| CliError::Stage {
        stage: "render",
        source: e,
    })?;
    let shape: Vec<usize> = a.dims.iter().map(|&d| d as usize).collect();
    if shape.len() != 2 && shape.len() != 3 {
        return Err(CliError::Config(format!("cannot render a rank-{} array", shape.len())));
    }
    let values = a
        .as_real()
        .map_err(|e| CliError::Stage {
            stage: "render",
            source: e,
        })?
        .to_vec();
    let field = VoxelGrid::new(shape.len(), &shape, 1.0, &vec![0.0; shape.len()])
        .and_then(|g| ReconstructedField::from_real(g, values))
        .map_err(|e| CliError::Stage {
            stage: "render",
            source: e,
        })?;
    let range = match range.as_deref() {
        None => None,
        Some([lo, hi]) if lo < hi => Some((*lo, *hi)),
        Some(_) => {
            return Err(CliError::Config(
                "--range needs two values min,max with min < max".into(),
            ))
        }
    };
    write_slice(out, &field, layer, range)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Phantom(a) => stage(&a, pipeline::stage_phantom),
        Command::Forward(a) => stage(&a, pipeline::stage_forward),
        Command::Fit(a) => stage(&a, pipeline::stage_fit),
        Command::Invert(a) => stage(&a, pipeline::stage_invert),
        Command::Metrics(a) => {
            let cfg = a.config()?;
            let dir = RunDir::create(&a.out)?;
            pipeline::stage_metrics(&cfg, &dir)?;
            print_report(&dir.shared(pipeline::METRICS))
        }
        Command::Pipeline(a) => {
            pipeline::run_pipeline(&a.config()?, &a.out)?;
            print_report(&a.out.join(pipeline::METRICS))
        }
        Command::Sweep { run, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            pipeline::sweep(&run.table()?, axis, &values, &run.out)?;
            print_report(&run.out.join(format!("sweep_{}.txt", axis.name())))
        }
        Command::Render {
            input,
            out,
            layer,
            range,
        } => render(&input, &out, layer, range),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
