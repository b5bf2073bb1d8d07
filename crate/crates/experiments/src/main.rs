use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dipbias::config::{
    CapacityConfig, DenoiseConfig, DivergenceConfig, FailureConfig, GradCheckConfig, OneDConfig, ResponseConfig,
    SpectrumConfig, StrideConfig,
};
use dipbias::{ExpError, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "dipbias", version, about = "Spectral-bias experiments for deep image priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-tone 1D fits and per-tone convergence times.
    #[command(name = "exp-1d")]
    OneD(Common),
    /// Divergence of independently seeded fits against pattern coverage.
    ExpDivergence(Common),
    /// Denoising PSNR of the four architectures.
    ExpDenoise(Common),
    /// Low-frequency noise that cannot be removed by early stopping.
    ExpFailure(Common),
    /// Convergence times over a depth × width grid.
    ExpCapacity(Common),
    /// Decoder upsampling stride against output smoothness.
    ExpStride(Common),
    /// Output power spectra along a fit.
    ExpSpectrum(Common),
    /// Analytic and measured upsampling frequency responses.
    UpsampleResponse(Common),
    /// Finite-difference gradient checks of every op.
    GradCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; its `experiment` tag must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Concurrent jobs.
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::OneD(c) => (ExperimentKind::OneD(OneDConfig::default()), c),
            Command::ExpDivergence(c) => (ExperimentKind::Divergence(DivergenceConfig::default()), c),
            Command::ExpDenoise(c) => (ExperimentKind::Denoise(DenoiseConfig::default()), c),
            Command::ExpFailure(c) => (ExperimentKind::Failure(FailureConfig::default()), c),
            Command::ExpCapacity(c) => (ExperimentKind::Capacity(CapacityConfig::default()), c),
            Command::ExpStride(c) => (ExperimentKind::Stride(StrideConfig::default()), c),
            Command::ExpSpectrum(c) => (ExperimentKind::Spectrum(SpectrumConfig::default()), c),
            Command::UpsampleResponse(c) => (ExperimentKind::Response(ResponseConfig::default()), c),
            Command::GradCheck(c) => (ExperimentKind::GradCheck(GradCheckConfig::default()), c),
        }
    }
}

fn resolve(command: Command) -> Result<ExperimentConfig, ExpError> {
    let (default_kind, common) = command.split();
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind.name() != default_kind.name() {
                return Err(ExpError::Config(format!(
                    "{} describes experiment {:?}, not {:?}",
                    path.display(),
                    cfg.kind.name(),
                    default_kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(default_kind),
    };
    if let Some(out) = common.out {
        cfg.out_dir = out;
    }
    if let Some(seeds) = common.seeds {
        cfg.seeds = Some(seeds);
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match resolve(cli.command).and_then(|cfg| dipbias::run(&cfg)) {
        Ok(report) => {
            println!(
                "{}: wrote {} artifacts in {:.1} s",
                report.experiment,
                report.manifest.len() + 1,
                report.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = serde_json::to_string(&e.record()).unwrap_or_else(|_| format!("{e}"));
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
