//! Experiment drivers for the spectral-bias study: each one fits models,
//! writes CSV/PGM artifacts plus `report.json` under its output directory
//! and returns its typed results.

pub mod config;
pub mod error;
pub mod exp;
pub mod report;
pub mod runner;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{ExpError, Result};
pub use report::ExperimentReport;
pub use runner::RunContext;

/// Runs the configured experiment and returns its report.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = RunContext::from_config(cfg)?;
    Ok(match &cfg.kind {
        ExperimentKind::OneD(c) => exp::one_d::run(c, &ctx)?.report,
        ExperimentKind::Divergence(c) => exp::divergence::run(c, &ctx)?.report,
        ExperimentKind::Denoise(c) => exp::denoise::run(c, &ctx)?.report,
        ExperimentKind::Failure(c) => exp::failure::run(c, &ctx)?.report,
        ExperimentKind::Capacity(c) => exp::capacity::run(c, &ctx)?.report,
        ExperimentKind::Stride(c) => exp::stride::run(c, &ctx)?.report,
        ExperimentKind::Spectrum(c) => exp::spectrum::run(c, &ctx)?.report,
        ExperimentKind::Response(c) => exp::response::run(c, &ctx)?.report,
        ExperimentKind::GradCheck(c) => exp::gradcheck::run(c, &ctx)?.report,
    })
}
