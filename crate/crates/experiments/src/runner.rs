//! Seeding, fitting and job scheduling shared by the experiments.

use std::path::PathBuf;
use std::time::Instant;

use dipbias_core::optimizer::{model_input, run_dip_with, FitConfig, Flow, Trajectory};
use dipbias_core::pgm::quantize;
use dipbias_core::spectral::psnr;
use dipbias_core::{build_model, ModelSpec, Tensor};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{ExpError, Result};

/// What every experiment needs besides its own parameters.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub workers: usize,
    /// The config as run, seeds resolved.
    pub config_echo: serde_json::Value,
    pub started: Instant,
}

impl RunContext {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut resolved = cfg.clone();
        resolved.seeds = Some(cfg.resolved_seeds());
        let config_echo = serde_json::to_value(&resolved).map_err(|source| ExpError::Json {
            path: cfg.out_dir.join("report.json"),
            source,
        })?;
        Ok(Self {
            out_dir: cfg.out_dir.clone(),
            seeds: cfg.resolved_seeds(),
            workers: cfg.workers,
            config_echo,
            started: Instant::now(),
        })
    }
}

/// Copies of `spec` and `fit` whose weight init and input noise follow `seed`.
pub fn seeded(spec: &ModelSpec, fit: &FitConfig, seed: u64) -> (ModelSpec, FitConfig) {
    let spec = spec.clone().with_seed(seed);
    let fit = FitConfig {
        init_seed: seed,
        noise_seed: seed,
        ..fit.clone()
    };
    (spec, fit)
}

/// Builds the model for `spec` and fits it to `target`.
pub fn fit_target(
    spec: &ModelSpec,
    fit: &FitConfig,
    target: &Tensor,
    observe: impl FnMut(&Trajectory) -> Flow,
) -> Result<Trajectory> {
    let mut spec = spec.clone();
    spec.signal_shape = target.shape().to_vec();
    let mut model = build_model(&spec)?;
    let z = model_input(&model, fit)?;
    Ok(run_dip_with(&mut model, &z, target, fit, observe)?)
}

/// PSNR (peak 1) of the 8-bit quantized `output` against `clean`.
pub fn psnr_8bit(output: &Tensor, clean: &Tensor) -> Result<f64> {
    Ok(psnr(quantize(output).data(), clean.data(), 1.0)?)
}

/// Runs `f` over `items` on `workers` threads; results keep input order.
pub fn par_map<T, R, F>(workers: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    if workers <= 1 {
        return items.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExpError::Pool(e.to_string()))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// File-name friendly form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Censored time for runs that never converge.
pub fn time_or(t: Option<usize>, censor: usize) -> f64 {
    t.unwrap_or(censor) as f64
}

/// `|t1 - t2| <= band · max(t1, t2)`.
pub fn within_band(t1: f64, t2: f64, band: f64) -> bool {
    (t1 - t2).abs() <= band * t1.max(t2)
}
