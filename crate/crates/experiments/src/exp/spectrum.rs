//! Power spectra of the output at chosen iterations of one fit.

use dipbias_core::optimizer::{FitConfig, Flow};
use dipbias_core::pgm::quantize;
use dipbias_core::signals::Scene;
use dipbias_core::spectral::{centered_log_power, magnitude_spectrum, spectrum_error_map};
use dipbias_core::Tensor;
use serde_json::json;

use super::tones::output_at;
use crate::config::SpectrumConfig;
use crate::error::{ExpError, Result};
use crate::report::{fmt_f64, record, Artifacts, ExperimentReport};
use crate::runner::{fit_target, par_map, seeded, RunContext};

#[derive(Clone, Debug)]
pub struct SpectrumRun {
    pub scene: Scene,
    pub seed: u64,
    /// Radial magnitude spectrum at each configured iteration.
    pub spectra: Vec<(usize, Vec<f64>)>,
    pub target_spectrum: Vec<f64>,
    /// Fraction of the starting spectrum error removed by the first
    /// configured iteration, in bins below and from the band split.
    pub low_reduction: f64,
    pub high_reduction: f64,
    /// `Σ|spec(last) - spec(target)| / Σ spec(target)`.
    pub final_relative_error: f64,
    pub log_power: Vec<(usize, Tensor)>,
}

pub struct SpectrumOutcome {
    pub runs: Vec<SpectrumRun>,
    pub report: ExperimentReport,
}

/// Rescales to `[0, 1]`; constant images map to 0.
pub fn normalize01(t: &Tensor) -> Tensor {
    let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    t.map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
}

fn fit_for(cfg: &SpectrumConfig) -> Result<FitConfig> {
    let mut iterations = cfg.iterations.clone();
    iterations.sort_unstable();
    let last = *iterations.last().ok_or_else(|| ExpError::config("no iterations to record"))?;
    if iterations[0] == 0 {
        return Err(ExpError::config("snapshot iterations must be positive"));
    }
    let fit = FitConfig {
        steps: cfg.fit.steps.max(last),
        ..cfg.fit.clone()
    };
    if let Some(i) = iterations.iter().find(|&&i| i % fit.record_every != 0 && i != fit.steps) {
        return Err(ExpError::config(format!(
            "iteration {i} is not recorded with record_every = {}",
            fit.record_every
        )));
    }
    Ok(fit)
}

pub fn run(cfg: &SpectrumConfig, ctx: &RunContext) -> Result<SpectrumOutcome> {
    let fit = fit_for(cfg)?;
    let split = cfg.band_split.unwrap_or(cfg.size / 8);
    let jobs: Vec<(Scene, u64)> = cfg
        .scenes
        .iter()
        .flat_map(|&sc| ctx.seeds.iter().map(move |&s| (sc, s)))
        .collect();
    let runs = par_map(ctx.workers, jobs, |(scene, seed)| {
        let target = quantize(&scene.render(cfg.size));
        let (spec, fit) = seeded(&cfg.model, &fit, seed);
        let traj = fit_target(&spec, &fit, &target, |_| Flow::Continue)?;
        let map = spectrum_error_map(&traj, &target)?;
        let first = cfg.iterations.iter().copied().min().expect("checked non-empty");
        let row = traj.iterations.iter().position(|&i| i == first).expect("recorded");
        let reduction = |lo, hi| 1.0 - map.band_error(row, lo, hi) / map.band_error(0, lo, hi);
        let mut spectra = Vec::new();
        let mut log_power = Vec::new();
        for &it in &cfg.iterations {
            let out = output_at(&traj, it).expect("recorded");
            spectra.push((it, magnitude_spectrum(out)?));
            log_power.push((it, centered_log_power(out)?));
        }
        let target_spectrum = magnitude_spectrum(&target)?;
        let last = map.rows() - 1;
        Ok(SpectrumRun {
            scene,
            seed,
            spectra,
            low_reduction: reduction(0, split),
            high_reduction: reduction(split, map.bins),
            final_relative_error: map.band_error(last, 0, map.bins) / target_spectrum.iter().sum::<f64>(),
            target_spectrum,
            log_power,
        })
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    for &scene in &cfg.scenes {
        let target = quantize(&scene.render(cfg.size));
        art.pgm(&format!("{}/target.pgm", scene.name()), &target)?;
        art.pgm(&format!("{}/target_log_power.pgm", scene.name()), &normalize01(&centered_log_power(&target)?))?;
    }
    for r in &runs {
        for (it, lp) in &r.log_power {
            art.pgm(&format!("{}/seed{}_iter{it:05}_log_power.pgm", r.scene.name(), r.seed), &normalize01(lp))?;
        }
    }
    art.csv(
        "radial_spectra.csv",
        &["scene", "seed", "iteration", "bin", "magnitude", "target_magnitude"],
        runs.iter().flat_map(|r| {
            r.spectra.iter().flat_map(move |(it, s)| {
                s.iter().enumerate().map(move |(b, m)| {
                    vec![
                        r.scene.name().into(),
                        r.seed.to_string(),
                        it.to_string(),
                        b.to_string(),
                        fmt_f64(*m),
                        fmt_f64(r.target_spectrum[b]),
                    ]
                })
            })
        }),
    )?;

    let per_seed = runs
        .iter()
        .map(|r| {
            record(
                r.scene.name(),
                r.seed,
                &[
                    ("low_band_reduction", r.low_reduction),
                    ("high_band_reduction", r.high_reduction),
                    ("final_relative_error", r.final_relative_error),
                ],
            )
        })
        .collect();
    let report = art.finish(
        "exp_spectrum",
        ctx.config_echo.clone(),
        per_seed,
        json!({ "iterations": cfg.iterations, "band_split": split, "steps": fit.steps }),
    )?;
    Ok(SpectrumOutcome { runs, report })
}
