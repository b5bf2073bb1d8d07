//! Low-frequency noise on a high-frequency image: the fit never passes
//! through the clean image. A Gaussian-noise fit of the same image is the
//! control.

use dipbias_core::optimizer::{Flow, Trajectory};
use dipbias_core::pgm::quantize;
use dipbias_core::signals::{add_gaussian_noise, add_low_freq_noise, NoisyImage};
use serde_json::json;

use super::tones::output_at;
use crate::config::FailureConfig;
use crate::error::Result;
use crate::report::{fmt_f64, record, Artifacts, ExperimentReport};
use crate::runner::{fit_target, par_map, psnr_8bit, seeded, RunContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseArm {
    LowFrequency,
    Gaussian,
}

impl NoiseArm {
    pub fn name(self) -> &'static str {
        match self {
            NoiseArm::LowFrequency => "low_frequency",
            NoiseArm::Gaussian => "gaussian",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FailureRun {
    pub arm: NoiseArm,
    pub seed: u64,
    pub noisy_psnr: f64,
    pub max_psnr: f64,
    /// Final loss over initial loss, both against the noisy target.
    pub final_loss_ratio: f64,
    /// `(iteration, PSNR against clean, loss)`.
    pub curve: Vec<(usize, f64, f64)>,
    pub noisy: NoisyImage,
    pub trajectory: Trajectory,
}

impl FailureRun {
    pub fn margin(&self) -> f64 {
        self.max_psnr - self.noisy_psnr
    }
}

pub struct FailureOutcome {
    pub runs: Vec<FailureRun>,
    pub report: ExperimentReport,
}

pub fn run(cfg: &FailureConfig, ctx: &RunContext) -> Result<FailureOutcome> {
    let clean = quantize(&cfg.scene.render(cfg.size));
    let jobs: Vec<(NoiseArm, u64)> = ctx
        .seeds
        .iter()
        .flat_map(|&s| [(NoiseArm::LowFrequency, s), (NoiseArm::Gaussian, s)])
        .collect();
    let runs = par_map(ctx.workers, jobs, |(arm, seed)| {
        let noisy = match arm {
            NoiseArm::LowFrequency => add_low_freq_noise(&clean, cfg.k_max, cfg.amplitude, seed)?,
            NoiseArm::Gaussian => add_gaussian_noise(&clean, cfg.control_sigma, seed)?,
        };
        let (spec, fit) = seeded(&cfg.model, &cfg.fit, seed);
        let traj = fit_target(&spec, &fit, &noisy.observed, |_| Flow::Continue)?;
        let curve = traj
            .iterations
            .iter()
            .zip(&traj.outputs)
            .zip(&traj.losses)
            .map(|((&it, out), &loss)| Ok((it, psnr_8bit(out, &clean)?, loss)))
            .collect::<Result<Vec<_>>>()?;
        let max_psnr = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let final_loss_ratio = traj.losses[traj.losses.len() - 1] / traj.losses[0];
        Ok(FailureRun {
            arm,
            seed,
            noisy_psnr: psnr_8bit(&noisy.observed, &clean)?,
            max_psnr,
            final_loss_ratio,
            curve,
            noisy,
            trajectory: traj,
        })
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    art.pgm("clean.pgm", &clean)?;
    for r in &runs {
        let stem = format!("{}_seed{}", r.arm.name(), r.seed);
        art.pgm(&format!("{stem}/noisy.pgm"), &r.noisy.observed)?;
        let last = *r.trajectory.iterations.last().expect("iteration 0 is always recorded");
        let mut wanted: Vec<usize> = cfg.snapshots.iter().copied().filter(|&i| i < last).collect();
        wanted.push(last);
        for it in wanted {
            if let Some(out) = output_at(&r.trajectory, it) {
                art.pgm(&format!("{stem}/iter{it:05}.pgm"), out)?;
            }
        }
    }
    art.csv(
        "psnr.csv",
        &["noise", "seed", "iteration", "psnr", "loss"],
        runs.iter().flat_map(|r| {
            r.curve.iter().map(move |(it, p, l)| {
                vec![r.arm.name().into(), r.seed.to_string(), it.to_string(), fmt_f64(*p), fmt_f64(*l)]
            })
        }),
    )?;

    let per_seed = runs
        .iter()
        .map(|r| {
            record(
                r.arm.name(),
                r.seed,
                &[
                    ("max_psnr", r.max_psnr),
                    ("noisy_psnr", r.noisy_psnr),
                    ("margin", r.margin()),
                    ("final_loss_ratio", r.final_loss_ratio),
                ],
            )
        })
        .collect();
    let summary: Vec<_> = ctx
        .seeds
        .iter()
        .map(|&s| {
            let get = |arm| runs.iter().find(|r| r.seed == s && r.arm == arm).expect("both arms ran");
            let (low, gauss) = (get(NoiseArm::LowFrequency), get(NoiseArm::Gaussian));
            json!({
                "seed": s,
                "low_frequency_margin_db": low.margin(),
                "low_frequency_final_loss_ratio": low.final_loss_ratio,
                "gaussian_margin_db": gauss.margin(),
            })
        })
        .collect();
    let report = art.finish(
        "exp_failure",
        ctx.config_echo.clone(),
        per_seed,
        json!({ "scene": cfg.scene.name(), "seeds": summary }),
    )?;
    Ok(FailureOutcome { runs, report })
}
