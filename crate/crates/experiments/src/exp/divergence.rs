//! Distance between two independently seeded fits of the same image, swept
//! over how much of the image a high-frequency pattern covers.

use dipbias_core::signals::synth_pattern_image;
use dipbias_core::spectral::{trajectory_divergence, DivergenceSeries};
use dipbias_core::Tensor;
use serde_json::json;

use crate::config::DivergenceConfig;
use crate::error::{ExpError, Result};
use crate::report::{fmt_f64, record, Artifacts, ExperimentReport};
use crate::runner::{fit_target, par_map, seeded, RunContext};

#[derive(Clone, Debug)]
pub struct DivergenceRun {
    pub coverage: f64,
    pub seed: u64,
    pub series: DivergenceSeries,
    /// Outputs of the first run at the deepest local minima of ε.
    pub minima: Vec<(usize, Tensor)>,
}

pub struct DivergenceOutcome {
    pub runs: Vec<DivergenceRun>,
    pub report: ExperimentReport,
}

impl DivergenceOutcome {
    /// Peak ε per coverage, in config order, for one seed.
    pub fn peaks(&self, seed: u64) -> Vec<f64> {
        peaks(&self.runs, seed)
    }
}

fn peaks(runs: &[DivergenceRun], seed: u64) -> Vec<f64> {
    runs.iter()
        .filter(|r| r.seed == seed)
        .map(|r| r.series.peak())
        .collect()
}

fn coverage_label(c: f64) -> String {
    format!("coverage={c}")
}

pub fn run(cfg: &DivergenceConfig, ctx: &RunContext) -> Result<DivergenceOutcome> {
    if let Some(c) = cfg.coverages.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(ExpError::config(format!("coverage {c} is outside [0, 1]")));
    }
    let targets = cfg
        .coverages
        .iter()
        .map(|&c| synth_pattern_image(cfg.size, c))
        .collect::<dipbias_core::Result<Vec<_>>>()?;
    let jobs: Vec<(u64, usize)> = ctx
        .seeds
        .iter()
        .flat_map(|&s| (0..cfg.coverages.len()).map(move |i| (s, i)))
        .collect();
    let runs = par_map(ctx.workers, jobs, |(seed, i)| {
        let fit_with = |s: u64| {
            let (spec, fit) = seeded(&cfg.model, &cfg.fit, s);
            fit_target(&spec, &fit, &targets[i], |_| dipbias_core::Flow::Continue)
        };
        let a = fit_with(seed)?;
        let b = fit_with(seed.wrapping_add(cfg.pair_offset))?;
        let series = trajectory_divergence(&a, &b)?;
        let mut minima = series.local_minima();
        minima.sort_by(|&x, &y| series.epsilon[x].total_cmp(&series.epsilon[y]));
        minima.truncate(cfg.minima_outputs);
        minima.sort_unstable();
        let minima = minima
            .into_iter()
            .map(|p| (series.iterations[p], a.outputs[p].clone()))
            .collect();
        Ok(DivergenceRun {
            coverage: cfg.coverages[i],
            seed,
            series,
            minima,
        })
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    for (c, t) in cfg.coverages.iter().zip(&targets) {
        art.pgm(&format!("targets/coverage_{c}.pgm"), t)?;
    }
    for r in &runs {
        for (it, out) in &r.minima {
            art.pgm(&format!("minima/coverage_{}_seed{}_iter{it:05}.pgm", r.coverage, r.seed), out)?;
        }
    }
    art.csv(
        "epsilon.csv",
        &["coverage", "seed", "iteration", "epsilon"],
        runs.iter().flat_map(|r| {
            r.series.iterations.iter().zip(&r.series.epsilon).map(move |(it, e)| {
                vec![r.coverage.to_string(), r.seed.to_string(), it.to_string(), fmt_f64(*e)]
            })
        }),
    )?;
    art.csv(
        "peaks.csv",
        &["coverage", "seed", "peak_epsilon", "epsilon_at_0"],
        runs.iter().map(|r| {
            vec![
                r.coverage.to_string(),
                r.seed.to_string(),
                fmt_f64(r.series.peak()),
                fmt_f64(r.series.epsilon[0]),
            ]
        }),
    )?;

    let per_seed = runs
        .iter()
        .map(|r| {
            record(
                &coverage_label(r.coverage),
                r.seed,
                &[("peak_epsilon", r.series.peak()), ("epsilon_at_0", r.series.epsilon[0])],
            )
        })
        .collect();
    let monotone: Vec<_> = ctx
        .seeds
        .iter()
        .map(|&s| {
            let peaks = peaks(&runs, s);
            json!({
                "seed": s,
                "peaks": peaks,
                "non_decreasing": peaks.windows(2).all(|w| w[0] <= w[1]),
            })
        })
        .collect();
    let report = art.finish(
        "exp_divergence",
        ctx.config_echo.clone(),
        per_seed,
        json!({ "coverages": cfg.coverages, "seed_pairs": monotone }),
    )?;
    Ok(DivergenceOutcome { runs, report })
}
