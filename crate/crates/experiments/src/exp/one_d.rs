//! Two-tone 1D fits: per-tone amplitude error curves and convergence times.

use dipbias_core::spectral::amplitude_at;
use dipbias_core::{Family, ModelSpec};
use serde_json::json;

use super::tones::{fit_two_tone, output_at, ToneFit};
use crate::config::OneDConfig;
use crate::error::Result;
use crate::report::{fmt_f64, fmt_opt, record, Artifacts, ExperimentReport};
use crate::runner::{par_map, seeded, slug, within_band, RunContext};

pub fn model_label(spec: &ModelSpec) -> String {
    format!("{}-d{}-w{}", spec.family, spec.depth, spec.width)
}

#[derive(Clone, Debug)]
pub struct OneDRun {
    pub label: String,
    pub family: Family,
    pub seed: u64,
    pub fit: ToneFit,
    /// Amplitude of the second tone in the output at `t1`.
    pub amp_k2_at_t1: Option<f64>,
    /// `(snapshot name, iteration, samples)` for t1, t2 and the last iteration.
    pub snapshots: Vec<(&'static str, usize, Vec<f64>)>,
}

impl OneDRun {
    /// `t2 / t1`; infinite when only the first tone converged.
    pub fn ratio(&self) -> f64 {
        match (self.fit.t1, self.fit.t2) {
            (Some(a), Some(b)) => b as f64 / a as f64,
            (Some(_), None) => f64::INFINITY,
            _ => f64::NAN,
        }
    }

    pub fn equal_rate(&self, band: f64) -> bool {
        match (self.fit.t1, self.fit.t2) {
            (Some(a), Some(b)) => within_band(a as f64, b as f64, band),
            _ => false,
        }
    }
}

pub struct OneDOutcome {
    pub runs: Vec<OneDRun>,
    pub report: ExperimentReport,
}

pub fn run(cfg: &OneDConfig, ctx: &RunContext) -> Result<OneDOutcome> {
    cfg.signal.validate()?;
    let jobs: Vec<(ModelSpec, u64)> = cfg
        .models
        .iter()
        .flat_map(|m| ctx.seeds.iter().map(move |&s| (m.clone(), s)))
        .collect();
    let results = par_map(ctx.workers, jobs, |(model, seed)| {
        let (spec, fit) = seeded(&model, &cfg.fit, seed);
        let (tone, traj) = fit_two_tone(&cfg.signal, &spec, &fit, &cfg.convergence, cfg.early_stop)?;
        let amp_k2_at_t1 = tone
            .t1
            .and_then(|t| output_at(&traj, t))
            .map(|o| amplitude_at(o.data(), cfg.signal.k2))
            .transpose()?;
        let mut snapshots = Vec::new();
        for (name, it) in [("t1", tone.t1), ("t2", tone.t2), ("final", Some(tone.steps_run))] {
            if let Some(out) = it.and_then(|i| output_at(&traj, i)) {
                snapshots.push((name, it.unwrap(), out.data().to_vec()));
            }
        }
        let run = OneDRun {
            label: model_label(&spec),
            family: spec.family,
            seed,
            fit: tone,
            amp_k2_at_t1,
            snapshots,
        };
        Ok((run, cfg.save_trajectories.then_some((traj, fit))))
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    let mut runs = Vec::with_capacity(results.len());
    for (run, traj) in results {
        if let Some((traj, fit)) = traj {
            art.trajectory(&format!("trajectories/{}_seed{}", slug(&run.label), run.seed), &traj, &fit)?;
        }
        runs.push(run);
    }

    art.csv(
        "se.csv",
        &["model", "seed", "iteration", "se_k1", "se_k2"],
        runs.iter().flat_map(|r| {
            let (a, b) = (&r.fit.trace1, &r.fit.trace2);
            (0..a.len()).map(move |i| {
                vec![
                    r.label.clone(),
                    r.seed.to_string(),
                    a.iterations[i].to_string(),
                    fmt_f64(a.squared_error[i]),
                    fmt_f64(b.squared_error[i]),
                ]
            })
        }),
    )?;
    art.csv(
        "convergence.csv",
        &["model", "seed", "t1", "t2", "steps_run"],
        runs.iter().map(|r| {
            vec![
                r.label.clone(),
                r.seed.to_string(),
                fmt_opt(r.fit.t1),
                fmt_opt(r.fit.t2),
                r.fit.steps_run.to_string(),
            ]
        }),
    )?;
    art.csv(
        "predictions.csv",
        &["model", "seed", "snapshot", "iteration", "sample", "value"],
        runs.iter().flat_map(|r| {
            r.snapshots.iter().flat_map(move |(name, it, xs)| {
                xs.iter().enumerate().map(move |(j, v)| {
                    vec![
                        r.label.clone(),
                        r.seed.to_string(),
                        name.to_string(),
                        it.to_string(),
                        j.to_string(),
                        fmt_f64(*v),
                    ]
                })
            })
        }),
    )?;

    let per_seed = runs
        .iter()
        .map(|r| {
            let t = |t: Option<usize>| t.map_or(f64::INFINITY, |t| t as f64);
            record(
                &r.label,
                r.seed,
                &[
                    ("t1", t(r.fit.t1)),
                    ("t2", t(r.fit.t2)),
                    ("ratio", r.ratio()),
                    ("amp_k2_at_t1", r.amp_k2_at_t1.unwrap_or(f64::NAN)),
                    ("steps_run", r.fit.steps_run as f64),
                ],
            )
        })
        .collect();

    let mut labels: Vec<&str> = Vec::new();
    for r in &runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let half_a2 = 0.5 * cfg.signal.a2.abs();
    let summary: Vec<_> = labels
        .iter()
        .map(|&label| {
            let rs: Vec<&OneDRun> = runs.iter().filter(|r| r.label == label).collect();
            let count = |f: &dyn Fn(&OneDRun) -> bool| rs.iter().filter(|r| f(r)).count();
            json!({
                "model": label,
                "runs": rs.len(),
                "t1_before_t2": count(&|r| matches!((r.fit.t1, r.fit.t2), (Some(a), Some(b)) if a < b)
                    || (r.fit.t1.is_some() && r.fit.t2.is_none())),
                "ratio_at_least_1_5": count(&|r| r.ratio() >= 1.5),
                "equal_rate": count(&|r| r.equal_rate(cfg.equal_band)),
                "k2_below_half_at_t1": count(&|r| r.amp_k2_at_t1.is_some_and(|a| a < half_a2)),
            })
        })
        .collect();

    let report = art.finish("exp_1d", ctx.config_echo.clone(), per_seed, json!({ "models": summary }))?;
    Ok(OneDOutcome { runs, report })
}
