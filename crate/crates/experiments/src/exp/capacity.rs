//! Convergence times of both tones over a depth × width grid.

use dipbias_core::{Family, ModelSpec};
use serde::Serialize;
use serde_json::json;

use super::tones::fit_two_tone;
use crate::config::CapacityConfig;
use crate::error::{ExpError, Result};
use crate::report::{fmt_f64, Metric, record, Artifacts, ExperimentReport};
use crate::runner::{par_map, seeded, time_or, within_band, RunContext};
use crate::stats::{spearman, Aggregate};

#[derive(Clone, Debug)]
pub struct CapacityRun {
    pub family: Family,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
}

/// Per-configuration summary; unconverged runs count as `steps + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct CapacityPoint {
    pub family: Family,
    pub depth: usize,
    pub width: usize,
    pub t1: crate::stats::Aggregate,
    pub t2: crate::stats::Aggregate,
    pub gap: crate::stats::Aggregate,
    pub censored: usize,
    pub equal_rate: bool,
}

/// Rank correlations pooled over every run of one family.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Trends {
    pub depth_vs_gap: Metric,
    pub width_vs_t1: Metric,
    pub width_vs_t2: Metric,
}

pub struct CapacityOutcome {
    pub runs: Vec<CapacityRun>,
    pub points: Vec<CapacityPoint>,
    pub trends: Vec<(Family, Trends)>,
    pub report: ExperimentReport,
}

impl CapacityOutcome {
    pub fn trends(&self, family: Family) -> Option<Trends> {
        self.trends.iter().find(|(f, _)| *f == family).map(|(_, t)| *t)
    }
}

pub fn run(cfg: &CapacityConfig, ctx: &RunContext) -> Result<CapacityOutcome> {
    cfg.signal.validate()?;
    if cfg.families.iter().any(|f| !matches!(f, Family::DipConv1d | Family::DipLinear1d)) {
        return Err(ExpError::config("the capacity sweep takes 1D families only"));
    }
    let censor = cfg.fit.steps + 1;
    let mut jobs = Vec::new();
    for &family in &cfg.families {
        for &depth in &cfg.depths {
            for &width in &cfg.widths {
                for &seed in &ctx.seeds {
                    jobs.push((family, depth, width, seed));
                }
            }
        }
    }
    let runs = par_map(ctx.workers, jobs, |(family, depth, width, seed)| {
        let spec = ModelSpec::new(family, depth, width, &[cfg.signal.n]);
        let (spec, fit) = seeded(&spec, &cfg.fit, seed);
        let (tone, _) = fit_two_tone(&cfg.signal, &spec, &fit, &cfg.convergence, cfg.early_stop)?;
        Ok(CapacityRun {
            family,
            depth,
            width,
            seed,
            t1: tone.t1,
            t2: tone.t2,
        })
    })?;

    let t = |r: &CapacityRun| (time_or(r.t1, censor), time_or(r.t2, censor));
    let mut points = Vec::new();
    for &family in &cfg.families {
        for &depth in &cfg.depths {
            for &width in &cfg.widths {
                let rs: Vec<&CapacityRun> = runs
                    .iter()
                    .filter(|r| r.family == family && r.depth == depth && r.width == width)
                    .collect();
                let t1: Vec<f64> = rs.iter().map(|r| t(r).0).collect();
                let t2: Vec<f64> = rs.iter().map(|r| t(r).1).collect();
                let gap: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| b - a).collect();
                let (a1, a2) = (Aggregate::of(&t1), Aggregate::of(&t2));
                points.push(CapacityPoint {
                    family,
                    depth,
                    width,
                    t1: a1,
                    t2: a2,
                    gap: Aggregate::of(&gap),
                    censored: rs.iter().filter(|r| r.t1.is_none() || r.t2.is_none()).count(),
                    equal_rate: within_band(a1.mean, a2.mean, cfg.equal_band),
                });
            }
        }
    }
    let trends: Vec<(Family, Trends)> = cfg
        .families
        .iter()
        .map(|&family| {
            let rs: Vec<&CapacityRun> = runs.iter().filter(|r| r.family == family).collect();
            let depth: Vec<f64> = rs.iter().map(|r| r.depth as f64).collect();
            let width: Vec<f64> = rs.iter().map(|r| r.width as f64).collect();
            let t1: Vec<f64> = rs.iter().map(|r| t(r).0).collect();
            let t2: Vec<f64> = rs.iter().map(|r| t(r).1).collect();
            let gap: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| b - a).collect();
            let trends = Trends {
                depth_vs_gap: Metric(spearman(&depth, &gap)),
                width_vs_t1: Metric(spearman(&width, &t1)),
                width_vs_t2: Metric(spearman(&width, &t2)),
            };
            (family, trends)
        })
        .collect();

    let mut art = Artifacts::for_run(ctx)?;
    art.csv(
        "times.csv",
        &["family", "depth", "width", "seed", "t1", "t2", "t1_censored", "t2_censored"],
        runs.iter().map(|r| {
            let (a, b) = t(r);
            vec![
                r.family.to_string(),
                r.depth.to_string(),
                r.width.to_string(),
                r.seed.to_string(),
                fmt_f64(a),
                fmt_f64(b),
                r.t1.is_none().to_string(),
                r.t2.is_none().to_string(),
            ]
        }),
    )?;
    art.csv(
        "summary.csv",
        &[
            "family", "depth", "width", "t1_mean", "t1_std", "t2_mean", "t2_std", "gap_mean", "gap_std", "censored",
            "equal_rate",
        ],
        points.iter().map(|p| {
            vec![
                p.family.to_string(),
                p.depth.to_string(),
                p.width.to_string(),
                fmt_f64(p.t1.mean),
                fmt_f64(p.t1.std),
                fmt_f64(p.t2.mean),
                fmt_f64(p.t2.std),
                fmt_f64(p.gap.mean),
                fmt_f64(p.gap.std),
                p.censored.to_string(),
                p.equal_rate.to_string(),
            ]
        }),
    )?;

    let per_seed = runs
        .iter()
        .map(|r| {
            let (a, b) = t(r);
            record(
                &format!("{}-d{}-w{}", r.family, r.depth, r.width),
                r.seed,
                &[("t1", a), ("t2", b), ("gap", b - a)],
            )
        })
        .collect();
    let summary = json!({
        "censored_at": censor,
        "trends": trends.iter().map(|(f, t)| json!({ "family": f, "spearman": t })).collect::<Vec<_>>(),
        "points": points,
    });
    let report = art.finish("exp_capacity", ctx.config_echo.clone(), per_seed, summary)?;
    Ok(CapacityOutcome {
        runs,
        points,
        trends,
        report,
    })
}
