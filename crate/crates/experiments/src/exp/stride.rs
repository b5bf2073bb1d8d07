//! Decoder upsampling stride against the spectrum of the fitted output.

use dipbias_core::optimizer::Flow;
use dipbias_core::pgm::quantize;
use dipbias_core::spectral::{band_energy, bin_count, spectrum_error_map, SpectrumErrorMap};
use dipbias_core::{Family, ModelSpec};
use serde_json::json;

use crate::config::StrideConfig;
use crate::error::Result;
use crate::report::{fmt_f64, fmt_opt, record, Artifacts, ExperimentReport};
use crate::runner::{fit_target, par_map, seeded, RunContext};

#[derive(Clone, Debug)]
pub struct StrideRun {
    pub stride: usize,
    pub seed: u64,
    pub final_iteration: usize,
    /// Spectral energy of the last output in bins `[high_from, bins)`.
    pub high_band_energy: f64,
    pub map: SpectrumErrorMap,
    /// First iteration at which each band's summed error is at most half
    /// its starting value.
    pub low_halved: Option<usize>,
    pub high_halved: Option<usize>,
}

pub struct StrideOutcome {
    pub runs: Vec<StrideRun>,
    pub high_band_from: usize,
    pub report: ExperimentReport,
}

impl StrideOutcome {
    pub fn energy(&self, stride: usize, seed: u64) -> Option<f64> {
        self.runs
            .iter()
            .find(|r| r.stride == stride && r.seed == seed)
            .map(|r| r.high_band_energy)
    }
}

fn halved(map: &SpectrumErrorMap, lo: usize, hi: usize) -> Option<usize> {
    let start = map.band_error(0, lo, hi);
    (0..map.rows())
        .find(|&i| map.band_error(i, lo, hi) <= 0.5 * start)
        .map(|i| map.iterations[i])
}

pub fn run(cfg: &StrideConfig, ctx: &RunContext) -> Result<StrideOutcome> {
    let target = quantize(&cfg.scene.render(cfg.size));
    let shape = [cfg.size, cfg.size];
    let bins = bin_count(&shape);
    let split = cfg.high_band_from.unwrap_or(cfg.size / 8);
    let jobs: Vec<(usize, u64)> = ctx
        .seeds
        .iter()
        .flat_map(|&s| cfg.strides.iter().map(move |&l| (l, s)))
        .collect();
    let runs = par_map(ctx.workers, jobs, |(stride, seed)| {
        let mut spec = ModelSpec::new(Family::DipConv2d, cfg.depth, cfg.width, &shape).with_upsampling(cfg.mode, stride);
        spec.resample_stages = Some(cfg.resample_stages);
        let (spec, fit) = seeded(&spec, &cfg.fit, seed);
        let traj = fit_target(&spec, &fit, &target, |_| Flow::Continue)?;
        let map = spectrum_error_map(&traj, &target)?;
        let last = traj.last_output().expect("iteration 0 is always recorded");
        Ok(StrideRun {
            stride,
            seed,
            final_iteration: *traj.iterations.last().expect("recorded"),
            high_band_energy: band_energy(last, split, bins)?,
            low_halved: halved(&map, 0, split),
            high_halved: halved(&map, split, bins),
            map,
        })
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    art.pgm("target.pgm", &target)?;
    for r in &runs {
        let stem = format!("stride{}_seed{}", r.stride, r.seed);
        art.pgm(&format!("heatmaps/{stem}.pgm"), &r.map.row_normalized())?;
        let mut header = vec!["iteration".to_string()];
        header.extend((0..r.map.bins).map(|b| format!("bin{b}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        art.csv(
            &format!("error_maps/{stem}.csv"),
            &header,
            (0..r.map.rows()).map(|i| {
                let mut row = vec![r.map.iterations[i].to_string()];
                row.extend(r.map.row(i).iter().map(|v| fmt_f64(*v)));
                row
            }),
        )?;
    }
    art.csv(
        "band_energy.csv",
        &["stride", "seed", "iteration", "high_band_from", "high_band_energy", "low_halved_at", "high_halved_at"],
        runs.iter().map(|r| {
            vec![
                r.stride.to_string(),
                r.seed.to_string(),
                r.final_iteration.to_string(),
                split.to_string(),
                fmt_f64(r.high_band_energy),
                fmt_opt(r.low_halved),
                fmt_opt(r.high_halved),
            ]
        }),
    )?;

    let never = |t: Option<usize>| t.map_or(f64::INFINITY, |t| t as f64);
    let per_seed = runs
        .iter()
        .map(|r| {
            record(
                &format!("stride={}", r.stride),
                r.seed,
                &[
                    ("high_band_energy", r.high_band_energy),
                    ("low_halved_at", never(r.low_halved)),
                    ("high_halved_at", never(r.high_halved)),
                ],
            )
        })
        .collect();
    let report = art.finish(
        "exp_stride",
        ctx.config_echo.clone(),
        per_seed,
        json!({ "scene": cfg.scene.name(), "high_band_from": split, "bins": bins }),
    )?;
    Ok(StrideOutcome {
        runs,
        high_band_from: split,
        report,
    })
}
