//! Denoising comparison of the four architectures: best PSNR against the
//! clean image along each fit, aggregated over noise/init seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use dipbias_core::optimizer::Flow;
use dipbias_core::pgm::{load_pgm, quantize};
use dipbias_core::signals::{add_gaussian_noise, downsample};
use dipbias_core::Tensor;
use serde_json::json;

use crate::config::{ArchEntry, DenoiseConfig};
use crate::error::{ExpError, Result};
use crate::report::{fmt_f64, record, Artifacts, ExperimentReport};
use crate::runner::{fit_target, par_map, psnr_8bit, seeded, slug, RunContext};
use crate::stats::Aggregate;

/// A clean, 8-bit quantized corpus image.
#[derive(Clone, Debug)]
pub struct CorpusImage {
    pub name: String,
    pub clean: Tensor,
}

/// `paths` with every directory replaced by its `*.pgm` files, sorted.
fn expand_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if !path.is_dir() {
            out.push(path.clone());
            continue;
        }
        let mut found = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| ExpError::io(path, e))? {
            let p = entry.map_err(|e| ExpError::io(path, e))?.path();
            if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                found.push(p);
            }
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

/// Rendered scenes followed by the user images, all `size × size`.
pub fn load_corpus(cfg: &DenoiseConfig) -> Result<Vec<CorpusImage>> {
    let mut corpus: Vec<CorpusImage> = cfg
        .scenes
        .iter()
        .map(|s| CorpusImage {
            name: s.name().to_string(),
            clean: quantize(&s.render(cfg.size)),
        })
        .collect();
    for path in &expand_images(&cfg.images)? {
        let image = load_pgm(path)?;
        let (h, w) = (image.shape()[0], image.shape()[1]);
        let clean = if h == cfg.size && w == cfg.size {
            image
        } else if h == w && h % cfg.size == 0 {
            quantize(&downsample(&image, h / cfg.size)?)
        } else {
            return Err(ExpError::config(format!(
                "{}: {w}x{h} image cannot be block-averaged to {}x{}",
                path.display(),
                cfg.size,
                cfg.size
            )));
        };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        corpus.push(CorpusImage { name, clean });
    }
    if corpus.is_empty() {
        return Err(ExpError::config("the corpus is empty"));
    }
    Ok(corpus)
}

/// Noise seed of image `index` under run seed `seed`, distinct per image.
fn noise_seed(seed: u64, index: usize) -> u64 {
    seed ^ ((index as u64) << 32)
}

#[derive(Clone, Debug)]
pub struct DenoiseRun {
    pub image: String,
    pub arch: String,
    pub seed: u64,
    pub noisy_psnr: f64,
    pub best_psnr: f64,
    pub best_iteration: usize,
    pub steps_run: usize,
    /// `(iteration, PSNR)` at every recorded point.
    pub curve: Vec<(usize, f64)>,
    pub best_output: Tensor,
}

pub struct DenoiseOutcome {
    pub runs: Vec<DenoiseRun>,
    pub report: ExperimentReport,
}

impl DenoiseOutcome {
    /// Mean best PSNR over seeds for one image and architecture.
    pub fn mean_best(&self, image: &str, arch: &str) -> f64 {
        mean_best(&self.runs, image, arch)
    }

    /// Mean over images of [`Self::mean_best`].
    pub fn corpus_mean(&self, arch: &str) -> f64 {
        let images = unique(self.runs.iter().map(|r| r.image.as_str()));
        images.iter().map(|i| self.mean_best(i, arch)).sum::<f64>() / images.len() as f64
    }
}

fn mean_best(runs: &[DenoiseRun], image: &str, arch: &str) -> f64 {
    let v: Vec<f64> = runs
        .iter()
        .filter(|r| r.image == image && r.arch == arch)
        .map(|r| r.best_psnr)
        .collect();
    Aggregate::of(&v).mean
}

fn unique<'a>(xs: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn denoise_one(image: &CorpusImage, index: usize, arch: &ArchEntry, seed: u64, sigma: f64) -> Result<DenoiseRun> {
    let noisy = add_gaussian_noise(&image.clean, sigma, noise_seed(seed, index))?;
    let noisy_psnr = psnr_8bit(&noisy.observed, &image.clean)?;
    let (spec, fit) = seeded(&arch.model, &arch.fit, seed);
    let mut curve = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0, image.clean.clone());
    let mut failure = None;
    let traj = fit_target(&spec, &fit, &noisy.observed, |traj| {
        let it = *traj.iterations.last().expect("called after a record");
        let out = traj.last_output().expect("called after a record");
        let p = match psnr_8bit(out, &image.clean) {
            Ok(p) => p,
            Err(e) => {
                failure = Some(e);
                return Flow::Stop;
            }
        };
        curve.push((it, p));
        if p > best.0 {
            best = (p, it, out.clone());
        }
        let stale = arch.patience.is_some_and(|n| it - best.1 >= n);
        let fitted = arch
            .stop_loss_ratio
            .is_some_and(|r| traj.losses[traj.losses.len() - 1] < r * traj.losses[0]);
        if stale || fitted || p == f64::INFINITY {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DenoiseRun {
        image: image.name.clone(),
        arch: arch.label.clone(),
        seed,
        noisy_psnr,
        best_psnr: best.0,
        best_iteration: best.1,
        steps_run: *traj.iterations.last().expect("iteration 0 is always recorded"),
        curve,
        best_output: best.2,
    })
}

pub fn run(cfg: &DenoiseConfig, ctx: &RunContext) -> Result<DenoiseOutcome> {
    if !(cfg.sigma >= 0.0) {
        return Err(ExpError::config("sigma must be non-negative"));
    }
    if cfg.architectures.is_empty() {
        return Err(ExpError::config("no architectures configured"));
    }
    let corpus = load_corpus(cfg)?;
    let mut jobs = Vec::new();
    for (i, image) in corpus.iter().enumerate() {
        for arch in &cfg.architectures {
            for &seed in &ctx.seeds {
                jobs.push((image, i, arch, seed));
            }
        }
    }
    let runs = par_map(ctx.workers, jobs, |(image, i, arch, seed)| {
        denoise_one(image, i, arch, seed, cfg.sigma)
    })?;

    let mut art = Artifacts::for_run(ctx)?;
    for image in &corpus {
        art.pgm(&format!("clean/{}.pgm", slug(&image.name)), &image.clean)?;
        let rows: Vec<Vec<String>> = runs
            .iter()
            .filter(|r| r.image == image.name)
            .flat_map(|r| {
                r.curve
                    .iter()
                    .map(|(it, p)| vec![r.arch.clone(), r.seed.to_string(), it.to_string(), fmt_f64(*p)])
            })
            .collect();
        art.csv(
            &format!("psnr_{}.csv", slug(&image.name)),
            &["architecture", "seed", "iteration", "psnr"],
            rows,
        )?;
    }
    if cfg.save_best_outputs {
        for r in &runs {
            let name = format!("best/{}_{}_seed{}.pgm", slug(&r.image), slug(&r.arch), r.seed);
            art.pgm(&name, &r.best_output)?;
        }
    }

    let images = unique(corpus.iter().map(|c| c.name.as_str()));
    let archs = unique(cfg.architectures.iter().map(|a| a.label.as_str()));
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for arch in &archs {
        let mut per_image = BTreeMap::new();
        for image in &images {
            let v: Vec<f64> = runs
                .iter()
                .filter(|r| &r.image == image && &r.arch == arch)
                .map(|r| r.best_psnr)
                .collect();
            let agg = Aggregate::of(&v);
            rows.push(vec![
                image.to_string(),
                arch.to_string(),
                fmt_f64(agg.mean),
                fmt_f64(agg.std),
                agg.n.to_string(),
            ]);
            per_image.insert(image.to_string(), agg);
        }
        let corpus_mean = per_image.values().map(|a| a.mean).sum::<f64>() / per_image.len() as f64;
        rows.push(vec![
            "corpus_mean".into(),
            arch.to_string(),
            fmt_f64(corpus_mean),
            String::new(),
            per_image.len().to_string(),
        ]);
        table.push(json!({
            "architecture": arch,
            "corpus_mean_best_psnr": crate::report::Metric(corpus_mean),
            "images": per_image,
        }));
    }
    for image in &images {
        let v: Vec<f64> = runs
            .iter()
            .filter(|r| &r.image == image && r.arch == archs[0])
            .map(|r| r.noisy_psnr)
            .collect();
        let agg = Aggregate::of(&v);
        rows.push(vec![
            image.to_string(),
            "noisy".into(),
            fmt_f64(agg.mean),
            fmt_f64(agg.std),
            agg.n.to_string(),
        ]);
    }
    art.csv("summary.csv", &["image", "architecture", "mean_best_psnr", "std_best_psnr", "n"], rows)?;

    let per_seed = runs
        .iter()
        .map(|r| {
            record(
                &format!("{}/{}", r.image, r.arch),
                r.seed,
                &[
                    ("best_psnr", r.best_psnr),
                    ("best_iteration", r.best_iteration as f64),
                    ("noisy_psnr", r.noisy_psnr),
                    ("steps_run", r.steps_run as f64),
                ],
            )
        })
        .collect();
    let report = art.finish(
        "exp_denoise",
        ctx.config_echo.clone(),
        per_seed,
        json!({ "corpus": images, "table": table }),
    )?;
    Ok(DenoiseOutcome { runs, report })
}
