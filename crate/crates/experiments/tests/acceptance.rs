//! End-to-end acceptance criteria. Each test prints one `criterion N:` line.
//!
//! The suite takes a few hours on one core, so every test is ignored by
//! default. Run it with
//! `cargo test --release -p dipbias --test acceptance -- --ignored --nocapture --test-threads 1`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dipbias::config::{
    CapacityConfig, DenoiseConfig, DivergenceConfig, FailureConfig, GradCheckConfig, OneDConfig, ResponseConfig,
    SpectrumConfig, StrideConfig, TwoSineSpec,
};
use dipbias::exp::failure::NoiseArm;
use dipbias::exp::response::AGREEMENT_K_FRACTION;
use dipbias::exp::{capacity, denoise, divergence, failure, gradcheck, one_d, response, stride};
use dipbias::{ExperimentConfig, ExperimentKind, RunContext};
use dipbias_core::spectral::{dft, dft_direct, fft_radix2};
use dipbias_core::upsample_response::analytic_response;
use dipbias_core::{Family, FitConfig, ModelSpec, UpsampleMode};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn context(kind: ExperimentKind, out: &Path, seeds: &[u64]) -> RunContext {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.out_dir = out.to_path_buf();
    cfg.seeds = Some(seeds.to_vec());
    RunContext::from_config(&cfg).unwrap()
}

fn verdict(n: u32, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let in_time = elapsed <= budget;
    let status = if pass && in_time { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {status} ({detail}; {:.1} s of {} s budget)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} over its time budget");
}

const FIVE: [u64; 5] = [0, 1, 2, 3, 4];
const THREE: [u64; 3] = [0, 1, 2];

#[test]
#[ignore]
fn criterion_01_gradient_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = GradCheckConfig::default();
    assert_eq!((cfg.cases, cfg.tolerance), (50, 1e-4));
    let out = gradcheck::run(&cfg, &context(ExperimentKind::GradCheck(cfg.clone()), dir.path(), &[0])).unwrap();
    let ops: std::collections::BTreeSet<_> = out.results.iter().map(|r| r.op).collect();
    let worst = out.worst();
    verdict(
        1,
        worst <= 1e-4 && ops.len() == gradcheck::OPS.len(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!("{} ops, {} checks, worst relative error {worst:.2e}", ops.len(), out.results.len()),
    );
}

#[test]
#[ignore]
fn criterion_02_dft_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_diff, mut worst_parseval) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let fast = fft_radix2(&c, false).unwrap();
        let direct = dft_direct(&c, false);
        for (a, b) in fast.iter().zip(&direct) {
            worst_diff = worst_diff.max((a - b).norm());
        }
        let temporal: f64 = x.iter().map(|v| v * v).sum();
        let spectral: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / 256.0;
        worst_parseval = worst_parseval.max((spectral - temporal).abs() / temporal);
    }
    verdict(
        2,
        worst_diff < 1e-9 && worst_parseval <= 1e-9,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("max |fast - direct| {worst_diff:.2e}, Parseval relative error {worst_parseval:.2e}"),
    );
}

fn one_d_config(models: Vec<ModelSpec>) -> OneDConfig {
    let cfg = OneDConfig { models, ..OneDConfig::default() };
    assert_eq!(cfg.signal, TwoSineSpec { n: 256, k1: 5, k2: 50, a1: 1.0, a2: 1.0 });
    cfg
}

#[test]
#[ignore]
fn criterion_03_frequency_decoupling() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = one_d_config(vec![ModelSpec::new(Family::DipConv1d, 10, 256, &[256])]);
    let out = one_d::run(&cfg, &context(ExperimentKind::OneD(cfg.clone()), dir.path(), &FIVE)).unwrap();
    let ordered = out
        .runs
        .iter()
        .filter(|r| matches!((r.fit.t1, r.fit.t2), (Some(a), Some(b)) if a < b) || (r.fit.t1.is_some() && r.fit.t2.is_none()))
        .count();
    let wide = out.runs.iter().filter(|r| r.ratio() >= 1.5).count();
    let times: Vec<String> = out.runs.iter().map(|r| format!("{:?}/{:?}", r.fit.t1, r.fit.t2)).collect();
    verdict(
        3,
        ordered == 5 && wide >= 4,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("t1 < t2 in {ordered}/5, ratio >= 1.5 in {wide}/5, t1/t2 {}", times.join(" ")),
    );
}

#[test]
#[ignore]
fn criterion_04_linear_non_decoupling() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = one_d_config(vec![
        ModelSpec::new(Family::DipLinear1d, 10, 256, &[256]),
        ModelSpec::new(Family::DipLinear1d, 10, 2048, &[256]),
        ModelSpec::new(Family::DipLinear1d, 24, 256, &[256]),
    ]);
    let out = one_d::run(&cfg, &context(ExperimentKind::OneD(cfg.clone()), dir.path(), &FIVE)).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in &cfg.models {
        let label = one_d::model_label(m);
        let equal = out
            .runs
            .iter()
            .filter(|r| r.label == label && r.equal_rate(cfg.equal_band))
            .count();
        pass &= equal >= 4;
        parts.push(format!("{label}: {equal}/5 within band"));
    }
    verdict(4, pass, start.elapsed(), Duration::from_secs(600), &parts.join(", "));
}

#[test]
#[ignore]
fn criterion_05_denoising_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = DenoiseConfig::default();
    assert_eq!((cfg.size, cfg.sigma), (64, 25.0 / 255.0));
    let out = denoise::run(&cfg, &context(ExperimentKind::Denoise(cfg.clone()), dir.path(), &FIVE)).unwrap();
    let images: std::collections::BTreeSet<_> = out.runs.iter().map(|r| r.image.clone()).collect();
    let m = |arch: &str| out.corpus_mean(arch);
    let (dip, lin128, lin2048, relu) = (m("DIP"), m("DIP Linear-128"), m("DIP Linear-2048"), m("ReLUNet"));
    let pass = images.len() >= 3 && dip - lin128 >= 3.0 && (dip - relu).abs() <= 2.0 && lin2048 - lin128 <= 1.0;
    verdict(
        5,
        pass,
        start.elapsed(),
        Duration::from_secs(3600),
        &format!(
            "{} images; mean best PSNR DIP {dip:.2}, Linear-128 {lin128:.2}, Linear-2048 {lin2048:.2}, ReLUNet {relu:.2} dB",
            images.len()
        ),
    );
}

#[test]
#[ignore]
fn criterion_06_failure_construction() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = FailureConfig::default();
    assert_eq!((cfg.k_max, cfg.amplitude), (5.0, 25.0 / 255.0));
    let out = failure::run(&cfg, &context(ExperimentKind::Failure(cfg.clone()), dir.path(), &THREE)).unwrap();
    let margins = |arm| -> Vec<f64> { out.runs.iter().filter(|r| r.arm == arm).map(|r| r.margin()).collect() };
    let (low, gauss) = (margins(NoiseArm::LowFrequency), margins(NoiseArm::Gaussian));
    let pass = low.iter().all(|&d| d <= 1.0) && gauss.iter().all(|&d| d >= 2.0);
    verdict(
        6,
        pass,
        start.elapsed(),
        Duration::from_secs(1800),
        &format!("max PSNR over noisy PSNR: low-frequency {low:.2?} dB, Gaussian {gauss:.2?} dB"),
    );
}

#[test]
#[ignore]
fn criterion_07_divergence_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = DivergenceConfig::default();
    assert_eq!(cfg.coverages, vec![0.25, 0.5, 1.0]);
    let out = divergence::run(&cfg, &context(ExperimentKind::Divergence(cfg.clone()), dir.path(), &THREE)).unwrap();
    let peaks: Vec<Vec<f64>> = THREE.iter().map(|&s| out.peaks(s)).collect();
    let monotone = peaks.iter().filter(|p| p.windows(2).all(|w| w[0] <= w[1])).count();
    verdict(
        7,
        monotone == 3,
        start.elapsed(),
        Duration::from_secs(1800),
        &format!("{monotone}/3 seed pairs non-decreasing, peaks {peaks:.1?}"),
    );
}

#[test]
#[ignore]
fn criterion_08_upsampling_responses() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = ResponseConfig::default();
    let out = response::run(&cfg, &context(ExperimentKind::Response(cfg.clone()), dir.path(), &[0])).unwrap();
    let mut zeros = 0.0f64;
    for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
        for l in [2usize, 4, 8] {
            for m in 1..=l / 2 {
                zeros = zeros.max(analytic_response(mode, m as f64 / l as f64, l).abs());
            }
        }
    }
    let mut pass = zeros < 1e-12 && out.stride_violations().is_empty();
    let mut diffs = Vec::new();
    for l in [2usize, 4, 8] {
        for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
            let worst = out
                .rows
                .iter()
                .filter(|r| r.mode == mode && r.stride == l && r.k <= AGREEMENT_K_FRACTION / l as f64)
                .filter_map(|r| r.measured.map(|m| (m - r.analytic).abs()))
                .fold(0.0, f64::max);
            pass &= worst <= 0.05;
            diffs.push(format!("{mode:?} L={l} {worst:.4}"));
        }
    }
    verdict(
        8,
        pass,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "zeros {zeros:.1e}, stride violations {}, max |measured - analytic| {}",
            out.stride_violations().len(),
            diffs.join(", ")
        ),
    );
}

#[test]
#[ignore]
fn criterion_09_stride_smoothing() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = StrideConfig::default();
    assert_eq!(cfg.fit.steps, 500);
    let out = stride::run(&cfg, &context(ExperimentKind::Stride(cfg.clone()), dir.path(), &THREE)).unwrap();
    let pairs: Vec<(f64, f64)> = THREE
        .iter()
        .map(|&s| (out.energy(32, s).unwrap(), out.energy(4, s).unwrap()))
        .collect();
    let smoother = pairs.iter().filter(|(e32, e4)| e32 < e4).count();
    verdict(
        9,
        smoother == 3,
        start.elapsed(),
        Duration::from_secs(1200),
        &format!("stride 32 below stride 4 in {smoother}/3 seeds, (E32, E4) {pairs:.3?}"),
    );
}

#[test]
#[ignore]
fn criterion_10_capacity_trends() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = CapacityConfig::default();
    assert_eq!((cfg.depths.clone(), cfg.widths.clone()), (vec![4, 6, 8, 10], vec![64, 128, 256]));
    let seeds: Vec<u64> = (0..10).collect();
    let out = capacity::run(&cfg, &context(ExperimentKind::Capacity(cfg.clone()), dir.path(), &seeds)).unwrap();
    let conv = out.trends(Family::DipConv1d).unwrap();
    let linear_points: Vec<_> = out.points.iter().filter(|p| p.family == Family::DipLinear1d).collect();
    let linear_ok = linear_points.iter().filter(|p| p.equal_rate).count();
    let pass = conv.depth_vs_gap.0 > 0.0
        && conv.width_vs_t1.0 < 0.0
        && conv.width_vs_t2.0 < 0.0
        && linear_ok == linear_points.len();
    verdict(
        10,
        pass,
        start.elapsed(),
        Duration::from_secs(7200),
        &format!(
            "conv Spearman depth~gap {:+.3}, width~t1 {:+.3}, width~t2 {:+.3}; linear band held at {linear_ok}/{} points",
            conv.depth_vs_gap.0,
            conv.width_vs_t1.0,
            conv.width_vs_t2.0,
            linear_points.len()
        ),
    );
}

/// Small configs for every experiment, so the rerun check stays fast.
fn reproducibility_configs() -> Vec<ExperimentKind> {
    let fit = |steps, record_every| FitConfig {
        steps,
        learning_rate: 1e-3,
        record_every,
        ..FitConfig::default()
    };
    let sq = [16, 16];
    let mut arch = dipbias::config::ArchEntry::defaults(16);
    for a in &mut arch {
        a.model.width = a.model.width.min(8);
        a.model.depth = a.model.depth.min(4);
        a.fit = fit(20, 5);
    }
    vec![
        ExperimentKind::OneD(OneDConfig {
            signal: TwoSineSpec { n: 64, k1: 2, k2: 12, a1: 1.0, a2: 1.0 },
            models: vec![
                ModelSpec::new(Family::DipConv1d, 4, 8, &[64]),
                ModelSpec::new(Family::DipLinear1d, 3, 16, &[64]),
            ],
            fit: fit(60, 1),
            save_trajectories: true,
            ..OneDConfig::default()
        }),
        ExperimentKind::Divergence(DivergenceConfig {
            size: 16,
            model: ModelSpec::new(Family::DipConv2d, 2, 4, &sq),
            fit: fit(20, 5),
            ..DivergenceConfig::default()
        }),
        ExperimentKind::Denoise(DenoiseConfig {
            size: 16,
            architectures: arch,
            ..DenoiseConfig::default()
        }),
        ExperimentKind::Failure(FailureConfig {
            size: 16,
            model: ModelSpec::new(Family::DipConv2d, 2, 4, &sq),
            fit: fit(20, 5),
            snapshots: vec![5, 20],
            ..FailureConfig::default()
        }),
        ExperimentKind::Capacity(CapacityConfig {
            signal: TwoSineSpec { n: 32, k1: 1, k2: 6, a1: 1.0, a2: 1.0 },
            depths: vec![2, 3],
            widths: vec![4, 8],
            fit: fit(30, 1),
            ..CapacityConfig::default()
        }),
        ExperimentKind::Stride(StrideConfig {
            size: 16,
            strides: vec![2, 4],
            depth: 2,
            width: 4,
            fit: fit(20, 5),
            ..StrideConfig::default()
        }),
        ExperimentKind::Spectrum(SpectrumConfig {
            size: 16,
            model: ModelSpec::new(Family::DipConv2d, 2, 4, &sq),
            fit: fit(20, 1),
            iterations: vec![5, 20],
            ..SpectrumConfig::default()
        }),
        ExperimentKind::Response(ResponseConfig {
            probe_length: 64,
            k_grid: Some((0..=32).map(|j| j as f64 / 64.0).collect()),
            ..ResponseConfig::default()
        }),
        ExperimentKind::GradCheck(GradCheckConfig {
            cases: 2,
            ..GradCheckConfig::default()
        }),
    ]
}

fn artifacts(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "pgm")) {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
#[ignore]
fn criterion_11_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for kind in reproducibility_configs() {
        let name = kind.name();
        let subcommand = match name {
            "exp_1d" => "exp-1d".to_string(),
            "upsample_response" => "upsample-response".to_string(),
            "grad_check" => "grad-check".to_string(),
            other => other.replace('_', "-"),
        };
        let mut cfg = ExperimentConfig::new(kind);
        cfg.seeds = Some(vec![0, 1]);
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{name}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_dipbias"))
                .args([&subcommand, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            assert!(status.status.success(), "{name}: {}", String::from_utf8_lossy(&status.stderr));
            runs.push(artifacts(&out));
        }
        assert!(!runs[0].is_empty(), "{name} wrote no CSV or PGM artifacts");
        compared += runs[0].len();
        if runs[0] != runs[1] {
            mismatches.push(name);
        }
    }
    verdict(
        11,
        mismatches.is_empty(),
        start.elapsed(),
        Duration::from_secs(600),
        &format!("{compared} CSV/PGM artifacts over 9 experiments, mismatched experiments {mismatches:?}"),
    );
}
