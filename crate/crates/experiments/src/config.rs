//! JSON experiment configuration.
//!
//! Every experiment-specific field has a desk-scale default, so a config
//! file only needs the `experiment` tag plus whatever it changes.

use std::fs;
use std::path::{Path, PathBuf};

use dipbias_core::optimizer::FitConfig;
use dipbias_core::signals::{Scene, DEFAULT_LOW_FREQ_K_MAX, DEFAULT_SIGMA};
use dipbias_core::spectral::ConvergenceCriterion;
use dipbias_core::{Family, ModelSpec, UpsampleMode};
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Falls back to the experiment's default seed list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment")]
pub enum ExperimentKind {
    #[serde(rename = "exp_1d")]
    OneD(OneDConfig),
    #[serde(rename = "exp_divergence")]
    Divergence(DivergenceConfig),
    #[serde(rename = "exp_denoise")]
    Denoise(DenoiseConfig),
    #[serde(rename = "exp_failure")]
    Failure(FailureConfig),
    #[serde(rename = "exp_capacity")]
    Capacity(CapacityConfig),
    #[serde(rename = "exp_stride")]
    Stride(StrideConfig),
    #[serde(rename = "exp_spectrum")]
    Spectrum(SpectrumConfig),
    #[serde(rename = "upsample_response")]
    Response(ResponseConfig),
    #[serde(rename = "grad_check")]
    GradCheck(GradCheckConfig),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OneD(_) => "exp_1d",
            ExperimentKind::Divergence(_) => "exp_divergence",
            ExperimentKind::Denoise(_) => "exp_denoise",
            ExperimentKind::Failure(_) => "exp_failure",
            ExperimentKind::Capacity(_) => "exp_capacity",
            ExperimentKind::Stride(_) => "exp_stride",
            ExperimentKind::Spectrum(_) => "exp_spectrum",
            ExperimentKind::Response(_) => "upsample_response",
            ExperimentKind::GradCheck(_) => "grad_check",
        }
    }

    pub fn default_seeds(&self) -> Vec<u64> {
        let n = match self {
            ExperimentKind::OneD(_) | ExperimentKind::Denoise(_) => 5,
            ExperimentKind::Capacity(_) => 10,
            ExperimentKind::Divergence(_) | ExperimentKind::Failure(_) | ExperimentKind::Stride(_) => 3,
            ExperimentKind::Spectrum(_) | ExperimentKind::Response(_) | ExperimentKind::GradCheck(_) => 1,
        };
        (0..n).collect()
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            out_dir: default_out_dir(),
            seeds: None,
            workers: default_workers(),
            kind,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| ExpError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn resolved_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| self.kind.default_seeds())
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(ExpError::config("workers must be at least 1"));
        }
        if self.resolved_seeds().is_empty() {
            return Err(ExpError::config("seed list is empty"));
        }
        Ok(())
    }
}

fn fit(steps: usize, learning_rate: f64, record_every: usize) -> FitConfig {
    FitConfig {
        steps,
        learning_rate,
        record_every,
        ..FitConfig::default()
    }
}

/// `a1·sin(2π k1 t) + a2·sin(2π k2 t)` on `n` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSineSpec {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub a1: f64,
    pub a2: f64,
}

impl Default for TwoSineSpec {
    fn default() -> Self {
        Self {
            n: 256,
            k1: 5,
            k2: 50,
            a1: 1.0,
            a2: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OneDConfig {
    pub signal: TwoSineSpec,
    pub models: Vec<ModelSpec>,
    pub fit: FitConfig,
    pub convergence: ConvergenceCriterion,
    /// End a fit once both frequencies have converged.
    pub early_stop: bool,
    pub save_trajectories: bool,
    /// Relative gap `|t1 - t2| / max(t1, t2)` counted as equal convergence.
    pub equal_band: f64,
}

pub const DEFAULT_EQUAL_BAND: f64 = 0.2;

impl Default for OneDConfig {
    fn default() -> Self {
        let n = TwoSineSpec::default().n;
        Self {
            signal: TwoSineSpec::default(),
            models: vec![
                ModelSpec::new(Family::DipConv1d, 10, 256, &[n]),
                ModelSpec::new(Family::DipLinear1d, 10, 256, &[n]),
            ],
            fit: fit(1000, 1e-3, 1),
            convergence: ConvergenceCriterion::default(),
            early_stop: true,
            save_trajectories: false,
            equal_band: DEFAULT_EQUAL_BAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivergenceConfig {
    pub size: usize,
    pub coverages: Vec<f64>,
    pub model: ModelSpec,
    pub fit: FitConfig,
    /// The second run of a pair uses `seed + pair_offset`.
    pub pair_offset: u64,
    /// Outputs saved at the deepest local minima of ε, per run pair.
    pub minima_outputs: usize,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            size: 64,
            coverages: vec![0.25, 0.5, 1.0],
            model: ModelSpec::new(Family::DipConv2d, 5, 32, &[64, 64]),
            fit: fit(1000, 5e-4, 10),
            pair_offset: 10_000,
            minima_outputs: 3,
        }
    }
}

/// One architecture of the denoising comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchEntry {
    pub label: String,
    pub model: ModelSpec,
    pub fit: FitConfig,
    /// Stop after this many iterations without a new best PSNR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    /// Stop once the loss falls below this fraction of the initial loss:
    /// the output then reproduces the noisy observation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_loss_ratio: Option<f64>,
}

impl ArchEntry {
    fn desk(label: &str, model: ModelSpec, steps: usize) -> Self {
        Self {
            label: label.into(),
            model,
            fit: fit(steps, 1e-3, 10),
            patience: Some(500),
            stop_loss_ratio: Some(1e-4),
        }
    }

    /// The four architectures of the denoising table at `size × size`.
    pub fn defaults(size: usize) -> Vec<Self> {
        let s = [size, size];
        vec![
            Self::desk("DIP", ModelSpec::new(Family::DipConv2d, 10, 32, &s), 1500),
            Self::desk("DIP Linear-128", ModelSpec::new(Family::DipLinear2d, 5, 128, &s), 1500),
            Self::desk("DIP Linear-2048", ModelSpec::new(Family::DipLinear2d, 5, 2048, &s), 1500),
            Self::desk("ReLUNet", ModelSpec::new(Family::Relunet, 10, 64, &s), 1000),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub size: usize,
    pub scenes: Vec<Scene>,
    /// Extra 8-bit PGM images, or directories of them; larger ones are
    /// block-averaged down to `size`.
    pub images: Vec<PathBuf>,
    pub sigma: f64,
    pub architectures: Vec<ArchEntry>,
    pub save_best_outputs: bool,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            size: 64,
            scenes: Scene::ALL.to_vec(),
            images: Vec::new(),
            sigma: DEFAULT_SIGMA,
            architectures: ArchEntry::defaults(64),
            save_best_outputs: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureConfig {
    pub size: usize,
    pub scene: Scene,
    pub k_max: f64,
    pub amplitude: f64,
    /// Gaussian noise level of the control run.
    pub control_sigma: f64,
    pub model: ModelSpec,
    pub fit: FitConfig,
    /// Iterations whose outputs are written as images, besides the last.
    pub snapshots: Vec<usize>,
}

impl Default for FailureConfig {
    fn default() -> Self {
        Self {
            size: 64,
            scene: Scene::Stripes,
            k_max: DEFAULT_LOW_FREQ_K_MAX,
            amplitude: DEFAULT_SIGMA,
            control_sigma: DEFAULT_SIGMA,
            model: ModelSpec::new(Family::DipConv2d, 10, 32, &[64, 64]),
            fit: fit(2000, 1e-3, 10),
            snapshots: vec![20, 500],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityConfig {
    pub signal: TwoSineSpec,
    pub families: Vec<Family>,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub fit: FitConfig,
    pub convergence: ConvergenceCriterion,
    pub early_stop: bool,
    /// Relative gap `|t1 - t2| / max(t1, t2)` counted as equal convergence.
    pub equal_band: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            signal: TwoSineSpec::default(),
            families: vec![Family::DipConv1d, Family::DipLinear1d],
            depths: vec![4, 6, 8, 10],
            widths: vec![64, 128, 256],
            fit: fit(1500, 1e-3, 1),
            convergence: ConvergenceCriterion::default(),
            early_stop: true,
            equal_band: DEFAULT_EQUAL_BAND,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrideConfig {
    pub size: usize,
    pub scene: Scene,
    pub strides: Vec<usize>,
    pub depth: usize,
    pub width: usize,
    pub mode: UpsampleMode,
    pub resample_stages: usize,
    pub fit: FitConfig,
    /// First radial bin of the high band; defaults to `size / 8`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high_band_from: Option<usize>,
}

impl Default for StrideConfig {
    fn default() -> Self {
        Self {
            size: 64,
            scene: Scene::Stripes,
            strides: vec![4, 32],
            depth: 6,
            width: 32,
            mode: UpsampleMode::Bilinear,
            resample_stages: 1,
            fit: fit(500, 1e-3, 10),
            high_band_from: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    pub size: usize,
    pub scenes: Vec<Scene>,
    pub model: ModelSpec,
    /// `steps` is raised to the last snapshot iteration if smaller.
    pub fit: FitConfig,
    pub iterations: Vec<usize>,
    /// Bins below this radius form the low band; defaults to `size / 8`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_split: Option<usize>,
}

pub const DEFAULT_SPECTRUM_ITERATIONS: [usize; 5] = [20, 40, 60, 80, 200];

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            size: 64,
            scenes: vec![Scene::Stripes],
            model: ModelSpec::new(Family::DipConv2d, 10, 32, &[64, 64]),
            fit: fit(200, 1e-3, 1),
            iterations: DEFAULT_SPECTRUM_ITERATIONS.to_vec(),
            band_split: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseConfig {
    pub modes: Vec<UpsampleMode>,
    pub strides: Vec<usize>,
    pub probe_length: usize,
    /// Frequencies in cycles per output sample; defaults to every DFT bin
    /// `j / probe_length` up to 0.5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            modes: vec![UpsampleMode::Nearest, UpsampleMode::Bilinear],
            strides: vec![2, 4, 8],
            probe_length: 512,
            k_grid: None,
        }
    }
}

impl ResponseConfig {
    pub fn grid(&self) -> Vec<f64> {
        self.k_grid.clone().unwrap_or_else(|| {
            (0..=self.probe_length / 2)
                .map(|j| j as f64 / self.probe_length as f64)
                .collect()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    /// Random shape configurations per operation.
    pub cases: usize,
    pub eps: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            cases: 50,
            eps: 1e-4,
            tolerance: 1e-4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment": "exp_1d"}"#).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::OneD(OneDConfig::default()));
        assert_eq!(cfg.resolved_seeds(), vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.workers, 1);
    }

    #[test]
    fn configs_round_trip() {
        let kinds = [
            ExperimentKind::OneD(OneDConfig::default()),
            ExperimentKind::Divergence(DivergenceConfig::default()),
            ExperimentKind::Denoise(DenoiseConfig::default()),
            ExperimentKind::Failure(FailureConfig::default()),
            ExperimentKind::Capacity(CapacityConfig::default()),
            ExperimentKind::Stride(StrideConfig::default()),
            ExperimentKind::Spectrum(SpectrumConfig::default()),
            ExperimentKind::Response(ResponseConfig::default()),
            ExperimentKind::GradCheck(GradCheckConfig::default()),
        ];
        for kind in kinds {
            let mut cfg = ExperimentConfig::new(kind);
            cfg.seeds = Some(vec![3, 9]);
            let text = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg, "{text}");
        }
    }

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "exp_9"}"#).is_err());
    }
}
