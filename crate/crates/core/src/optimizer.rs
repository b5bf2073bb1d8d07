//! Gradient descent on `‖f_θ(z) − x₀‖²` with output-space trajectory recording.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::architectures::Model;
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_INPUT_NOISE_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn default_noise_std() -> f64 {
    DEFAULT_INPUT_NOISE_STD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub record_every: usize,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_noise_std")]
    pub input_noise_std: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            learning_rate: 0.01,
            record_every: 1,
            noise_seed: 0,
            init_seed: 0,
            optimizer: OptimizerKind::default(),
            input_noise_std: DEFAULT_INPUT_NOISE_STD,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::arg("steps", "must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning_rate", "must be finite and non-negative"));
        }
        if self.record_every == 0 || self.record_every > self.steps {
            return Err(Error::arg(
                "record_every",
                format!("must lie in 1..={}, got {}", self.steps, self.record_every),
            ));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::arg("optimizer", "adam needs beta1, beta2 in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// Recorded outputs `f_θ(i)(z)` of one fit, in ascending iteration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub iterations: Vec<usize>,
    pub outputs: Vec<Tensor>,
    pub losses: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn last_output(&self) -> Option<&Tensor> {
        self.outputs.last()
    }

    fn push(&mut self, iteration: usize, output: Tensor, loss: f64) {
        self.iterations.push(iteration);
        self.outputs.push(output);
        self.losses.push(loss);
    }

    /// Writes `meta.json` and one little-endian `f64` file per recorded
    /// output into `dir`. Returns the written paths.
    pub fn save(&self, dir: &Path, fit: Option<&FitConfig>) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::with_capacity(self.len() + 1);
        let mut files = Vec::with_capacity(self.len());
        for (it, out) in self.iterations.iter().zip(&self.outputs) {
            let name = format!("iter_{it:08}.f64le");
            let path = dir.join(&name);
            let bytes: Vec<u8> = out.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            files.push(name);
            written.push(path);
        }
        let meta = TrajectoryMeta {
            shape: self.outputs.first().map(|t| t.shape().to_vec()).unwrap_or_default(),
            iterations: self.iterations.clone(),
            losses: self.losses.clone(),
            files,
            fit: fit.cloned(),
        };
        let path = dir.join("meta.json");
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<(Self, Option<FitConfig>)> {
        let path = dir.join("meta.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: TrajectoryMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        if meta.files.len() != meta.iterations.len() || meta.losses.len() != meta.iterations.len() {
            return Err(Error::arg("meta.json", "iterations, losses and files differ in length"));
        }
        let mut traj = Trajectory::default();
        for ((&it, &loss), name) in meta.iterations.iter().zip(&meta.losses).zip(&meta.files) {
            let p = dir.join(name);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::arg("trajectory file", format!("{} is not a whole number of f64", p.display())));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            traj.push(it, Tensor::new(&meta.shape, data)?, loss);
        }
        Ok((traj, meta.fit))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryMeta {
    shape: Vec<usize>,
    iterations: Vec<usize>,
    losses: Vec<f64>,
    files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<FitConfig>,
}

/// i.i.d. `N(0, std²)` tensor, deterministic in `seed`.
pub fn sample_input_noise(shape: &[usize], seed: u64, std: f64) -> Result<Tensor> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::arg("std", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Network input for a fit: fixed noise for the encoder-decoder families,
/// the coordinate grid for the coordinate network.
pub fn model_input(model: &Model, cfg: &FitConfig) -> Result<Tensor> {
    match model.spec().family {
        crate::architectures::Family::Relunet => Ok(Model::coordinate_grid(&model.spec().signal_shape)),
        _ => sample_input_noise(&model.input_shape(), cfg.noise_seed, cfg.input_noise_std),
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// One update of `params` in place. `t` is the 1-based step count used for
/// Adam's bias correction.
pub fn optimizer_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    t: u64,
    kind: OptimizerKind,
    learning_rate: f64,
) {
    debug_assert_eq!(params.len(), grads.len());
    match kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= learning_rate * g;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            if moments.first.len() != params.len() {
                moments.first = vec![0.0; params.len()];
                moments.second = vec![0.0; params.len()];
            }
            let c1 = 1.0 - beta1.powi(t as i32);
            let c2 = 1.0 - beta2.powi(t as i32);
            for (((p, &g), m), v) in params
                .iter_mut()
                .zip(grads)
                .zip(&mut moments.first)
                .zip(&mut moments.second)
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Optimizer state over a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    moments: Vec<Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Applies one update using each tensor's accumulated gradient; tensors
    /// without a gradient are treated as having a zero gradient.
    pub fn step(&mut self, params: &mut [Tensor]) {
        self.steps += 1;
        if self.moments.len() != params.len() {
            self.moments = vec![Moments::default(); params.len()];
        }
        for (p, m) in params.iter_mut().zip(&mut self.moments) {
            let zeros;
            let (data, grad) = p.data_and_grad();
            let grad = match grad {
                Some(g) => g,
                None => {
                    zeros = vec![0.0; data.len()];
                    &zeros
                }
            };
            optimizer_step(data, grad, m, self.steps, self.kind, self.learning_rate);
        }
    }
}

/// Returned by the per-record observer of [`run_dip_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Runs `cfg.steps` optimizer steps and records every `record_every`-th
/// output plus iterations 0 and `steps`.
pub fn run_dip(model: &mut Model, z: &Tensor, x0: &Tensor, cfg: &FitConfig) -> Result<Trajectory> {
    run_dip_with(model, z, x0, cfg, |_| Flow::Continue)
}

/// [`run_dip`] with an observer called after each recorded iteration. When
/// it returns [`Flow::Stop`] the fit ends there and the trajectory's last
/// iteration is the stopping point rather than `steps`.
pub fn run_dip_with(
    model: &mut Model,
    z: &Tensor,
    x0: &Tensor,
    cfg: &FitConfig,
    mut observe: impl FnMut(&Trajectory) -> Flow,
) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.shape() != model.spec().signal_shape.as_slice() {
        return Err(Error::shape(
            "run_dip",
            format!(
                "target shape {:?} differs from the model output {:?}",
                x0.shape(),
                model.spec().signal_shape
            ),
        ));
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut traj = Trajectory::default();
    for step in 0..=cfg.steps {
        let record = step % cfg.record_every == 0 || step == cfg.steps;
        let (loss, output, grads) = {
            let mut g = Graph::new();
            let zv = g.leaf(z);
            let tv = g.leaf(x0);
            let (out, params) = model.forward(&mut g, zv)?;
            let loss_var = g.sse_loss(out, tv)?;
            let loss = g.value(loss_var)[0];
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            let output = record.then(|| g.to_tensor(out));
            let grads = if step < cfg.steps {
                g.backward(loss_var)?;
                params.iter().map(|&p| g.take_grad(p)).collect()
            } else {
                Vec::new()
            };
            (loss, output, grads)
        };
        if let Some(output) = output {
            traj.push(step, output, loss);
            if observe(&traj) == Flow::Stop {
                break;
            }
        }
        if step == cfg.steps {
            break;
        }
        let params = model.params_mut();
        for (p, g) in params.iter_mut().zip(grads) {
            p.clear_grad();
            if let Some(g) = g {
                p.accumulate_grad_owned(g)?;
            }
        }
        opt.step(params);
    }
    Ok(traj)
}
