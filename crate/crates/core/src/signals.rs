//! Synthetic signals and images, noise models and block resampling.
//!
//! Images are `[h, w]` tensors with intensities in `[0, 1]`; 1D signals are
//! `[n]` tensors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default Gaussian noise level, 25 on the 8-bit scale.
pub const DEFAULT_SIGMA: f64 = 25.0 / 255.0;
/// Default cutoff (cycles per image width) of the low-frequency noise.
pub const DEFAULT_LOW_FREQ_K_MAX: f64 = 5.0;

/// `a1·sin(2π k1 t) + a2·sin(2π k2 t)` sampled at `t = j/n`.
pub fn two_sine(n: usize, k1: usize, k2: usize, a1: f64, a2: f64) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::arg("n", "must be positive"));
    }
    let data = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            a1 * (2.0 * PI * k1 as f64 * t).sin() + a2 * (2.0 * PI * k2 as f64 * t).sin()
        })
        .collect();
    Tensor::new(&[n], data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    LowFrequency { k_max: f64, amplitude: f64 },
}

/// A clean signal, the additive noise and the clipped observation.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyImage {
    pub clean: Tensor,
    pub noise: Tensor,
    pub observed: Tensor,
    pub kind: NoiseKind,
    pub seed: u64,
}

fn noisy(clean: &Tensor, noise: Vec<f64>, kind: NoiseKind, seed: u64) -> Result<NoisyImage> {
    let noise = Tensor::new(clean.shape(), noise)?;
    let observed_data = clean
        .data()
        .iter()
        .zip(noise.data())
        .map(|(c, e)| (c + e).clamp(0.0, 1.0))
        .collect();
    Ok(NoisyImage {
        clean: clean.clone(),
        observed: Tensor::new(clean.shape(), observed_data)?,
        noise,
        kind,
        seed,
    })
}

/// Adds i.i.d. `N(0, sigma²)` noise and clips to `[0, 1]`.
pub fn add_gaussian_noise(image: &Tensor, sigma: f64, seed: u64) -> Result<NoisyImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::arg("sigma", "must be finite and non-negative"));
    }
    let noise = if sigma == 0.0 {
        vec![0.0; image.numel()]
    } else {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::arg("sigma", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..image.numel()).map(|_| normal.sample(&mut rng)).collect()
    };
    noisy(image, noise, NoiseKind::Gaussian { sigma }, seed)
}

/// Adds a random-phase sum of every integer frequency with radius in
/// `(0, k_max]`, rescaled to RMS `amplitude`, then clips to `[0, 1]`.
pub fn add_low_freq_noise(image: &Tensor, k_max: f64, amplitude: f64, seed: u64) -> Result<NoisyImage> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::arg("k_max", "must be positive"));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::arg("amplitude", "must be finite and non-negative"));
    }
    let (h, w) = match image.shape() {
        [n] => (1, *n),
        [h, w] => (*h, *w),
        other => return Err(Error::shape("add_low_freq_noise", format!("expected [n] or [h, w], got {other:?}"))),
    };
    let kind = NoiseKind::LowFrequency { k_max, amplitude };
    if amplitude == 0.0 {
        return noisy(image, vec![0.0; image.numel()], kind, seed);
    }
    let reach = k_max.floor() as i64;
    let fy_range = if h == 1 { 0..=0 } else { -reach..=reach };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = vec![0.0; h * w];
    for fy in fy_range {
        for fx in -reach..=reach {
            // One representative per conjugate pair, no DC.
            if fy < 0 || (fy == 0 && fx <= 0) {
                continue;
            }
            if ((fy * fy + fx * fx) as f64).sqrt() > k_max {
                continue;
            }
            let phase = rng.gen_range(0.0..2.0 * PI);
            for y in 0..h {
                for x in 0..w {
                    let arg = 2.0 * PI * (fy as f64 * y as f64 / h as f64 + fx as f64 * x as f64 / w as f64);
                    noise[y * w + x] += (arg + phase).cos();
                }
            }
        }
    }
    let rms = (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::arg("k_max", "no frequencies fit below the cutoff for this extent"));
    }
    noise.iter_mut().for_each(|v| *v *= amplitude / rms);
    noisy(image, noise, kind, seed)
}

/// Checkerboard cell edge in pixels used by [`synth_pattern_image`].
pub const PATTERN_CELL: usize = 4;
const PATTERN_AMPLITUDE: f64 = 0.25;

/// Band-limited smooth shading with a centred high-frequency checkerboard
/// patch covering roughly `coverage` of the pixels.
pub fn synth_pattern_image(size: usize, coverage: f64) -> Result<Tensor> {
    if size < 2 * PATTERN_CELL {
        return Err(Error::arg("size", format!("must be at least {}", 2 * PATTERN_CELL)));
    }
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::arg("coverage", "must lie in [0, 1]"));
    }
    let side = ((coverage.sqrt() * size as f64).round() as usize).min(size);
    let start = (size - side) / 2;
    let patch = start..start + side;
    let s = size as f64;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64 / s, x as f64 / s);
            let mut v = 0.5 + 0.12 * (2.0 * PI * fx).cos() + 0.08 * (2.0 * PI * fy).sin()
                + 0.03 * (2.0 * PI * (fx + fy)).cos();
            if patch.contains(&y) && patch.contains(&x) {
                let parity = (y / PATTERN_CELL + x / PATTERN_CELL) % 2;
                v += if parity == 0 { PATTERN_AMPLITUDE } else { -PATTERN_AMPLITUDE };
            }
            data.push(v);
        }
    }
    Tensor::new(&[size, size], data)
}

/// Non-overlapping `factor`-wide block means along every axis.
pub fn downsample(image: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::arg("factor", "must be positive"));
    }
    for &d in image.shape() {
        if d % factor != 0 {
            return Err(Error::arg("factor", format!("extent {d} is not divisible by {factor}")));
        }
    }
    match *image.shape() {
        [n] => {
            let data = image
                .data()
                .chunks_exact(factor)
                .map(|c| c.iter().sum::<f64>() / factor as f64)
                .collect();
            Tensor::new(&[n / factor], data)
        }
        [h, w] => {
            let (oh, ow) = (h / factor, w / factor);
            let area = (factor * factor) as f64;
            let mut data = vec![0.0; oh * ow];
            for y in 0..h {
                for x in 0..w {
                    data[(y / factor) * ow + x / factor] += image.data()[y * w + x];
                }
            }
            data.iter_mut().for_each(|v| *v /= area);
            Tensor::new(&[oh, ow], data)
        }
        _ => Err(Error::shape("downsample", format!("expected [n] or [h, w], got {:?}", image.shape()))),
    }
}

/// Procedural grayscale test scenes standing in for a benchmark corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scene {
    /// Flat-shaded disks and rectangles over a gradient.
    Shapes,
    /// Overlapping soft blobs.
    Blobs,
    /// Smooth random field with one hard horizon edge.
    Terrain,
    /// Oriented gratings in several regions: strong mid/high-frequency content.
    Stripes,
}

impl Scene {
    pub const ALL: [Scene; 4] = [Scene::Shapes, Scene::Blobs, Scene::Terrain, Scene::Stripes];

    pub fn name(self) -> &'static str {
        match self {
            Scene::Shapes => "shapes",
            Scene::Blobs => "blobs",
            Scene::Terrain => "terrain",
            Scene::Stripes => "stripes",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Renders the scene at `size × size`; intensities lie in `[0, 1]`.
    pub fn render(self, size: usize) -> Tensor {
        let s = size as f64;
        let mut data = Vec::with_capacity(size * size);
        for yi in 0..size {
            for xi in 0..size {
                // Pixel centres in [0, 1).
                let (y, x) = ((yi as f64 + 0.5) / s, (xi as f64 + 0.5) / s);
                data.push(self.value(y, x).clamp(0.0, 1.0));
            }
        }
        Tensor::new(&[size, size], data).expect("size must be positive")
    }

    fn value(self, y: f64, x: f64) -> f64 {
        let disk = |cy: f64, cx: f64, r: f64| ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() <= r;
        match self {
            Scene::Shapes => {
                let mut v = 0.25 + 0.35 * x;
                if (0.15..0.45).contains(&y) && (0.55..0.9).contains(&x) {
                    v = 0.85;
                }
                if disk(0.62, 0.32, 0.2) {
                    v = 0.1;
                }
                if disk(0.7, 0.72, 0.12) {
                    v = 0.65 - 0.3 * (y - 0.58);
                }
                v
            }
            Scene::Blobs => {
                let blob = |cy: f64, cx: f64, r: f64, a: f64| a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (r * r)).exp();
                0.2 + blob(0.3, 0.3, 0.18, 0.55) + blob(0.65, 0.6, 0.25, 0.45) + blob(0.25, 0.8, 0.1, 0.35)
                    - blob(0.8, 0.2, 0.12, 0.15)
            }
            Scene::Terrain => {
                let field = 0.15 * (2.0 * PI * (1.3 * x + 0.4 * y)).sin()
                    + 0.1 * (2.0 * PI * (2.1 * y - 0.7 * x) + 1.0).cos()
                    + 0.06 * (2.0 * PI * (3.7 * x + 2.9 * y) + 2.0).sin();
                let horizon = 0.45 + 0.08 * (2.0 * PI * 1.5 * x).sin();
                if y < horizon {
                    0.75 + 0.5 * field
                } else {
                    0.35 + field
                }
            }
            Scene::Stripes => {
                let base = 0.5 + 0.1 * (2.0 * PI * x).cos();
                let grating = if y < 0.5 && x < 0.5 {
                    (2.0 * PI * 8.0 * x).sin()
                } else if y < 0.5 {
                    (2.0 * PI * 6.0 * (x + y)).sin()
                } else if x < 0.5 {
                    (2.0 * PI * 10.0 * y).sin()
                } else {
                    (2.0 * PI * 7.0 * (x - y)).sin()
                };
                let mut v = base + 0.3 * grating;
                if disk(0.5, 0.5, 0.14) {
                    v = 0.5 - 0.2 * (x - 0.5);
                }
                v
            }
        }
    }
}
