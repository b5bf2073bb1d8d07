//! Encoder-decoder, fully-connected and coordinate-network model families.
//!
//! Convolutional encoder-decoders downsample with strided convolutions and
//! upsample with the fixed-kernel [`Graph::upsample`] followed by a stride-1
//! convolution. The fully-connected "linear" encoder-decoders flatten the
//! input noise and apply `depth` dense layers of `width` units. The
//! coordinate network maps normalized pixel coordinates to intensities.

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::upsample::UpsampleMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(rename = "dip_conv_1d")]
    DipConv1d,
    #[serde(rename = "dip_linear_1d")]
    DipLinear1d,
    #[serde(rename = "dip_conv_2d")]
    DipConv2d,
    #[serde(rename = "dip_linear_2d")]
    DipLinear2d,
    Relunet,
}

impl Family {
    pub fn is_conv(self) -> bool {
        matches!(self, Family::DipConv1d | Family::DipConv2d)
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Family::DipLinear1d | Family::DipLinear2d)
    }

    /// Signal dimensionality required by the family, if fixed.
    fn signal_dims(self) -> Option<usize> {
        match self {
            Family::DipConv1d | Family::DipLinear1d => Some(1),
            Family::DipConv2d | Family::DipLinear2d => Some(2),
            Family::Relunet => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::DipConv1d => "dip_conv_1d",
            Family::DipLinear1d => "dip_linear_1d",
            Family::DipConv2d => "dip_conv_2d",
            Family::DipLinear2d => "dip_linear_2d",
            Family::Relunet => "relunet",
        })
    }
}

/// Declarative architecture description.
///
/// Convolution-only fields (`kernel_size`, `upsample_mode`,
/// `upsample_stride`, `resample_stages`) must be left unset for the other
/// families. `signal_shape` is the shape of the fitted signal (`[n]` or
/// `[h, w]`); it fixes the dense layer sizes of the linear families and the
/// coordinate dimension of the coordinate network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub depth: usize,
    pub width: usize,
    pub signal_shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsample_mode: Option<UpsampleMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsample_stride: Option<usize>,
    /// The first `resample_stages` encoder layers downsample and the last
    /// `resample_stages` decoder layers upsample. Defaults to all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_stages: Option<usize>,
    /// Channels of the noise input. Defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_channels: Option<usize>,
    /// Defaults to ReLU for the coordinate network, leaky ReLU otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default)]
    pub init_seed: u64,
}

pub const DEFAULT_KERNEL_SIZE: usize = 3;
pub const DEFAULT_UPSAMPLE_STRIDE: usize = 2;

impl ModelSpec {
    pub fn new(family: Family, depth: usize, width: usize, signal_shape: &[usize]) -> Self {
        Self {
            family,
            depth,
            width,
            signal_shape: signal_shape.to_vec(),
            kernel_size: None,
            upsample_mode: None,
            upsample_stride: None,
            resample_stages: None,
            input_channels: None,
            activation: None,
            init_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn with_upsampling(mut self, mode: UpsampleMode, stride: usize) -> Self {
        self.upsample_mode = Some(mode);
        self.upsample_stride = Some(stride);
        self
    }

    pub fn kernel(&self) -> usize {
        self.kernel_size.unwrap_or(DEFAULT_KERNEL_SIZE)
    }

    pub fn stride(&self) -> usize {
        self.upsample_stride.unwrap_or(DEFAULT_UPSAMPLE_STRIDE)
    }

    pub fn mode(&self) -> UpsampleMode {
        self.upsample_mode.unwrap_or(UpsampleMode::Bilinear)
    }

    pub fn stages(&self) -> usize {
        self.resample_stages.unwrap_or(self.depth / 2)
    }

    pub fn in_channels(&self) -> usize {
        self.input_channels.unwrap_or(1)
    }

    pub fn activation_kind(&self) -> Activation {
        self.activation.unwrap_or(match self.family {
            Family::Relunet => Activation::Relu,
            _ => Activation::default(),
        })
    }

    pub fn signal_numel(&self) -> usize {
        self.signal_shape.iter().product()
    }

    /// Shape of the tensor fed to [`Model::forward`].
    pub fn input_shape(&self) -> Vec<usize> {
        match self.family {
            Family::Relunet => vec![self.signal_numel(), self.signal_shape.len()],
            _ => {
                let mut s = vec![self.in_channels()];
                s.extend(&self.signal_shape);
                s
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.depth < 2 {
            return bad(format!("depth must be at least 2, got {}", self.depth));
        }
        if self.width == 0 {
            return bad("width must be at least 1".into());
        }
        if self.signal_shape.is_empty() || self.signal_shape.contains(&0) {
            return bad(format!("signal_shape {:?} must have nonzero extents", self.signal_shape));
        }
        match self.family.signal_dims() {
            Some(d) if d != self.signal_shape.len() => {
                return bad(format!(
                    "{} fits {d}D signals, signal_shape is {:?}",
                    self.family, self.signal_shape
                ))
            }
            None if !(1..=2).contains(&self.signal_shape.len()) => {
                return bad(format!("relunet fits 1D or 2D signals, got {:?}", self.signal_shape))
            }
            _ => {}
        }
        if self.input_channels == Some(0) {
            return bad("input_channels must be at least 1".into());
        }
        if let Some(Activation::LeakyRelu { slope }) = self.activation {
            if !slope.is_finite() {
                return bad("leaky relu slope must be finite".into());
            }
        }
        if !self.family.is_conv() {
            let conv_only = [
                ("kernel_size", self.kernel_size.is_some()),
                ("upsample_mode", self.upsample_mode.is_some()),
                ("upsample_stride", self.upsample_stride.is_some()),
                ("resample_stages", self.resample_stages.is_some()),
            ];
            if let Some((field, _)) = conv_only.iter().find(|(_, set)| *set) {
                return bad(format!("{field} is only meaningful for convolutional families, not {}", self.family));
            }
            if self.family == Family::Relunet && self.input_channels.is_some() {
                return bad("relunet takes coordinates, input_channels must be unset".into());
            }
            return Ok(());
        }
        let k = self.kernel();
        if k == 0 || k % 2 == 0 {
            return bad(format!("kernel_size must be odd and positive, got {k}"));
        }
        if self.stride() == 0 {
            return bad("upsample_stride must be at least 1".into());
        }
        if self.stages() > self.depth / 2 {
            return bad(format!(
                "resample_stages {} exceeds the {} encoder layers",
                self.stages(),
                self.depth / 2
            ));
        }
        let required = self.stride().pow(self.stages() as u32);
        for &extent in &self.signal_shape {
            if extent % required != 0 {
                return Err(Error::Indivisible {
                    extent,
                    required,
                    stride: self.stride(),
                    stages: self.stages(),
                });
            }
        }
        Ok(())
    }

    /// Spatial kernel rank of the weights (0 for dense layers).
    fn conv_dims(&self) -> usize {
        if self.family.is_conv() {
            self.signal_shape.len()
        } else {
            0
        }
    }

    /// Layer schedule implied by this `ModelSpec`.
    fn plan(&self) -> Vec<LayerPlan> {
        let act = self.activation_kind();
        match self.family {
            Family::DipConv1d | Family::DipConv2d => {
                let half = self.depth / 2;
                let stages = self.stages();
                let (w, k, pad) = (self.width, self.kernel(), (self.kernel() - 1) / 2);
                let mut layers = Vec::with_capacity(self.depth);
                for i in 0..half {
                    layers.push(LayerPlan::Conv {
                        name: format!("enc{i}"),
                        c_in: if i == 0 { self.in_channels() } else { w },
                        c_out: w,
                        kernel: k,
                        stride: if i < stages { self.stride() } else { 1 },
                        padding: pad,
                        upsample: None,
                        activation: Some(act),
                    });
                }
                if self.depth % 2 == 1 {
                    layers.push(LayerPlan::Conv {
                        name: "mid".into(),
                        c_in: w,
                        c_out: w,
                        kernel: k,
                        stride: 1,
                        padding: pad,
                        upsample: None,
                        activation: Some(act),
                    });
                }
                for j in 0..half {
                    let last = j + 1 == half;
                    layers.push(LayerPlan::Conv {
                        name: format!("dec{j}"),
                        c_in: w,
                        c_out: if last { 1 } else { w },
                        kernel: k,
                        stride: 1,
                        padding: pad,
                        upsample: (j + stages >= half).then(|| (self.mode(), self.stride())),
                        activation: (!last).then_some(act),
                    });
                }
                layers
            }
            Family::DipLinear1d | Family::DipLinear2d | Family::Relunet => {
                let (n_in, n_out) = if self.family == Family::Relunet {
                    (self.signal_shape.len(), 1)
                } else {
                    (self.in_channels() * self.signal_numel(), self.signal_numel())
                };
                (0..self.depth)
                    .map(|i| {
                        let last = i + 1 == self.depth;
                        LayerPlan::Linear {
                            name: format!("fc{i}"),
                            n_in: if i == 0 { n_in } else { self.width },
                            n_out: if last { n_out } else { self.width },
                            activation: (!last).then_some(act),
                        }
                    })
                    .collect()
            }
        }
    }

    /// Total trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let dims = self.conv_dims();
        self.plan()
            .iter()
            .map(|l| l.weight_shape(dims).iter().product::<usize>() + l.outputs())
            .sum()
    }
}

#[derive(Clone, Debug)]
enum LayerPlan {
    Conv {
        name: String,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        upsample: Option<(UpsampleMode, usize)>,
        activation: Option<Activation>,
    },
    Linear {
        name: String,
        n_in: usize,
        n_out: usize,
        activation: Option<Activation>,
    },
}

impl LayerPlan {
    fn weight_shape(&self, spatial_dims: usize) -> Vec<usize> {
        match self {
            LayerPlan::Conv {
                c_in, c_out, kernel, ..
            } => {
                let mut s = vec![*c_out, *c_in];
                s.extend(std::iter::repeat(*kernel).take(spatial_dims));
                s
            }
            LayerPlan::Linear { n_in, n_out, .. } => vec![*n_out, *n_in],
        }
    }

    fn outputs(&self) -> usize {
        match self {
            LayerPlan::Conv { c_out, .. } => *c_out,
            LayerPlan::Linear { n_out, .. } => *n_out,
        }
    }

    fn name(&self) -> &str {
        match self {
            LayerPlan::Conv { name, .. } | LayerPlan::Linear { name, .. } => name,
        }
    }
}

/// A built model: spec plus named parameter tensors.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<LayerPlan>,
    names: Vec<String>,
    params: Vec<Tensor>,
}

/// Builds and initializes a model. Every parameter is drawn uniformly from
/// `[-b, b]` with `b = sqrt(1 / fan_in)` using a ChaCha8 stream seeded with
/// `spec.init_seed`, layer by layer, weight before bias.
pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    spec.validate()?;
    let conv_dims = spec.conv_dims();
    let layers = spec.plan();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
    let mut names = Vec::with_capacity(2 * layers.len());
    let mut params = Vec::with_capacity(2 * layers.len());
    for layer in &layers {
        let weight_shape = layer.weight_shape(conv_dims);
        let fan_in: usize = weight_shape[1..].iter().product();
        let bound = (1.0 / fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut draw = |shape: &[usize]| {
            let n = shape.iter().product();
            let data = (0..n).map(|_| dist.sample(&mut rng)).collect();
            Tensor::new(shape, data)
                .expect("planned shapes are nonzero")
                .with_requires_grad(true)
        };
        params.push(draw(&weight_shape));
        params.push(draw(&[layer.outputs()]));
        names.push(format!("{}.weight", layer.name()));
        names.push(format!("{}.bias", layer.name()));
    }
    Ok(Model {
        spec: spec.clone(),
        layers,
        names,
        params,
    })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.spec.input_shape()
    }

    /// Normalized coordinate grid `[numel, dims]` in `[-1, 1]` per axis,
    /// row-major over the signal.
    pub fn coordinate_grid(signal_shape: &[usize]) -> Tensor {
        let norm = |i: usize, n: usize| {
            if n == 1 {
                0.0
            } else {
                -1.0 + 2.0 * i as f64 / (n - 1) as f64
            }
        };
        let data: Vec<f64> = match *signal_shape {
            [n] => (0..n).map(|i| norm(i, n)).collect(),
            [h, w] => (0..h)
                .flat_map(|y| (0..w).flat_map(move |x| [norm(y, h), norm(x, w)]))
                .collect(),
            _ => panic!("coordinate grids exist for 1D and 2D signals only"),
        };
        let numel: usize = signal_shape.iter().product();
        Tensor::new(&[numel, signal_shape.len()], data).expect("grid shape")
    }

    /// Registers the parameters on `g` and applies the network to `input`.
    /// Returns the output node (shaped like the signal) and the parameter
    /// leaves in [`Model::params`] order.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, input: Var) -> Result<(Var, Vec<Var>)> {
        let expected = self.input_shape();
        if g.shape(input) != expected.as_slice() {
            if self.spec.family.is_conv() {
                self.check_divisible(g.shape(input))?;
            }
            return Err(Error::shape(
                "forward",
                format!("input shape {:?} does not match the model input {:?}", g.shape(input), expected),
            ));
        }
        let vars: Vec<Var> = self.params.iter().map(|p| g.leaf(p)).collect();
        let spatial_dims = self.spec.signal_shape.len();
        let mut h = if self.spec.family.is_linear() {
            let n = g.value(input).len();
            g.reshape(input, &[n])?
        } else {
            input
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let (w, b) = (vars[2 * i], vars[2 * i + 1]);
            let act = match layer {
                LayerPlan::Conv {
                    stride,
                    padding,
                    upsample,
                    activation,
                    ..
                } => {
                    if let Some((mode, l)) = upsample {
                        h = g.upsample(h, *mode, *l, spatial_dims)?;
                    }
                    h = if spatial_dims == 1 {
                        g.conv1d(h, w, b, *stride, *padding)?
                    } else {
                        g.conv2d(h, w, b, *stride, *padding)?
                    };
                    activation
                }
                LayerPlan::Linear { activation, .. } => {
                    h = g.linear(h, w, b)?;
                    activation
                }
            };
            if let Some(kind) = act {
                h = g.activation(h, *kind);
            }
        }
        let out = g.reshape(h, &self.spec.signal_shape)?;
        Ok((out, vars))
    }

    fn check_divisible(&self, shape: &[usize]) -> Result<()> {
        let required = self.spec.stride().pow(self.spec.stages() as u32);
        for &extent in shape.iter().skip(1) {
            if extent % required != 0 {
                return Err(Error::Indivisible {
                    extent,
                    required,
                    stride: self.spec.stride(),
                    stages: self.spec.stages(),
                });
            }
        }
        Ok(())
    }

    /// Forward pass without gradient bookkeeping beyond the tape itself.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.leaf(input);
        let (out, _) = self.forward(&mut g, x)?;
        Ok(g.to_tensor(out))
    }
}
