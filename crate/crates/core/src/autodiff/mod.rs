//! Reverse-mode differentiation over a construction-ordered tape.
//!
//! A [`Graph`] records every operation as a node appended after its inputs,
//! so the node order is a topological order and [`Graph::backward`] simply
//! walks it in reverse. Leaves may borrow their data from an owning
//! [`Tensor`] (model parameters) or own it (inputs, perturbed copies).
//!
//! Gradient contract: `backward` recomputes the gradients of all
//! intermediate nodes on every call, but *adds* into the gradient buffers of
//! `requires_grad` leaves. Calling it twice without [`Graph::zero_grad`]
//! doubles the leaf gradients.

mod conv;
mod gradcheck;

use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm, Mat};
use crate::tensor::Tensor;
use crate::upsample::{AxisPlan, UpsampleKernel, UpsampleMode, UpsamplePlan};

pub use conv::ConvGeometry;
pub use gradcheck::grad_check;

/// Handle to a node of one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.1;

    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(x > 0.0),
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

impl Default for Activation {
    fn default() -> Self {
        Self::leaky()
    }
}

enum Op {
    Leaf,
    Conv {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
        batch: usize,
        n_in: usize,
        n_out: usize,
    },
    Upsample {
        input: Var,
        plan: Arc<UpsamplePlan>,
    },
    Activation {
        input: Var,
        kind: Activation,
    },
    Sse {
        pred: Var,
        target: Var,
    },
    Reshape {
        input: Var,
    },
    Sum {
        input: Var,
    },
}

struct Node<'a> {
    shape: Vec<usize>,
    value: Cow<'a, [f64]>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Computation tape. Borrowed leaves live for `'a`.
#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf borrowing `tensor`'s data; differentiable iff the tensor
    /// requires grad.
    pub fn leaf(&mut self, tensor: &'a Tensor) -> Var {
        self.push(
            tensor.shape().to_vec(),
            Cow::Borrowed(tensor.data()),
            Op::Leaf,
            tensor.requires_grad(),
        )
    }

    pub fn leaf_owned(&mut self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        let shape = tensor.shape().to_vec();
        self.push(shape, Cow::Owned(tensor.into_data()), Op::Leaf, requires_grad)
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        value: Cow<'a, [f64]>,
        op: Op,
        requires_grad: bool,
    ) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<'a> {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.node(v).grad.as_deref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        self.nodes[v.0].grad.take()
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(&n.shape, n.value.to_vec()).expect("graph nodes hold consistent shapes")
    }

    /// Clears every stored gradient, including leaf accumulators.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.requires_grad(v))
    }

    /// Cross-correlation of `input [C_in, W]` with `weight [C_out, C_in, K]`.
    pub fn conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let geom = ConvGeometry::conv1d(
            self.shape(input),
            self.shape(weight),
            self.shape(bias),
            stride,
            padding,
        )?;
        Ok(self.conv(input, weight, bias, geom, vec![geom.c_out, geom.out_w]))
    }

    /// Cross-correlation of `input [C_in, H, W]` with `weight [C_out, C_in, K, K]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let geom = ConvGeometry::conv2d(
            self.shape(input),
            self.shape(weight),
            self.shape(bias),
            stride,
            padding,
        )?;
        let shape = vec![geom.c_out, geom.out_h, geom.out_w];
        Ok(self.conv(input, weight, bias, geom, shape))
    }

    fn conv(&mut self, input: Var, weight: Var, bias: Var, geom: ConvGeometry, shape: Vec<usize>) -> Var {
        let value = conv::forward(&geom, self.value(input), self.value(weight), self.value(bias));
        let rg = self.any_grad(&[input, weight, bias]);
        self.push(
            shape,
            Cow::Owned(value),
            Op::Conv {
                input,
                weight,
                bias,
                geom,
            },
            rg,
        )
    }

    /// Affine map `x·Wᵀ + b` of `input [N_in]` or `[B, N_in]` with
    /// `weight [N_out, N_in]` and `bias [N_out]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let in_shape = self.shape(input).to_vec();
        let (batch, n_in) = match in_shape.as_slice() {
            [n] => (1, *n),
            [b, n] => (*b, *n),
            other => {
                return Err(Error::shape(
                    "linear",
                    format!("input must be [N_in] or [B, N_in], got {other:?}"),
                ))
            }
        };
        let (n_out, w_in) = match self.shape(weight) {
            [o, i] => (*o, *i),
            other => {
                return Err(Error::shape(
                    "linear",
                    format!("weight must be [N_out, N_in], got {other:?}"),
                ))
            }
        };
        if w_in != n_in {
            return Err(Error::mismatch("linear", "input features (N_in)", w_in, n_in));
        }
        if self.shape(bias) != [n_out] {
            return Err(Error::mismatch(
                "linear",
                "bias length (N_out)",
                n_out,
                self.shape(bias).iter().product(),
            ));
        }
        let b = self.value(bias);
        let mut out: Vec<f64> = (0..batch).flat_map(|_| b.iter().copied()).collect();
        gemm(
            Mat::new(self.value(input), batch, n_in),
            Mat::new(self.value(weight), n_out, n_in).t(),
            1.0,
            &mut out,
        );
        let shape = if in_shape.len() == 1 {
            vec![n_out]
        } else {
            vec![batch, n_out]
        };
        let rg = self.any_grad(&[input, weight, bias]);
        Ok(self.push(
            shape,
            Cow::Owned(out),
            Op::Linear {
                input,
                weight,
                bias,
                batch,
                n_in,
                n_out,
            },
            rg,
        ))
    }

    /// Upsamples the trailing `spatial_dims` (1 or 2) axes by `stride`.
    pub fn upsample(
        &mut self,
        input: Var,
        mode: UpsampleMode,
        stride: usize,
        spatial_dims: usize,
    ) -> Result<Var> {
        let kernel = UpsampleKernel::new(mode, stride)?;
        let shape = self.shape(input).to_vec();
        if !(1..=2).contains(&spatial_dims) || shape.len() < spatial_dims {
            return Err(Error::shape(
                "upsample",
                format!("cannot upsample {spatial_dims} trailing axes of shape {shape:?}"),
            ));
        }
        let lead = shape.len() - spatial_dims;
        let batch: usize = shape[..lead].iter().product();
        let cols = AxisPlan::new(&kernel, shape[shape.len() - 1]);
        let rows = (spatial_dims == 2).then(|| AxisPlan::new(&kernel, shape[lead]));
        let plan = UpsamplePlan { batch, rows, cols };
        let value = plan.forward(self.value(input));
        let mut out_shape = shape.clone();
        for d in &mut out_shape[lead..] {
            *d *= stride;
        }
        let rg = self.requires_grad(input);
        Ok(self.push(
            out_shape,
            Cow::Owned(value),
            Op::Upsample {
                input,
                plan: Arc::new(plan),
            },
            rg,
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let value: Vec<f64> = self.value(input).iter().map(|&x| kind.apply(x)).collect();
        let shape = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        self.push(shape, Cow::Owned(value), Op::Activation { input, kind }, rg)
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        self.activation(input, Activation::LeakyRelu { slope })
    }

    /// Sum of squared differences (not the mean).
    pub fn sse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::shape(
                "sse_loss",
                format!(
                    "prediction shape {:?} differs from target shape {:?}",
                    self.shape(pred),
                    self.shape(target)
                ),
            ));
        }
        let sse: f64 = self
            .value(pred)
            .iter()
            .zip(self.value(target))
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let rg = self.any_grad(&[pred, target]);
        Ok(self.push(vec![1], Cow::Owned(vec![sse]), Op::Sse { pred, target }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        let have = self.value(input).len();
        if numel != have || shape.contains(&0) {
            return Err(Error::mismatch("reshape", "element count", have, numel));
        }
        let value = self.value(input).to_vec();
        let rg = self.requires_grad(input);
        Ok(self.push(shape.to_vec(), Cow::Owned(value), Op::Reshape { input }, rg))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).iter().sum();
        let rg = self.requires_grad(input);
        self.push(vec![1], Cow::Owned(vec![s]), Op::Sum { input }, rg)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got shape {:?}", self.shape(root)),
            ));
        }
        for n in &mut self.nodes[..=root.0] {
            if !matches!(n.op, Op::Leaf) {
                n.grad = None;
            }
        }
        if !self.requires_grad(root) {
            return Ok(());
        }
        // A leaf root accumulates like any other leaf.
        if matches!(self.nodes[root.0].op, Op::Leaf) {
            self.accumulate(root, vec![1.0]);
            return Ok(());
        }
        self.nodes[root.0].grad = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            if matches!(self.nodes[idx].op, Op::Leaf) || !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            for (target, delta) in self.input_grads(idx, &g) {
                self.accumulate(target, delta);
            }
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: Vec<f64>) {
        let node = &mut self.nodes[v.0];
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(&delta).for_each(|(g, d)| *g += d),
            None => node.grad = Some(delta),
        }
    }

    /// Gradient contributions of node `idx` to each differentiable input.
    fn input_grads(&self, idx: usize, g: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let mut out = Vec::new();
        let wants = |v: Var| self.requires_grad(v);
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Conv {
                input,
                weight,
                bias,
                geom,
            } => {
                let grads = conv::backward(
                    geom,
                    self.value(*input),
                    self.value(*weight),
                    g,
                    wants(*input),
                    wants(*weight),
                );
                if let Some(d) = grads.input {
                    out.push((*input, d));
                }
                if let Some(d) = grads.weight {
                    out.push((*weight, d));
                }
                if wants(*bias) {
                    out.push((*bias, grads.bias));
                }
            }
            Op::Linear {
                input,
                weight,
                bias,
                batch,
                n_in,
                n_out,
            } => {
                let (batch, n_in, n_out) = (*batch, *n_in, *n_out);
                let g_mat = Mat::new(g, batch, n_out);
                if wants(*input) {
                    let mut d = vec![0.0; batch * n_in];
                    gemm(g_mat, Mat::new(self.value(*weight), n_out, n_in), 0.0, &mut d);
                    out.push((*input, d));
                }
                if wants(*weight) {
                    let mut d = vec![0.0; n_out * n_in];
                    gemm(g_mat.t(), Mat::new(self.value(*input), batch, n_in), 0.0, &mut d);
                    out.push((*weight, d));
                }
                if wants(*bias) {
                    let mut d = vec![0.0; n_out];
                    for row in g.chunks_exact(n_out) {
                        d.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                    }
                    out.push((*bias, d));
                }
            }
            Op::Upsample { input, plan } => {
                if wants(*input) {
                    out.push((*input, plan.backward(g)));
                }
            }
            Op::Activation { input, kind } => {
                let d = self
                    .value(*input)
                    .iter()
                    .zip(g)
                    .map(|(&x, &g)| g * kind.derivative(x))
                    .collect();
                out.push((*input, d));
            }
            Op::Sse { pred, target } => {
                let s = g[0];
                let residual = self
                    .value(*pred)
                    .iter()
                    .zip(self.value(*target))
                    .map(|(p, t)| 2.0 * s * (p - t));
                if wants(*target) {
                    out.push((*target, residual.clone().map(|r| -r).collect()));
                }
                if wants(*pred) {
                    out.push((*pred, residual.collect()));
                }
            }
            Op::Reshape { input } => out.push((*input, g.to_vec())),
            Op::Sum { input } => out.push((*input, vec![g[0]; self.value(*input).len()])),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn conv1d_hand_correlation() {
        let x = t(&[1, 3], vec![1.0, 2.0, 3.0]);
        let w = t(&[1, 1, 3], vec![1.0, 0.0, -1.0]);
        let b = t(&[1], vec![0.0]);
        let mut g = Graph::new();
        let (x, w, b) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        let y = g.conv1d(x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y), &[-2.0]);
        assert_eq!(g.shape(y), &[1, 1]);
    }

    #[test]
    fn conv_identity_kernels() {
        let x = t(&[1, 5], vec![0.5, -1.0, 2.0, 7.0, 3.0]);
        let w = t(&[1, 1, 1], vec![1.0]);
        let b = t(&[1], vec![0.0]);
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        let y = g.conv1d(xv, wv, bv, 1, 0).unwrap();
        assert_eq!(g.value(y), x.data());

        let img = t(&[1, 3, 4], (0..12).map(|v| v as f64 * 0.25).collect());
        let w2 = t(&[1, 1, 1, 1], vec![1.0]);
        let (iv, wv) = (g.leaf(&img), g.leaf(&w2));
        let y = g.conv2d(iv, wv, bv, 1, 0).unwrap();
        assert_eq!(g.value(y), img.data());
    }

    #[test]
    fn conv2d_ones_kernel_on_constant_image() {
        let c = 0.7;
        let img = Tensor::full(&[1, 5, 5], c);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::zeros(&[1]);
        let mut g = Graph::new();
        let (iv, wv, bv) = (g.leaf(&img), g.leaf(&w), g.leaf(&b));
        let y = g.conv2d(iv, wv, bv, 1, 0).unwrap();
        assert_eq!(g.shape(y), &[1, 3, 3]);
        assert!(g.value(y).iter().all(|v| (v - 9.0 * c).abs() < 1e-12));
    }

    #[test]
    fn conv_rejects_mismatched_channels() {
        let x = Tensor::zeros(&[3, 8]);
        let w = Tensor::zeros(&[2, 4, 3]);
        let b = Tensor::zeros(&[2]);
        let mut g = Graph::new();
        let (x, w, b) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        let err = g.conv1d(x, w, b, 1, 0).unwrap_err().to_string();
        assert!(err.contains("input channels"), "{err}");
    }

    #[test]
    fn conv_rejects_kernel_wider_than_padded_input() {
        let x = Tensor::zeros(&[1, 2]);
        let w = Tensor::zeros(&[1, 1, 5]);
        let b = Tensor::zeros(&[1]);
        let mut g = Graph::new();
        let (x, w, b) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        assert!(g.conv1d(x, w, b, 1, 1).is_err());
        assert!(g.conv1d(x, w, b, 0, 2).is_err());
        assert!(g.conv1d(x, w, b, 1, 2).is_ok());
    }

    #[test]
    fn linear_hand_product_and_identity() {
        let x = t(&[2], vec![1.0, 1.0]);
        let w = t(&[1, 2], vec![2.0, 3.0]);
        let b = t(&[1], vec![1.0]);
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        let y = g.linear(xv, wv, bv).unwrap();
        assert_eq!(g.value(y), &[6.0]);

        let x = t(&[3], vec![4.0, -2.0, 0.5]);
        let eye = t(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let zero = Tensor::zeros(&[3]);
        let (xv, wv, bv) = (g.leaf(&x), g.leaf(&eye), g.leaf(&zero));
        let y = g.linear(xv, wv, bv).unwrap();
        assert_eq!(g.value(y), x.data());
        let bad = Tensor::zeros(&[2, 4]);
        let bv2 = g.leaf(&bad);
        assert!(g.linear(xv, bv2, bv).is_err());
    }

    #[test]
    fn activations_by_definition() {
        let x = t(&[2], vec![-1.0, 2.0]);
        let y = t(&[2], vec![-10.0, 10.0]);
        let mut g = Graph::new();
        let (xv, yv) = (g.leaf(&x), g.leaf(&y));
        let r = g.relu(xv);
        assert_eq!(g.value(r), &[0.0, 2.0]);
        let l = g.leaky_relu(yv, 0.1);
        assert_eq!(g.value(l), &[-1.0, 10.0]);
        assert_eq!(Activation::default(), Activation::LeakyRelu { slope: 0.1 });
    }

    #[test]
    fn sse_values_and_gradient() {
        let p = t(&[2], vec![0.0, 0.0]).with_requires_grad(true);
        let q = t(&[2], vec![1.0, 1.0]);
        let mut g = Graph::new();
        let (pv, qv) = (g.leaf(&p), g.leaf(&q));
        let l = g.sse_loss(pv, qv).unwrap();
        assert_eq!(g.value(l), &[2.0]);
        g.backward(l).unwrap();
        assert_eq!(g.grad(pv), Some(&[-2.0, -2.0][..]));
        assert_eq!(g.grad(qv), None);

        let same = g.sse_loss(qv, qv).unwrap();
        assert_eq!(g.value(same), &[0.0]);
        let other = Tensor::zeros(&[3]);
        let ov = g.leaf(&other);
        assert!(g.sse_loss(pv, ov).is_err());
    }

    #[test]
    fn repeated_backward_accumulates_leaf_grads() {
        let x = t(&[3], vec![1.0, -2.0, 0.5]).with_requires_grad(true);
        let target = Tensor::zeros(&[3]);
        let mut g = Graph::new();
        let (xv, tv) = (g.leaf(&x), g.leaf(&target));
        let l = g.sse_loss(xv, tv).unwrap();
        g.backward(l).unwrap();
        let once = g.grad(xv).unwrap().to_vec();
        g.backward(l).unwrap();
        let twice = g.grad(xv).unwrap();
        for (a, b) in once.iter().zip(twice) {
            assert_eq!(2.0 * a, *b);
        }
        g.zero_grad();
        g.backward(l).unwrap();
        assert_eq!(g.grad(xv).unwrap(), once.as_slice());
    }

    #[test]
    fn backward_requires_scalar_root() {
        let x = t(&[2], vec![1.0, 2.0]).with_requires_grad(true);
        let mut g = Graph::new();
        let xv = g.leaf(&x);
        let r = g.relu(xv);
        assert!(g.backward(r).is_err());
    }

    #[test]
    fn every_requires_grad_leaf_gets_a_gradient() {
        let x = Tensor::full(&[2, 6], 0.3);
        let w = Tensor::full(&[3, 2, 3], 0.1).with_requires_grad(true);
        let b = Tensor::zeros(&[3]).with_requires_grad(true);
        let mut g = Graph::new();
        let (xv, wv, bv) = (g.leaf(&x), g.leaf(&w), g.leaf(&b));
        let y = g.conv1d(xv, wv, bv, 1, 1).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!(g.grad(wv).is_some());
        assert!(g.grad(bv).is_some());
        assert!(g.grad(xv).is_none());
    }

    #[test]
    fn upsample_rejects_zero_stride_and_bad_rank() {
        let x = Tensor::zeros(&[4]);
        let mut g = Graph::new();
        let xv = g.leaf(&x);
        assert!(g.upsample(xv, UpsampleMode::Nearest, 0, 1).is_err());
        assert!(g.upsample(xv, UpsampleMode::Nearest, 2, 2).is_err());
        let y = g.upsample(xv, UpsampleMode::Bilinear, 3, 1).unwrap();
        assert_eq!(g.shape(y), &[12]);
    }

    #[test]
    fn upsample_2d_is_separable() {
        let x = t(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let mut g = Graph::new();
        let xv = g.leaf(&x);
        let y = g.upsample(xv, UpsampleMode::Nearest, 2, 2).unwrap();
        assert_eq!(g.shape(y), &[1, 4, 4]);
        assert_eq!(
            g.value(y),
            &[1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
    }
}
