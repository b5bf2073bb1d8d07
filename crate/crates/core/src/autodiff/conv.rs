//! im2col convolution kernels shared by the 1D and 2D ops.
//!
//! A 1D convolution is the 2D case with a single row and a `1 × K` kernel.

use crate::error::{Error, Result};
use crate::linalg::{gemm, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub c_out: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn output_extent(op: &'static str, axis: &str, extent: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::arg("stride", "must be positive"));
    }
    if k > extent + 2 * pad {
        return Err(Error::shape(
            op,
            format!("kernel {axis} {k} exceeds padded input {axis} {}", extent + 2 * pad),
        ));
    }
    Ok((extent + 2 * pad - k) / stride + 1)
}

fn check_bias(op: &'static str, bias: &[usize], c_out: usize) -> Result<()> {
    if bias != [c_out] {
        return Err(Error::mismatch(
            op,
            "bias length (output channels)",
            c_out,
            bias.iter().product(),
        ));
    }
    Ok(())
}

impl ConvGeometry {
    pub fn conv1d(
        input: &[usize],
        weight: &[usize],
        bias: &[usize],
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        const OP: &str = "conv1d";
        let [c_in, w] = *input else {
            return Err(Error::shape(OP, format!("input must be [C_in, W], got {input:?}")));
        };
        let [c_out, wc_in, k] = *weight else {
            return Err(Error::shape(
                OP,
                format!("weight must be [C_out, C_in, K], got {weight:?}"),
            ));
        };
        if wc_in != c_in {
            return Err(Error::mismatch(OP, "input channels (C_in)", wc_in, c_in));
        }
        check_bias(OP, bias, c_out)?;
        let out_w = output_extent(OP, "width", w, k, stride, padding)?;
        Ok(Self {
            c_in,
            in_h: 1,
            in_w: w,
            c_out,
            k_h: 1,
            k_w: k,
            stride_h: 1,
            stride_w: stride,
            pad_h: 0,
            pad_w: padding,
            out_h: 1,
            out_w,
        })
    }

    pub fn conv2d(
        input: &[usize],
        weight: &[usize],
        bias: &[usize],
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        const OP: &str = "conv2d";
        let [c_in, h, w] = *input else {
            return Err(Error::shape(OP, format!("input must be [C_in, H, W], got {input:?}")));
        };
        let [c_out, wc_in, kh, kw] = *weight else {
            return Err(Error::shape(
                OP,
                format!("weight must be [C_out, C_in, K, K], got {weight:?}"),
            ));
        };
        if wc_in != c_in {
            return Err(Error::mismatch(OP, "input channels (C_in)", wc_in, c_in));
        }
        if kh != kw {
            return Err(Error::mismatch(OP, "kernel width (square kernel)", kh, kw));
        }
        check_bias(OP, bias, c_out)?;
        let out_h = output_extent(OP, "height", h, kh, stride, padding)?;
        let out_w = output_extent(OP, "width", w, kw, stride, padding)?;
        Ok(Self {
            c_in,
            in_h: h,
            in_w: w,
            c_out,
            k_h: kh,
            k_w: kw,
            stride_h: stride,
            stride_w: stride,
            pad_h: padding,
            pad_w: padding,
            out_h,
            out_w,
        })
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.k_h * self.k_w
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Input index feeding output position `o` along one axis through tap `k`.
    #[inline]
    fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        (o * stride + k).checked_sub(pad).filter(|&i| i < extent)
    }

    /// Lays out every receptive field as a column: `[C_in·K_h·K_w, H'·W']`.
    fn im2col(&self, input: &[f64]) -> Vec<f64> {
        let p = self.positions();
        let mut cols = vec![0.0; self.patch_len() * p];
        for c in 0..self.c_in {
            let plane = &input[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ky in 0..self.k_h {
                for kx in 0..self.k_w {
                    let row = (c * self.k_h + ky) * self.k_w + kx;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..self.out_h {
                        let Some(iy) = Self::source(oy, ky, self.stride_h, self.pad_h, self.in_h) else {
                            continue;
                        };
                        let src_row = &plane[iy * self.in_w..(iy + 1) * self.in_w];
                        let dst_row = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        for (ox, d) in dst_row.iter_mut().enumerate() {
                            if let Some(ix) = Self::source(ox, kx, self.stride_w, self.pad_w, self.in_w) {
                                *d = src_row[ix];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64]) -> Vec<f64> {
        let p = self.positions();
        let mut out = vec![0.0; self.c_in * self.in_h * self.in_w];
        for c in 0..self.c_in {
            let plane = &mut out[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ky in 0..self.k_h {
                for kx in 0..self.k_w {
                    let row = (c * self.k_h + ky) * self.k_w + kx;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..self.out_h {
                        let Some(iy) = Self::source(oy, ky, self.stride_h, self.pad_h, self.in_h) else {
                            continue;
                        };
                        for ox in 0..self.out_w {
                            if let Some(ix) = Self::source(ox, kx, self.stride_w, self.pad_w, self.in_w) {
                                plane[iy * self.in_w + ix] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub(super) fn forward(geom: &ConvGeometry, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let p = geom.positions();
    let cols = geom.im2col(input);
    let mut out: Vec<f64> = bias.iter().flat_map(|&b| std::iter::repeat(b).take(p)).collect();
    gemm(
        Mat::new(weight, geom.c_out, geom.patch_len()),
        Mat::new(&cols, geom.patch_len(), p),
        1.0,
        &mut out,
    );
    out
}

pub(super) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub weight: Option<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub(super) fn backward(
    geom: &ConvGeometry,
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    want_input: bool,
    want_weight: bool,
) -> ConvGrads {
    let p = geom.positions();
    let k = geom.patch_len();
    let g = Mat::new(grad_out, geom.c_out, p);
    let bias = grad_out.chunks_exact(p).map(|row| row.iter().sum()).collect();
    let weight_grad = want_weight.then(|| {
        let cols = geom.im2col(input);
        let mut d = vec![0.0; geom.c_out * k];
        gemm(g, Mat::new(&cols, k, p).t(), 0.0, &mut d);
        d
    });
    let input_grad = want_input.then(|| {
        let mut dcols = vec![0.0; k * p];
        gemm(Mat::new(weight, geom.c_out, k).t(), g, 0.0, &mut dcols);
        geom.col2im(&dcols)
    });
    ConvGrads {
        input: input_grad,
        weight: weight_grad,
        bias,
    }
}
