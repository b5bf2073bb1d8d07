//! Frequency responses of the fixed upsampling kernels.
//!
//! Frequencies `k` are in cycles per output sample. The analytic forms are
//! the continuous-time responses of a width-`L` box (nearest) and its
//! self-convolution (bilinear); the measured response runs a sinusoid
//! through the same upsampling op used by the networks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::spectral::amplitude_at;
use crate::tensor::Tensor;
pub use crate::upsample::{UpsampleKernel, UpsampleMode};

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Continuous response with unit gain at DC: `sinc(Lk)` for nearest,
/// `sinc(Lk)²` for bilinear.
pub fn analytic_response(mode: UpsampleMode, k: f64, stride: usize) -> f64 {
    let s = sinc(stride as f64 * k);
    match mode {
        UpsampleMode::Nearest => s,
        UpsampleMode::Bilinear => s * s,
    }
}

/// The bilinear response with denominator `L·π²·k²`, i.e. `L·sinc(Lk)²`,
/// whose DC gain is `L`. Nearest is unchanged.
pub fn analytic_response_gain_l(mode: UpsampleMode, k: f64, stride: usize) -> f64 {
    match mode {
        UpsampleMode::Nearest => analytic_response(mode, k, stride),
        UpsampleMode::Bilinear => stride as f64 * analytic_response(mode, k, stride),
    }
}

/// Extra input samples wrapped onto each end of the probe so that edge
/// replication never reaches the measured window.
const PROBE_WRAP: usize = 2;

/// Output/input amplitude ratio for a `k`-cycle unit sinusoid of length
/// `n/L` upsampled to length `n`. `k = 0` probes with a constant and
/// compares means.
///
/// The probe is extended periodically before upsampling and the output is
/// cropped back to one period, so the result is the response of the
/// discrete kernel on a circular signal.
pub fn measured_response(mode: UpsampleMode, stride: usize, k: usize, probe_length: usize) -> Result<f64> {
    if stride == 0 {
        return Err(Error::arg("stride", "must be positive"));
    }
    if probe_length == 0 || probe_length % stride != 0 {
        return Err(Error::arg(
            "probe_length",
            format!("{probe_length} is not a positive multiple of the stride {stride}"),
        ));
    }
    let m = probe_length / stride;
    if 2 * k >= m {
        return Err(Error::arg("k", format!("need k < n/(2L) = {}, got {k}", m as f64 / 2.0)));
    }
    let probe: Vec<f64> = if k == 0 {
        vec![1.0; m]
    } else {
        (0..m).map(|j| (2.0 * PI * (k * j) as f64 / m as f64).sin()).collect()
    };
    let wrap = PROBE_WRAP.min(m);
    let extended: Vec<f64> = (0..m + 2 * wrap).map(|j| probe[(j + m - wrap) % m]).collect();
    let len = extended.len();
    let mut g = Graph::new();
    let x = g.leaf_owned(Tensor::new(&[1, len], extended)?);
    let y = g.upsample(x, mode, stride, 1)?;
    let start = wrap * stride;
    let out = &g.value(y)[start..start + probe_length];
    if k == 0 {
        return Ok(out.iter().sum::<f64>() / probe_length as f64);
    }
    Ok(amplitude_at(out, k)? / amplitude_at(&probe, k)?)
}

/// One line of [`response_decay_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub mode: UpsampleMode,
    #[serde(rename = "L")]
    pub stride: usize,
    pub k: f64,
    pub analytic: f64,
    pub analytic_gain_l: f64,
    /// Present when `k·n` is an integer cycle count below `n/(2L)`.
    pub measured: Option<f64>,
    pub abs_diff: Option<f64>,
}

/// Analytic and measured responses for every `(mode, L, k)` combination,
/// in that nesting order. `probe_length` must be a multiple of every stride.
pub fn response_decay_report(
    modes: &[UpsampleMode],
    strides: &[usize],
    k_grid: &[f64],
    probe_length: usize,
) -> Result<Vec<ResponseRow>> {
    if let Some(&k) = k_grid.iter().find(|k| !(0.0..=0.5).contains(*k)) {
        return Err(Error::arg("k_grid", format!("frequency {k} is outside [0, 0.5]")));
    }
    let mut rows = Vec::with_capacity(modes.len() * strides.len() * k_grid.len());
    for &mode in modes {
        for &stride in strides {
            if stride == 0 || probe_length % stride != 0 {
                return Err(Error::arg(
                    "probe_length",
                    format!("{probe_length} is not a multiple of the stride {stride}"),
                ));
            }
            for &k in k_grid {
                let analytic = analytic_response(mode, k, stride);
                let cycles = k * probe_length as f64;
                let whole = cycles.round();
                let measured = if (cycles - whole).abs() < 1e-9 && 2.0 * whole < (probe_length / stride) as f64 {
                    Some(measured_response(mode, stride, whole as usize, probe_length)?)
                } else {
                    None
                };
                rows.push(ResponseRow {
                    mode,
                    stride,
                    k,
                    analytic,
                    analytic_gain_l: analytic_response_gain_l(mode, k, stride),
                    measured,
                    abs_diff: measured.map(|m| (m - analytic).abs()),
                });
            }
        }
    }
    Ok(rows)
}
