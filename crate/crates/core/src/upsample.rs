//! Zero-insertion upsampling followed by a fixed smoothing kernel.
//!
//! A length-`W` axis upsampled by stride `L` is first expanded to `L·W`
//! samples with the input at every `L`-th position and zeros between, then
//! convolved with the mode's kernel:
//!
//! * nearest: `L` ones on offsets `0..L`, i.e. a box;
//! * bilinear: a triangle `1 - |t|/L` on offsets `-(L-1)..=(L-1)`.
//!
//! Both kernels sum to `L`, so zero-insertion followed by smoothing has unit
//! gain at DC. Samples beyond either end of the input are edge-replicated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    Nearest,
    Bilinear,
}

impl fmt::Display for UpsampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpsampleMode::Nearest => "nearest",
            UpsampleMode::Bilinear => "bilinear",
        })
    }
}

impl FromStr for UpsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(UpsampleMode::Nearest),
            "bilinear" => Ok(UpsampleMode::Bilinear),
            other => Err(Error::arg("mode", format!("unknown upsample mode {other:?}"))),
        }
    }
}

/// Discrete smoothing kernel applied after zero insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct UpsampleKernel {
    pub mode: UpsampleMode,
    pub stride: usize,
    /// Offset of `taps[0]`; tap `i` sits at offset `origin + i`.
    pub origin: isize,
    pub taps: Vec<f64>,
}

impl UpsampleKernel {
    pub fn new(mode: UpsampleMode, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::arg("stride", "upsampling stride must be at least 1"));
        }
        let l = stride as isize;
        let kernel = match mode {
            UpsampleMode::Nearest => Self {
                mode,
                stride,
                origin: 0,
                taps: vec![1.0; stride],
            },
            UpsampleMode::Bilinear => Self {
                mode,
                stride,
                origin: 1 - l,
                taps: (1 - l..l)
                    .map(|t| 1.0 - t.unsigned_abs() as f64 / stride as f64)
                    .collect(),
            },
        };
        Ok(kernel)
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.taps
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.origin + i as isize, w))
    }

    /// Offset-centred taps for symmetry checks: the nearest box is anchored
    /// at offset 0, so only its values (not positions) are symmetric.
    pub fn is_symmetric(&self) -> bool {
        let n = self.taps.len();
        (0..n / 2).all(|i| (self.taps[i] - self.taps[n - 1 - i]).abs() < 1e-15)
    }
}

/// For every output index along one axis, the contributing input indices
/// and their weights.
#[derive(Clone, Debug)]
pub(crate) struct AxisPlan {
    pub input_len: usize,
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl AxisPlan {
    pub fn new(kernel: &UpsampleKernel, input_len: usize) -> Self {
        let l = kernel.stride as isize;
        let last = input_len as isize - 1;
        let entries = (0..input_len as isize * l)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(2);
                for (t, w) in kernel.offsets() {
                    let p = i - t;
                    if p.rem_euclid(l) != 0 || w == 0.0 {
                        continue;
                    }
                    let src = (p.div_euclid(l)).clamp(0, last) as usize;
                    match row.iter_mut().find(|(s, _)| *s == src) {
                        Some(entry) => entry.1 += w,
                        None => row.push((src, w)),
                    }
                }
                row
            })
            .collect();
        Self {
            input_len,
            entries,
        }
    }

    pub fn output_len(&self) -> usize {
        self.entries.len()
    }
}

/// Separable plan over the trailing one or two axes of a tensor.
#[derive(Clone, Debug)]
pub(crate) struct UpsamplePlan {
    pub batch: usize,
    pub rows: Option<AxisPlan>,
    pub cols: AxisPlan,
}

impl UpsamplePlan {
    pub fn output_len(&self) -> usize {
        self.batch * self.rows.as_ref().map_or(1, AxisPlan::output_len) * self.cols.output_len()
    }

    fn in_rows(&self) -> usize {
        self.rows.as_ref().map_or(1, |r| r.input_len)
    }

    fn out_rows(&self) -> usize {
        self.rows.as_ref().map_or(1, AxisPlan::output_len)
    }

    fn row_entries(&self, i: usize) -> &[(usize, f64)] {
        const SINGLE: &[(usize, f64)] = &[(0, 1.0)];
        self.rows.as_ref().map_or(SINGLE, |r| &r.entries[i])
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let (ih, iw) = (self.in_rows(), self.cols.input_len);
        let (oh, ow) = (self.out_rows(), self.cols.output_len());
        let mut out = vec![0.0; self.output_len()];
        for b in 0..self.batch {
            let src = &input[b * ih * iw..(b + 1) * ih * iw];
            let dst = &mut out[b * oh * ow..(b + 1) * oh * ow];
            for i in 0..oh {
                for &(p, wp) in self.row_entries(i) {
                    let src_row = &src[p * iw..(p + 1) * iw];
                    for (j, cell) in dst[i * ow..(i + 1) * ow].iter_mut().enumerate() {
                        for &(q, wq) in &self.cols.entries[j] {
                            *cell += wp * wq * src_row[q];
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, grad_out: &[f64]) -> Vec<f64> {
        let (ih, iw) = (self.in_rows(), self.cols.input_len);
        let (oh, ow) = (self.out_rows(), self.cols.output_len());
        let mut grad_in = vec![0.0; self.batch * ih * iw];
        for b in 0..self.batch {
            let g = &grad_out[b * oh * ow..(b + 1) * oh * ow];
            let dst = &mut grad_in[b * ih * iw..(b + 1) * ih * iw];
            for i in 0..oh {
                for &(p, wp) in self.row_entries(i) {
                    for j in 0..ow {
                        let gij = g[i * ow + j] * wp;
                        for &(q, wq) in &self.cols.entries[j] {
                            dst[p * iw + q] += gij * wq;
                        }
                    }
                }
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up1(mode: UpsampleMode, l: usize, x: &[f64]) -> Vec<f64> {
        let k = UpsampleKernel::new(mode, l).unwrap();
        let plan = UpsamplePlan {
            batch: 1,
            rows: None,
            cols: AxisPlan::new(&k, x.len()),
        };
        plan.forward(x)
    }

    #[test]
    fn kernels_sum_to_stride_and_are_symmetric() {
        for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
            for l in 1..=9 {
                let k = UpsampleKernel::new(mode, l).unwrap();
                let sum: f64 = k.taps.iter().sum();
                assert!((sum - l as f64).abs() < 1e-12, "{mode} L={l} sum {sum}");
                assert!(k.is_symmetric());
            }
        }
        assert!(UpsampleKernel::new(UpsampleMode::Nearest, 0).is_err());
    }

    #[test]
    fn nearest_repeats_samples() {
        assert_eq!(up1(UpsampleMode::Nearest, 2, &[1.0, 2.0]), vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn bilinear_inserts_midpoints_and_replicates_edges() {
        let y = up1(UpsampleMode::Bilinear, 2, &[1.0, 3.0]);
        assert_eq!(y, vec![1.0, 2.0, 3.0, 3.0]);
        let y = up1(UpsampleMode::Bilinear, 4, &[0.0, 4.0]);
        assert_eq!(y, vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn unit_stride_is_identity() {
        let x = [0.3, -1.0, 2.5];
        for mode in [UpsampleMode::Nearest, UpsampleMode::Bilinear] {
            assert_eq!(up1(mode, 1, &x), x.to_vec());
        }
    }
}
