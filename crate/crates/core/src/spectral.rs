//! Frequency-domain measurements over signals and trajectories.
//!
//! Frequencies are integer cycles over the signal window. The DFT is
//! unnormalized (`X[k] = Σ x[t]·e^{-2πikt/n}`), so Parseval reads
//! `Σ|X[k]|² = n·Σ|x[t]|²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::Trajectory;
use crate::tensor::Tensor;

fn twiddle(n: usize, jk: usize, sign: f64) -> Complex64 {
    // Reduce the phase index first so large products keep full precision.
    let angle = sign * 2.0 * PI * (jk % n) as f64 / n as f64;
    Complex64::new(angle.cos(), angle.sin())
}

/// Direct `O(n²)` transform; `inverse` flips the exponent sign but does not
/// scale.
pub fn dft_direct(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * twiddle(n, t * k, sign))
                .sum()
        })
        .collect()
}

/// Iterative radix-2 Cooley–Tukey. `x.len()` must be a power of two.
pub fn fft_radix2(x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::arg("signal", format!("radix-2 length must be a power of two, got {n}")));
    }
    let bits = n.trailing_zeros();
    let mut a: Vec<Complex64> = vec![Complex64::default(); n];
    for (i, &v) in x.iter().enumerate() {
        let j = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
        a[j] = v;
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let w = twiddle(n, j * step, sign);
                let u = a[start + j];
                let v = a[start + j + half] * w;
                a[start + j] = u + v;
                a[start + j + half] = u - v;
            }
        }
        len <<= 1;
    }
    Ok(a)
}

/// Forward transform of a complex sequence, radix-2 when possible.
pub fn dft_complex(x: &[Complex64]) -> Vec<Complex64> {
    if x.len().is_power_of_two() {
        fft_radix2(x, false).expect("power-of-two length")
    } else {
        dft_direct(x, false)
    }
}

/// Forward transform of a real signal.
pub fn dft(signal: &[f64]) -> Vec<Complex64> {
    let x: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft_complex(&x)
}

/// Inverse transform with the `1/n` scaling.
pub fn inverse_dft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let n = spectrum.len();
    let raw = if n.is_power_of_two() {
        fft_radix2(spectrum, true).expect("power-of-two length")
    } else {
        dft_direct(spectrum, true)
    };
    raw.into_iter().map(|v| v / n as f64).collect()
}

/// Row-major 2D transform of an `h × w` real image.
pub fn dft2(data: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    assert_eq!(data.len(), h * w, "dft2 extent");
    let mut rows: Vec<Complex64> = data
        .chunks_exact(w)
        .flat_map(dft)
        .collect();
    let mut column = vec![Complex64::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = rows[y * w + x];
        }
        for (y, v) in dft_complex(&column).into_iter().enumerate() {
            rows[y * w + x] = v;
        }
    }
    rows
}

fn signed_frequency(index: usize, n: usize) -> f64 {
    if index <= n / 2 {
        index as f64
    } else {
        index as f64 - n as f64
    }
}

/// Radial bin (rounded radius in cycles per image) of 2D coefficient `(u, v)`.
fn radial_bin(u: usize, v: usize, h: usize, w: usize) -> usize {
    signed_frequency(u, h).hypot(signed_frequency(v, w)).round() as usize
}

fn spatial_extents(signal: &Tensor) -> Result<(usize, usize)> {
    match signal.shape() {
        [n] => Ok((1, *n)),
        [h, w] => Ok((*h, *w)),
        other => Err(Error::shape(
            "spectrum",
            format!("expected a 1D [n] or 2D [h, w] signal, got {other:?}"),
        )),
    }
}

/// Number of frequency bins produced by [`magnitude_spectrum`].
pub fn bin_count(shape: &[usize]) -> usize {
    match shape {
        [n] => n / 2 + 1,
        [h, w] => (*h).min(*w) / 2 + 1,
        _ => 0,
    }
}

/// Magnitude spectrum over bins `0..=n/2`. For 2D images each bin is the
/// mean magnitude of the coefficients whose rounded radius equals the bin.
pub fn magnitude_spectrum(signal: &Tensor) -> Result<Vec<f64>> {
    let (h, w) = spatial_extents(signal)?;
    if signal.rank() == 1 {
        let x = dft(signal.data());
        return Ok(x[..=w / 2].iter().map(|c| c.norm()).collect());
    }
    let bins = bin_count(signal.shape());
    let spectrum = dft2(signal.data(), h, w);
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for u in 0..h {
        for v in 0..w {
            let b = radial_bin(u, v, h, w);
            if b < bins {
                sum[b] += spectrum[u * w + v].norm();
                count[b] += 1;
            }
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect())
}

/// Log power spectrum of an image with the DC term moved to the centre.
pub fn centered_log_power(image: &Tensor) -> Result<Tensor> {
    let (h, w) = match image.shape() {
        [h, w] => (*h, *w),
        other => return Err(Error::shape("centered_log_power", format!("expected [h, w], got {other:?}"))),
    };
    let spectrum = dft2(image.data(), h, w);
    let mut out = vec![0.0; h * w];
    for u in 0..h {
        for v in 0..w {
            let (su, sv) = ((u + h / 2) % h, (v + w / 2) % w);
            out[su * w + sv] = (1.0 + spectrum[u * w + v].norm_sqr()).ln();
        }
    }
    Tensor::new(&[h, w], out)
}

/// Amplitude `2·|X[k]|/n` of the integer frequency `k`, for `0 < k < n/2`.
pub fn amplitude_at(signal: &[f64], k: usize) -> Result<f64> {
    let n = signal.len();
    if k == 0 || 2 * k >= n {
        return Err(Error::arg("k", format!("need 0 < k < n/2, got k = {k}, n = {n}")));
    }
    let coefficient: Complex64 = signal
        .iter()
        .enumerate()
        .map(|(t, &v)| twiddle(n, t * k, -1.0) * v)
        .sum();
    Ok(2.0 * coefficient.norm() / n as f64)
}

/// Sum of squared spectrum magnitudes over the bins in `[lo, hi)`.
///
/// 1D signals index bins `0..n` of the full DFT; 2D images select
/// coefficients by rounded radius.
pub fn band_energy(signal: &Tensor, lo: usize, hi: usize) -> Result<f64> {
    let (h, w) = spatial_extents(signal)?;
    if signal.rank() == 1 {
        let x = dft(signal.data());
        return Ok(x
            .iter()
            .take(hi.min(w))
            .skip(lo)
            .map(Complex64::norm_sqr)
            .sum());
    }
    let spectrum = dft2(signal.data(), h, w);
    let mut total = 0.0;
    for u in 0..h {
        for v in 0..w {
            let b = radial_bin(u, v, h, w);
            if (lo..hi).contains(&b) {
                total += spectrum[u * w + v].norm_sqr();
            }
        }
    }
    Ok(total)
}

/// Amplitude error of one frequency component along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTrace {
    pub frequency: usize,
    pub true_amplitude: f64,
    pub iterations: Vec<usize>,
    pub estimated: Vec<f64>,
    pub squared_error: Vec<f64>,
}

impl SpectralTrace {
    pub fn new(frequency: usize, true_amplitude: f64) -> Self {
        Self {
            frequency,
            true_amplitude,
            iterations: Vec::new(),
            estimated: Vec::new(),
            squared_error: Vec::new(),
        }
    }

    /// Appends the amplitude estimate of `output` at `iteration`.
    pub fn record(&mut self, iteration: usize, output: &[f64]) -> Result<()> {
        let a = amplitude_at(output, self.frequency)?;
        self.iterations.push(iteration);
        self.estimated.push(a);
        self.squared_error.push((a - self.true_amplitude).powi(2));
        Ok(())
    }

    pub fn from_trajectory(traj: &Trajectory, frequency: usize, true_amplitude: f64) -> Result<Self> {
        let mut trace = Self::new(frequency, true_amplitude);
        for (&it, out) in traj.iterations.iter().zip(&traj.outputs) {
            trace.record(it, out.data())?;
        }
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub delta: f64,
    /// Number of consecutive recorded points that must stay at or below
    /// `delta`; 1 is the plain first crossing.
    pub window: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            delta: 0.01,
            window: 5,
        }
    }
}

impl ConvergenceCriterion {
    pub fn new(delta: f64, window: usize) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::arg("delta", "must be positive"));
        }
        if window == 0 {
            return Err(Error::arg("window", "must be at least 1"));
        }
        Ok(Self { delta, window })
    }

    /// Index into `errors` of the first sustained crossing. A crossing whose
    /// window is cut short by the end of the series still counts.
    pub fn first_sustained(&self, errors: &[f64]) -> Option<usize> {
        (0..errors.len()).find(|&i| {
            errors[i..(i + self.window).min(errors.len())]
                .iter()
                .all(|&e| e <= self.delta)
        })
    }
}

/// Iteration at which the trace falls to `delta` and stays there for the
/// criterion's window; `None` if it never does.
pub fn convergence_time(trace: &SpectralTrace, crit: &ConvergenceCriterion) -> Option<usize> {
    crit.first_sustained(&trace.squared_error)
        .map(|i| trace.iterations[i])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSeries {
    pub iterations: Vec<usize>,
    pub epsilon: Vec<f64>,
}

impl DivergenceSeries {
    pub fn peak(&self) -> f64 {
        self.epsilon.iter().copied().fold(0.0, f64::max)
    }

    /// Indices of interior local minima, ordered by iteration.
    pub fn local_minima(&self) -> Vec<usize> {
        let e = &self.epsilon;
        (1..e.len().saturating_sub(1))
            .filter(|&i| e[i] < e[i - 1] && e[i] <= e[i + 1])
            .collect()
    }
}

/// Per-iteration SSE between the outputs of two trajectories.
pub fn trajectory_divergence(a: &Trajectory, b: &Trajectory) -> Result<DivergenceSeries> {
    if a.iterations != b.iterations {
        return Err(Error::arg("trajectories", "iteration lists differ"));
    }
    let epsilon = a
        .outputs
        .iter()
        .zip(&b.outputs)
        .map(|(x, y)| x.sse(y))
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceSeries {
        iterations: a.iterations.clone(),
        epsilon,
    })
}

pub fn mse(x: &[f64], reference: &[f64]) -> Result<f64> {
    if x.len() != reference.len() || x.is_empty() {
        return Err(Error::mismatch("mse", "element count", reference.len(), x.len()));
    }
    let sse: f64 = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / x.len() as f64)
}

/// `10·log10(peak² / MSE)` in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(x: &[f64], reference: &[f64], peak: f64) -> Result<f64> {
    let m = mse(x, reference)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// Rows are recorded iterations, columns frequency bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumErrorMap {
    pub iterations: Vec<usize>,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl SpectrumErrorMap {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.bins..(i + 1) * self.bins]
    }

    pub fn rows(&self) -> usize {
        self.iterations.len()
    }

    /// `[rows, bins]` image with every row rescaled to `[0, 1]`; constant
    /// rows map to 0.
    pub fn row_normalized(&self) -> Tensor {
        let mut data = self.values.clone();
        for row in data.chunks_mut(self.bins) {
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            row.iter_mut()
                .for_each(|v| *v = if span > 0.0 { (*v - lo) / span } else { 0.0 });
        }
        Tensor::new(&[self.rows(), self.bins], data).expect("map has at least one row and bin")
    }

    /// Summed error over bins `[lo, hi)` of row `i`.
    pub fn band_error(&self, i: usize, lo: usize, hi: usize) -> f64 {
        self.row(i)[lo.min(self.bins)..hi.min(self.bins)].iter().sum()
    }
}

/// `|spectrum(output_i)[k] - spectrum(target)[k]|` for each recorded output.
pub fn spectrum_error_map(traj: &Trajectory, target: &Tensor) -> Result<SpectrumErrorMap> {
    let reference = magnitude_spectrum(target)?;
    let bins = reference.len();
    let mut values = Vec::with_capacity(bins * traj.outputs.len());
    for out in &traj.outputs {
        if out.shape() != target.shape() {
            return Err(Error::shape(
                "spectrum_error_map",
                format!("output shape {:?} differs from target {:?}", out.shape(), target.shape()),
            ));
        }
        let s = magnitude_spectrum(out)?;
        values.extend(s.iter().zip(&reference).map(|(a, b)| (a - b).abs()));
    }
    Ok(SpectrumErrorMap {
        iterations: traj.iterations.clone(),
        bins,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::two_sine;

    fn sine(n: usize, k: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|t| amp * (2.0 * PI * k as f64 * t as f64 / n as f64).sin())
            .collect()
    }

    #[test]
    fn impulse_and_constant_spectra() {
        let x = dft(&[1.0, 0.0, 0.0, 0.0]);
        assert!(x.iter().all(|c| (c.norm() - 1.0).abs() < 1e-15));
        let x = dft(&[1.0; 4]);
        assert!((x[0].re - 4.0).abs() < 1e-15);
        assert!(x[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn non_power_of_two_falls_back_to_direct() {
        let signal: Vec<f64> = (0..12).map(|t| (t as f64 * 0.7).cos()).collect();
        let x = dft(&signal);
        let back = inverse_dft(&x);
        for (a, b) in back.iter().zip(&signal) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        assert!(fft_radix2(&x, false).is_err());
    }

    #[test]
    fn amplitude_of_integer_sinusoids() {
        let n = 256;
        assert!((amplitude_at(&sine(n, 5, 1.0), 5).unwrap() - 1.0).abs() < 1e-12);
        assert!(amplitude_at(&sine(n, 5, 1.0), 7).unwrap() < 1e-12);
        assert!((amplitude_at(&sine(n, 50, 0.5), 50).unwrap() - 0.5).abs() < 1e-12);
        assert!(amplitude_at(&sine(n, 5, 1.0), 0).is_err());
        assert!(amplitude_at(&sine(n, 5, 1.0), 128).is_err());
    }

    #[test]
    fn two_sine_components() {
        let s = two_sine(256, 5, 50, 1.0, 1.0).unwrap();
        assert_eq!(s.data()[0], 0.0);
        assert!((amplitude_at(s.data(), 5).unwrap() - 1.0).abs() < 1e-12);
        assert!((amplitude_at(s.data(), 50).unwrap() - 1.0).abs() < 1e-12);
        assert!(amplitude_at(s.data(), 13).unwrap() < 1e-12);
    }

    fn trace(se: &[f64]) -> SpectralTrace {
        SpectralTrace {
            frequency: 1,
            true_amplitude: 1.0,
            iterations: (0..se.len()).map(|i| i * 10).collect(),
            estimated: vec![0.0; se.len()],
            squared_error: se.to_vec(),
        }
    }

    #[test]
    fn convergence_requires_persistence() {
        let crit = ConvergenceCriterion::new(0.01, 2).unwrap();
        let t = trace(&[0.5, 0.02, 0.009, 0.005, 0.004]);
        assert_eq!(convergence_time(&t, &crit), Some(20));
        assert_eq!(convergence_time(&trace(&[0.5, 0.4, 0.3]), &crit), None);

        let crit3 = ConvergenceCriterion::new(0.01, 3).unwrap();
        let dip = trace(&[0.5, 0.005, 0.5, 0.5, 0.5]);
        assert_eq!(convergence_time(&dip, &crit3), None);
        let literal = ConvergenceCriterion::new(0.01, 1).unwrap();
        assert_eq!(convergence_time(&dip, &literal), Some(10));

        assert!(ConvergenceCriterion::new(0.0, 1).is_err());
        assert!(ConvergenceCriterion::new(0.01, 0).is_err());
    }

    #[test]
    fn psnr_reference_points() {
        let a = [0.2, 0.4, 0.6];
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = [1.2, 1.4, 1.6];
        assert!(psnr(&a, &b, 1.0).unwrap().abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&c, &a, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &b[..2], 1.0).is_err());
    }

    #[test]
    fn band_energy_partitions_and_parseval() {
        let x: Vec<f64> = (0..64).map(|t| ((t * t) as f64 * 0.37).sin()).collect();
        let t = Tensor::from_vec(x.clone());
        let full = band_energy(&t, 0, 64).unwrap();
        let direct: f64 = 64.0 * x.iter().map(|v| v * v).sum::<f64>();
        assert!((full - direct).abs() < 1e-9 * direct);
        let split = band_energy(&t, 0, 17).unwrap() + band_energy(&t, 17, 64).unwrap();
        assert!((split - full).abs() < 1e-9 * full);

        let s = Tensor::from_vec(sine(64, 5, 1.0));
        assert!(band_energy(&s, 10, 20).unwrap() < 1e-20);
    }

    #[test]
    fn radial_spectrum_of_flat_image_is_dc_only() {
        let img = Tensor::full(&[8, 8], 0.5);
        let s = magnitude_spectrum(&img).unwrap();
        assert_eq!(s.len(), 5);
        assert!((s[0] - 32.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|v| v.abs() < 1e-12));
        let total = band_energy(&img, 0, usize::MAX).unwrap();
        assert!((total - 64.0 * 64.0 * 0.25).abs() < 1e-9);
    }

    #[test]
    fn divergence_minima() {
        let d = DivergenceSeries {
            iterations: vec![0, 1, 2, 3, 4, 5],
            epsilon: vec![5.0, 1.0, 3.0, 0.5, 0.5, 2.0],
        };
        assert_eq!(d.local_minima(), vec![1, 3]);
        assert_eq!(d.peak(), 5.0);
    }
}
