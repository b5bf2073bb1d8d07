//! Fitting the two-tone signal and timing when each tone converges.

use dipbias_core::optimizer::{FitConfig, Flow, Trajectory};
use dipbias_core::signals::two_sine;
use dipbias_core::spectral::{amplitude_at, convergence_time, ConvergenceCriterion, SpectralTrace};
use dipbias_core::{ModelSpec, Tensor};

use crate::config::TwoSineSpec;
use crate::error::{ExpError, Result};
use crate::runner::fit_target;

impl TwoSineSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |k: usize| k > 0 && 2 * k < self.n;
        if !ok(self.k1) || !ok(self.k2) || self.k1 == self.k2 {
            return Err(ExpError::config(format!(
                "tones k1 = {}, k2 = {} must be distinct and lie in 1..{} for n = {}",
                self.k1,
                self.k2,
                self.n.div_ceil(2),
                self.n
            )));
        }
        Ok(())
    }

    pub fn render(&self) -> Result<Tensor> {
        self.validate()?;
        Ok(two_sine(self.n, self.k1, self.k2, self.a1, self.a2)?)
    }
}

/// Amplitude errors of both tones along one fit.
#[derive(Clone, Debug)]
pub struct ToneFit {
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub trace1: SpectralTrace,
    pub trace2: SpectralTrace,
    /// Last iteration that was run.
    pub steps_run: usize,
}

/// True once the first sustained crossing has a complete window behind it,
/// after which later points can no longer move it.
fn settled(errors: &[f64], crit: &ConvergenceCriterion) -> bool {
    crit.first_sustained(errors)
        .is_some_and(|i| i + crit.window <= errors.len())
}

/// Fits `signal` and, with `early_stop`, ends the fit as soon as both
/// convergence times are final.
pub fn fit_two_tone(
    signal: &TwoSineSpec,
    spec: &ModelSpec,
    fit: &FitConfig,
    crit: &ConvergenceCriterion,
    early_stop: bool,
) -> Result<(ToneFit, Trajectory)> {
    let target = signal.render()?;
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    let traj = fit_target(spec, fit, &target, |traj| {
        let out = traj.last_output().expect("called after a record").data();
        // The tones were validated above, so amplitude_at cannot fail.
        let se = |k, a: f64| (amplitude_at(out, k).unwrap_or(f64::NAN) - a).powi(2);
        e1.push(se(signal.k1, signal.a1.abs()));
        e2.push(se(signal.k2, signal.a2.abs()));
        if early_stop && settled(&e1, crit) && settled(&e2, crit) {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    let trace1 = SpectralTrace::from_trajectory(&traj, signal.k1, signal.a1.abs())?;
    let trace2 = SpectralTrace::from_trajectory(&traj, signal.k2, signal.a2.abs())?;
    let fit = ToneFit {
        t1: convergence_time(&trace1, crit),
        t2: convergence_time(&trace2, crit),
        trace1,
        trace2,
        steps_run: *traj.iterations.last().expect("iteration 0 is always recorded"),
    };
    Ok((fit, traj))
}

/// The recorded output at `iteration`, if it was recorded.
pub fn output_at(traj: &Trajectory, iteration: usize) -> Option<&Tensor> {
    traj.iterations
        .iter()
        .position(|&i| i == iteration)
        .map(|p| &traj.outputs[p])
}
