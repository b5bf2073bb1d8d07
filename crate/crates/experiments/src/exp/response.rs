//! Analytic and measured frequency responses of the upsampling kernels.

use dipbias_core::upsample_response::{analytic_response, response_decay_report, ResponseRow};
use dipbias_core::UpsampleMode;
use serde::Serialize;
use serde_json::json;

use crate::config::ResponseConfig;
use crate::error::Result;
use crate::report::{fmt_f64, fmt_opt, record, Artifacts, ExperimentReport};
use crate::runner::RunContext;

/// Agreement checked for `k ≤ AGREEMENT_K_FRACTION / L`.
pub const AGREEMENT_K_FRACTION: f64 = 0.4;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResponseCheck {
    pub mode: UpsampleMode,
    #[serde(rename = "L")]
    pub stride: usize,
    /// Largest analytic value at the zeros `k = m/L` within `[0, 0.5]`.
    pub max_at_zeros: f64,
    /// Largest `|measured - analytic|` for `k ≤ 0.4/L`.
    pub max_abs_diff: f64,
}

pub struct ResponseOutcome {
    pub rows: Vec<ResponseRow>,
    pub checks: Vec<ResponseCheck>,
    pub report: ExperimentReport,
}

impl ResponseOutcome {
    /// Pairs of rows (same mode and k, strides `L1 < L2`) whose measured
    /// response grows with the stride.
    pub fn stride_violations(&self) -> Vec<(&ResponseRow, &ResponseRow)> {
        let mut out = Vec::new();
        for a in &self.rows {
            for b in &self.rows {
                if a.mode == b.mode && a.k == b.k && a.k > 0.0 && a.stride < b.stride {
                    if let (Some(ma), Some(mb)) = (a.measured, b.measured) {
                        if mb > ma + 1e-12 {
                            out.push((a, b));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn run(cfg: &ResponseConfig, ctx: &RunContext) -> Result<ResponseOutcome> {
    let rows = response_decay_report(&cfg.modes, &cfg.strides, &cfg.grid(), cfg.probe_length)?;
    let mut checks = Vec::new();
    for &mode in &cfg.modes {
        for &stride in &cfg.strides {
            let max_at_zeros = (1..)
                .map(|m| m as f64 / stride as f64)
                .take_while(|&k| k <= 0.5)
                .map(|k| analytic_response(mode, k, stride).abs())
                .fold(0.0, f64::max);
            let max_abs_diff = rows
                .iter()
                .filter(|r| r.mode == mode && r.stride == stride && r.k <= AGREEMENT_K_FRACTION / stride as f64)
                .filter_map(|r| r.abs_diff)
                .fold(0.0, f64::max);
            checks.push(ResponseCheck {
                mode,
                stride,
                max_at_zeros,
                max_abs_diff,
            });
        }
    }

    let mut art = Artifacts::for_run(ctx)?;
    art.csv(
        "response.csv",
        &["mode", "L", "k", "analytic", "analytic_gain_l", "measured", "abs_diff"],
        rows.iter().map(|r| {
            vec![
                r.mode.to_string(),
                r.stride.to_string(),
                fmt_f64(r.k),
                fmt_f64(r.analytic),
                fmt_f64(r.analytic_gain_l),
                fmt_opt(r.measured.map(fmt_f64)),
                fmt_opt(r.abs_diff.map(fmt_f64)),
            ]
        }),
    )?;
    let per_seed = checks
        .iter()
        .map(|c| {
            record(
                &format!("{}/L={}", c.mode, c.stride),
                0,
                &[("max_at_zeros", c.max_at_zeros), ("max_abs_diff", c.max_abs_diff)],
            )
        })
        .collect();
    let mut outcome = ResponseOutcome {
        rows,
        checks,
        report: ExperimentReport::default(),
    };
    let violations = outcome.stride_violations().len();
    outcome.report = art.finish(
        "upsample_response",
        ctx.config_echo.clone(),
        per_seed,
        json!({
            "probe_length": cfg.probe_length,
            "checks": outcome.checks,
            "stride_monotonicity_violations": violations,
        }),
    )?;
    Ok(outcome)
}
