//! Finite-difference checks of every differentiable op over random shapes.
//!
//! Each op is scalarized by a squared-error loss against a random target,
//! and every input of the op is checked in turn.

use dipbias_core::autodiff::{grad_check, Activation, Graph, Var};
use dipbias_core::{Tensor, UpsampleMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::GradCheckConfig;
use crate::error::{ExpError, Result};
use crate::report::{fmt_f64, record, Artifacts, ExperimentReport};
use crate::runner::{par_map, RunContext};

pub const OPS: [&str; 10] = [
    "conv1d",
    "conv2d",
    "linear",
    "upsample_nearest",
    "upsample_bilinear",
    "relu",
    "leaky_relu",
    "sse_loss",
    "reshape",
    "sum",
];

#[derive(Clone, Debug)]
pub struct GradCheckResult {
    pub op: &'static str,
    pub case: usize,
    /// Which operand was perturbed.
    pub wrt: &'static str,
    pub shape: Vec<usize>,
    pub max_rel_err: f64,
}

pub struct GradCheckOutcome {
    pub results: Vec<GradCheckResult>,
    pub tolerance: f64,
    pub report: ExperimentReport,
}

impl GradCheckOutcome {
    pub fn worst(&self) -> f64 {
        self.results.iter().map(|r| r.max_rel_err).fold(0.0, f64::max)
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sizes match")
}

/// Values at least 0.05 away from the activation kink.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    random(rng, shape).map(|v| v.signum() * (0.05 + 1.5 * v.abs()))
}

/// The operands of one op and a way to apply it.
struct Case {
    operands: Vec<(&'static str, Tensor)>,
    apply: Box<dyn Fn(&mut Graph<'_>, &[Var]) -> dipbias_core::Result<Var>>,
}

fn dim(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

fn build_case(op: &str, rng: &mut ChaCha8Rng) -> Case {
    match op {
        "conv1d" => {
            let (cin, cout, k) = (dim(rng, 1, 4), dim(rng, 1, 4), dim(rng, 1, 3));
            let (stride, pad) = (dim(rng, 1, 2), dim(rng, 0, k - 1));
            let w = dim(rng, k, 8);
            Case {
                operands: vec![
                    ("input", random(rng, &[cin, w])),
                    ("weight", random(rng, &[cout, cin, k])),
                    ("bias", random(rng, &[cout])),
                ],
                apply: Box::new(move |g, v| g.conv1d(v[0], v[1], v[2], stride, pad)),
            }
        }
        "conv2d" => {
            let (cin, cout, k) = (dim(rng, 1, 2), dim(rng, 1, 4), dim(rng, 1, 3));
            let (stride, pad) = (dim(rng, 1, 2), dim(rng, 0, k - 1));
            let (h, w) = (dim(rng, k, 8), dim(rng, k, 8));
            Case {
                operands: vec![
                    ("input", random(rng, &[cin, h, w])),
                    ("weight", random(rng, &[cout, cin, k, k])),
                    ("bias", random(rng, &[cout])),
                ],
                apply: Box::new(move |g, v| g.conv2d(v[0], v[1], v[2], stride, pad)),
            }
        }
        "linear" => {
            let (n_in, n_out) = (dim(rng, 1, 8), dim(rng, 1, 8));
            let input_shape = if dim(rng, 0, 1) == 0 { vec![n_in] } else { vec![dim(rng, 1, 4), n_in] };
            Case {
                operands: vec![
                    ("input", random(rng, &input_shape)),
                    ("weight", random(rng, &[n_out, n_in])),
                    ("bias", random(rng, &[n_out])),
                ],
                apply: Box::new(|g, v| g.linear(v[0], v[1], v[2])),
            }
        }
        "upsample_nearest" | "upsample_bilinear" => {
            let mode = if op == "upsample_nearest" {
                UpsampleMode::Nearest
            } else {
                UpsampleMode::Bilinear
            };
            let (spatial, stride) = (dim(rng, 1, 2), dim(rng, 1, 4));
            let mut shape = vec![dim(rng, 1, 4)];
            shape.extend((0..spatial).map(|_| dim(rng, 1, 8)));
            Case {
                operands: vec![("input", random(rng, &shape))],
                apply: Box::new(move |g, v| g.upsample(v[0], mode, stride, spatial)),
            }
        }
        "relu" | "leaky_relu" => {
            let kind = if op == "relu" {
                Activation::Relu
            } else {
                Activation::leaky()
            };
            let shape = [dim(rng, 1, 4), dim(rng, 1, 8)];
            Case {
                operands: vec![("input", away_from_zero(rng, &shape))],
                apply: Box::new(move |g, v| Ok(g.activation(v[0], kind))),
            }
        }
        "sse_loss" => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 8)];
            Case {
                operands: vec![("prediction", random(rng, &shape)), ("target", random(rng, &shape))],
                apply: Box::new(|g, v| g.sse_loss(v[0], v[1])),
            }
        }
        "reshape" => {
            let (a, b) = (dim(rng, 1, 4), dim(rng, 1, 8));
            Case {
                operands: vec![("input", random(rng, &[a, b]))],
                apply: Box::new(move |g, v| g.reshape(v[0], &[b, a])),
            }
        }
        "sum" => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 8)];
            Case {
                operands: vec![("input", random(rng, &shape))],
                apply: Box::new(|g, v| Ok(g.sum(v[0]))),
            }
        }
        other => unreachable!("unknown op {other}"),
    }
}

/// Checks every operand of case `case` of `op`.
pub fn check_case(op: &'static str, case: usize, seed: u64, eps: f64) -> Result<Vec<GradCheckResult>> {
    let op_index = OPS.iter().position(|&o| o == op).expect("known op") as u64;
    let stream = seed.wrapping_mul(1_000_003).wrapping_add(op_index * 10_007 + case as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let c = build_case(op, &mut rng);
    // Output shape, to draw the target of the scalarizing loss.
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = c.operands.iter().map(|(_, t)| g.leaf(t)).collect();
        let out = (c.apply)(&mut g, &vars)?;
        g.shape(out).to_vec()
    };
    let target = random(&mut rng, &out_shape);
    let mut results = Vec::new();
    for (slot, (wrt, x)) in c.operands.iter().enumerate() {
        let f = |g: &mut Graph<'_>, leaf: Var| {
            let vars: Vec<Var> = c
                .operands
                .iter()
                .enumerate()
                .map(|(i, (_, t))| if i == slot { leaf } else { g.leaf_owned(t.clone()) })
                .collect();
            let out = (c.apply)(g, &vars)?;
            let t = g.leaf_owned(target.clone());
            g.sse_loss(out, t)
        };
        let err = grad_check(f, x, eps)?;
        results.push(GradCheckResult {
            op,
            case,
            wrt,
            shape: x.shape().to_vec(),
            max_rel_err: err,
        });
    }
    Ok(results)
}

pub fn run(cfg: &GradCheckConfig, ctx: &RunContext) -> Result<GradCheckOutcome> {
    if !(cfg.eps > 0.0) || cfg.cases == 0 {
        return Err(ExpError::config("grad_check needs eps > 0 and at least one case"));
    }
    let seed = ctx.seeds[0];
    let jobs: Vec<(&'static str, usize)> = OPS
        .iter()
        .flat_map(|&op| (0..cfg.cases).map(move |c| (op, c)))
        .collect();
    let results: Vec<GradCheckResult> = par_map(ctx.workers, jobs, |(op, case)| check_case(op, case, seed, cfg.eps))?
        .into_iter()
        .flatten()
        .collect();

    let mut art = Artifacts::for_run(ctx)?;
    art.csv(
        "gradcheck.csv",
        &["op", "case", "wrt", "shape", "max_rel_err", "pass"],
        results.iter().map(|r| {
            let shape: Vec<String> = r.shape.iter().map(|d| d.to_string()).collect();
            vec![
                r.op.into(),
                r.case.to_string(),
                r.wrt.into(),
                shape.join("x"),
                fmt_f64(r.max_rel_err),
                (r.max_rel_err <= cfg.tolerance).to_string(),
            ]
        }),
    )?;
    let per_seed = results
        .iter()
        .map(|r| record(&format!("{}/{}", r.op, r.wrt), r.case as u64, &[("max_rel_err", r.max_rel_err)]))
        .collect();
    let worst: Vec<_> = OPS
        .iter()
        .map(|&op| {
            let w = results
                .iter()
                .filter(|r| r.op == op)
                .map(|r| r.max_rel_err)
                .fold(0.0, f64::max);
            json!({ "op": op, "worst_rel_err": w })
        })
        .collect();
    let overall = results.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let report = art.finish(
        "grad_check",
        ctx.config_echo.clone(),
        per_seed,
        json!({
            "cases_per_op": cfg.cases,
            "eps": cfg.eps,
            "tolerance": cfg.tolerance,
            "worst_rel_err": overall,
            "pass": overall <= cfg.tolerance,
            "ops": worst,
        }),
    )?;
    Ok(GradCheckOutcome {
        results,
        tolerance: cfg.tolerance,
        report,
    })
}
