use dipbias_core::{grad_check, Graph, Tensor, UpsampleMode};
use proptest::prelude::*;

fn tensor(shape: &[usize], seed: u64) -> Tensor {
    // Small deterministic pseudo-random values in [-1, 1).
    let n: usize = shape.iter().product();
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

#[test]
fn sum_is_checked_exactly() {
    let x = tensor(&[3, 5], 1);
    let err = grad_check(|g, v| Ok(g.sum(v)), &x, 1e-4).unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn sse_against_fixed_target() {
    let x = tensor(&[4, 6], 2);
    let target = tensor(&[4, 6], 3);
    let err = grad_check(
        |g, v| {
            let t = g.leaf_owned(target.clone());
            g.sse_loss(v, t)
        },
        &x,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn conv1d_weight_gradient_of_summed_output() {
    let input = Tensor::new(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let weight = Tensor::new(&[1, 1, 3], vec![1.0, 0.0, -1.0]).unwrap();
    let mut g = Graph::new();
    let i = g.leaf(&input);
    let b = g.leaf_owned(Tensor::zeros(&[1]));
    let w = g.leaf_owned(weight.clone().with_requires_grad(true));
    let out = g.conv1d(i, w, b, 1, 0).unwrap();
    assert_eq!(g.value(out), &[-2.0]);
    let s = g.sum(out);
    g.backward(s).unwrap();
    // d(sum)/dw_k is the input sample under tap k.
    assert_eq!(g.grad(w).unwrap(), &[1.0, 2.0, 3.0]);

    let err = grad_check(
        |g, w| {
            let i = g.leaf_owned(input.clone());
            let b = g.leaf_owned(Tensor::zeros(&[1]));
            let o = g.conv1d(i, w, b, 1, 0)?;
            Ok(g.sum(o))
        },
        &weight,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-4);
}

#[test]
fn constant_image_under_ones_kernel() {
    let c = 0.3;
    let input = Tensor::full(&[1, 5, 5], c);
    let weight = Tensor::full(&[1, 1, 3, 3], 1.0);
    let mut g = Graph::new();
    let (i, w) = (g.leaf(&input), g.leaf(&weight));
    let b = g.leaf_owned(Tensor::zeros(&[1]));
    let out = g.conv2d(i, w, b, 1, 0).unwrap();
    assert_eq!(g.shape(out), &[1, 3, 3]);
    assert!(g.value(out).iter().all(|&v| (v - 9.0 * c).abs() < 1e-12));
}

#[test]
fn upsample_hand_examples() {
    let mut g = Graph::new();
    let x = g.leaf_owned(Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap());
    let up = g.upsample(x, UpsampleMode::Nearest, 2, 1).unwrap();
    assert_eq!(g.value(up), &[1.0, 1.0, 2.0, 2.0]);
    let y = g.leaf_owned(Tensor::new(&[1, 2], vec![1.0, 3.0]).unwrap());
    let up = g.upsample(y, UpsampleMode::Bilinear, 2, 1).unwrap();
    assert_eq!(g.value(up)[1], 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn conv1d_gradients(cin in 1usize..4, cout in 1usize..4, k in 1usize..4, extra in 0usize..5,
                        stride in 1usize..3, seed in any::<u64>()) {
        let pad = (k - 1) / 2;
        let w = k + extra;
        let input = tensor(&[cin, w], seed);
        let weight = tensor(&[cout, cin, k], seed ^ 1);
        let bias = tensor(&[cout], seed ^ 2);
        let err = grad_check(|g, v| {
            let (wv, bv) = (g.leaf_owned(weight.clone()), g.leaf_owned(bias.clone()));
            let o = g.conv1d(v, wv, bv, stride, pad)?;
            let t = g.leaf_owned(Tensor::zeros(g.shape(o)));
            g.sse_loss(o, t)
        }, &input, 1e-4).unwrap();
        prop_assert!(err < 1e-4, "input err {err}");
        let err = grad_check(|g, v| {
            let (iv, bv) = (g.leaf_owned(input.clone()), g.leaf_owned(bias.clone()));
            let o = g.conv1d(iv, v, bv, stride, pad)?;
            let t = g.leaf_owned(Tensor::zeros(g.shape(o)));
            g.sse_loss(o, t)
        }, &weight, 1e-4).unwrap();
        prop_assert!(err < 1e-4, "weight err {err}");
    }

    #[test]
    fn conv2d_gradients(cin in 1usize..3, cout in 1usize..3, k in 1usize..4, h in 3usize..7, w in 3usize..7,
                        seed in any::<u64>()) {
        let input = tensor(&[cin, h, w], seed);
        let weight = tensor(&[cout, cin, k, k], seed ^ 5);
        let bias = tensor(&[cout], seed ^ 6);
        let operands = [input, weight, bias];
        for slot in 0..3 {
            let err = grad_check(|g, v| {
                let vars: Vec<_> = (0..3)
                    .map(|i| if i == slot { v } else { g.leaf_owned(operands[i].clone()) })
                    .collect();
                let o = g.conv2d(vars[0], vars[1], vars[2], 1, (k - 1) / 2)?;
                let t = g.leaf_owned(Tensor::zeros(g.shape(o)));
                g.sse_loss(o, t)
            }, &operands[slot], 1e-4).unwrap();
            prop_assert!(err < 1e-4, "slot {slot} err {err}");
        }
    }

    #[test]
    fn same_padding_preserves_extent(k in (0usize..3).prop_map(|i| 2 * i + 1), w in 5usize..12, h in 5usize..12) {
        let mut g = Graph::new();
        let i = g.leaf_owned(tensor(&[2, h, w], 9));
        let wt = g.leaf_owned(tensor(&[3, 2, k, k], 10));
        let b = g.leaf_owned(Tensor::zeros(&[3]));
        let o = g.conv2d(i, wt, b, 1, (k - 1) / 2).unwrap();
        prop_assert_eq!(g.shape(o), &[3, h, w]);
        let i1 = g.leaf_owned(tensor(&[2, w], 11));
        let w1 = g.leaf_owned(tensor(&[3, 2, k], 12));
        let o1 = g.conv1d(i1, w1, b, 1, (k - 1) / 2).unwrap();
        prop_assert_eq!(g.shape(o1), &[3, w]);
    }

    #[test]
    fn nearest_upsample_then_subsample_is_identity(c in 1usize..4, w in 1usize..10, l in 1usize..6, seed in any::<u64>()) {
        let x = tensor(&[c, w], seed);
        let mut g = Graph::new();
        let v = g.leaf(&x);
        let up = g.upsample(v, UpsampleMode::Nearest, l, 1).unwrap();
        let out = g.value(up);
        let sub: Vec<f64> = (0..c * w).map(|i| out[(i / w) * w * l + (i % w) * l]).collect();
        prop_assert_eq!(sub.as_slice(), x.data());
    }

    #[test]
    fn upsample_gradients(c in 1usize..3, h in 1usize..5, w in 1usize..5, l in 1usize..4, two_d in any::<bool>(),
                          bilinear in any::<bool>(), seed in any::<u64>()) {
        let mode = if bilinear { UpsampleMode::Bilinear } else { UpsampleMode::Nearest };
        let (x, dims) = if two_d { (tensor(&[c, h, w], seed), 2) } else { (tensor(&[c, w], seed), 1) };
        let target_seed = seed ^ 77;
        let err = grad_check(|g, v| {
            let up = g.upsample(v, mode, l, dims)?;
            let t = g.leaf_owned(tensor(&g.shape(up).to_vec(), target_seed));
            g.sse_loss(up, t)
        }, &x, 1e-4).unwrap();
        prop_assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn forward_is_deterministic(seed in any::<u64>()) {
        let run = || {
            let mut g = Graph::new();
            let i = g.leaf_owned(tensor(&[2, 8, 8], seed));
            let w = g.leaf_owned(tensor(&[2, 2, 3, 3], seed ^ 3));
            let b = g.leaf_owned(tensor(&[2], seed ^ 4));
            let o = g.conv2d(i, w, b, 2, 1).unwrap();
            let u = g.upsample(o, UpsampleMode::Bilinear, 2, 2).unwrap();
            g.value(u).to_vec()
        };
        prop_assert_eq!(run(), run());
    }
}
