use dipbias_core::optimizer::model_input;
use dipbias_core::signals::two_sine;
use dipbias_core::{build_model, run_dip, Error, Family, FitConfig, ModelSpec, Tensor, Trajectory, UpsampleMode};
use proptest::prelude::*;

fn fit(steps: usize, learning_rate: f64, record_every: usize) -> FitConfig {
    FitConfig {
        steps,
        learning_rate,
        record_every,
        ..FitConfig::default()
    }
}

fn fit_conv(n: usize, cfg: &FitConfig) -> (Trajectory, Tensor) {
    let target = two_sine(n, 2, 9, 1.0, 0.5).unwrap();
    let mut model = build_model(&ModelSpec::new(Family::DipConv1d, 4, 16, &[n])).unwrap();
    let z = model_input(&model, cfg).unwrap();
    (run_dip(&mut model, &z, &target, cfg).unwrap(), target)
}

#[test]
fn zero_learning_rate_freezes_the_output() {
    let (traj, _) = fit_conv(32, &fit(20, 0.0, 5));
    assert_eq!(traj.iterations, vec![0, 5, 10, 15, 20]);
    assert!(traj.outputs.iter().all(|o| o == &traj.outputs[0]));
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let cfg = fit(30, 1e-3, 3);
    let (a, _) = fit_conv(32, &cfg);
    let (b, _) = fit_conv(32, &cfg);
    assert_eq!(a, b);
}

#[test]
fn conv_fit_of_short_two_tone_signal() {
    let cfg = fit(2000, 0.01, 100);
    let target = two_sine(64, 5, 13, 1.0, 1.0).unwrap();
    let mut model = build_model(&ModelSpec::new(Family::DipConv1d, 6, 64, &[64])).unwrap();
    let z = model_input(&model, &cfg).unwrap();
    let traj = run_dip(&mut model, &z, &target, &cfg).unwrap();
    let last = traj.last_output().unwrap();
    let sse = last.sse(&target).unwrap();
    assert!(sse < 1e-2, "final SSE {sse}");
    assert!(traj.losses.last().unwrap() < &(0.01 * traj.losses[0]));
}

#[test]
fn last_recorded_iteration_is_the_step_count() {
    let (traj, _) = fit_conv(16, &fit(17, 1e-3, 5));
    assert_eq!(traj.iterations, vec![0, 5, 10, 15, 17]);
}

#[test]
fn diverging_fit_reports_the_step() {
    let cfg = fit(50, 1e150, 1);
    let target = Tensor::full(&[16], 1.0);
    let mut model = build_model(&ModelSpec::new(Family::DipLinear1d, 3, 8, &[16])).unwrap();
    let z = model_input(&model, &cfg).unwrap();
    match run_dip(&mut model, &z, &target, &cfg) {
        Err(Error::NonFiniteLoss { step }) => assert!(step > 0),
        other => panic!("expected a non-finite loss, got {other:?}"),
    }
}

#[test]
fn trajectory_files_round_trip() {
    let cfg = fit(12, 1e-3, 4);
    let (traj, _) = fit_conv(16, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let files = traj.save(dir.path(), Some(&cfg)).unwrap();
    assert!(files.iter().all(|f| f.exists()));
    assert!(dir.path().join("meta.json").exists());
    let (back, meta) = Trajectory::load(dir.path()).unwrap();
    assert_eq!(back, traj);
    assert_eq!(meta, Some(cfg));
}

#[test]
fn linear_parameter_counts_follow_closed_form() {
    // Square hidden layers: d layers, n → w → … → w → n.
    for (d, w, n) in [(2, 8, 16), (5, 128, 64), (10, 256, 256)] {
        let spec = ModelSpec::new(Family::DipLinear1d, d, w, &[n]);
        let expected = (n * w + w) + (d - 2) * (w * w + w) + (w * n + n);
        assert_eq!(build_model(&spec).unwrap().parameter_count(), expected);
    }
}

#[test]
fn relunet_maps_coordinates_to_the_signal_shape() {
    let spec = ModelSpec::new(Family::Relunet, 4, 32, &[40]);
    let model = build_model(&spec).unwrap();
    let out = model.predict(&model_input(&model, &fit(1, 0.0, 1)).unwrap()).unwrap();
    assert_eq!(out.shape(), &[40]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoder_decoder_preserves_shape(depth in 2usize..7, width in 1usize..6, two_d in any::<bool>(),
                                       stride in 2usize..4, bilinear in any::<bool>(), units in 1usize..4) {
        let stages = depth / 2;
        let extent = units * stride.pow(stages as u32);
        let shape: Vec<usize> = if two_d { vec![extent, extent] } else { vec![extent] };
        let family = if two_d { Family::DipConv2d } else { Family::DipConv1d };
        let mode = if bilinear { UpsampleMode::Bilinear } else { UpsampleMode::Nearest };
        let spec = ModelSpec::new(family, depth, width, &shape).with_upsampling(mode, stride);
        let model = build_model(&spec).unwrap();
        let z = model_input(&model, &fit(1, 0.0, 1)).unwrap();
        let out = model.predict(&z).unwrap();
        prop_assert_eq!(out.shape(), shape.as_slice());
    }

    #[test]
    fn same_spec_same_parameters(seed in any::<u64>()) {
        let spec = ModelSpec::new(Family::DipConv1d, 4, 8, &[32]).with_seed(seed);
        let a = build_model(&spec).unwrap();
        let b = build_model(&spec).unwrap();
        prop_assert_eq!(a.params(), b.params());
    }
}
