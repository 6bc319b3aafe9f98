use ndiff::{lr_schedule, NdiffError, ParamStore, SgdConfig, SgdMomentum, Tensor};

fn store_vec(id: &str, data: &[f32]) -> ParamStore<f32> {
    let mut s = ParamStore::new();
    s.add(id, Tensor::new(vec![data.len()], data.to_vec()).unwrap(), true)
        .unwrap();
    s
}

fn set_grad(store: &mut ParamStore<f32>, id: &str, g: &[f32]) {
    let pid = store.id_of(id).unwrap();
    store.get_mut(pid).grad.copy_from_slice(g);
}

#[test]
fn plain_sgd_step() {
    let mut store = store_vec("w", &[1.0]);
    let cfg = SgdConfig {
        base_lr: 0.1,
        momentum: 0.0,
        decay: 0.0,
        clip_norm: 1e9,
    };
    let mut opt = SgdMomentum::new(cfg, &store).unwrap();
    set_grad(&mut store, "w", &[2.0]);
    let lr = opt.step(&mut store).unwrap();
    assert_eq!(lr, 0.1);
    let pid = store.id_of("w").unwrap();
    assert!((store.get(pid).value.data()[0] - 0.8).abs() < 1e-7);
    assert_eq!(store.get(pid).grad[0], 0.0, "accumulator zeroed after step");
    assert_eq!(opt.step_count(), 1);
}

#[test]
fn zero_gradient_is_a_fixed_point() {
    let mut store = store_vec("w", &[0.25, -3.5]);
    let mut opt = SgdMomentum::new(SgdConfig::default(), &store).unwrap();
    opt.step(&mut store).unwrap();
    opt.step(&mut store).unwrap();
    let pid = store.id_of("w").unwrap();
    assert_eq!(store.get(pid).value.data(), &[0.25, -3.5]);
}

#[test]
fn momentum_unrolls_to_minus_two_point_nine() {
    // v1 = 1, theta = -1; v2 = 0.9 + 1 = 1.9, theta = -2.9.
    let mut store = store_vec("w", &[0.0]);
    let cfg = SgdConfig {
        base_lr: 1.0,
        momentum: 0.9,
        decay: 0.0,
        clip_norm: 1e9,
    };
    let mut opt = SgdMomentum::new(cfg, &store).unwrap();
    for _ in 0..2 {
        set_grad(&mut store, "w", &[1.0]);
        opt.step(&mut store).unwrap();
    }
    let pid = store.id_of("w").unwrap();
    assert!((store.get(pid).value.data()[0] + 2.9).abs() < 1e-6);
}

#[test]
fn schedule_matches_inverse_time_decay() {
    assert_eq!(lr_schedule(0.5, 0.005, 0), 0.5);
    assert!((lr_schedule(0.5, 0.005, 200) - 0.25).abs() < 1e-12);
    for step in [0u64, 1, 10, 1000, 1_000_000] {
        assert_eq!(lr_schedule(0.3, 0.0, step), 0.3);
    }
    // Monotone non-increasing.
    let mut prev = f64::INFINITY;
    for step in 0..500 {
        let lr = lr_schedule(0.5, 0.005, step);
        assert!(lr <= prev);
        prev = lr;
    }
}

#[test]
fn negative_decay_is_rejected() {
    let store = store_vec("w", &[1.0]);
    let cfg = SgdConfig {
        decay: -0.001,
        ..SgdConfig::default()
    };
    assert!(matches!(
        SgdMomentum::new(cfg, &store),
        Err(NdiffError::NegativeDecay(_))
    ));
}

#[test]
fn non_finite_gradient_names_the_parameter() {
    let mut store = store_vec("enc.w", &[1.0, 2.0]);
    let mut opt = SgdMomentum::new(SgdConfig::default(), &store).unwrap();
    set_grad(&mut store, "enc.w", &[1.0, f32::NAN]);
    match opt.step(&mut store) {
        Err(NdiffError::NonFiniteGradient(id)) => assert_eq!(id, "enc.w"),
        other => panic!("expected NonFiniteGradient, got {other:?}"),
    }
}

#[test]
fn global_norm_clipping_rescales() {
    // Gradient (3, 4) has norm 5; clip at 1 scales it to (0.6, 0.8).
    let mut store = store_vec("w", &[0.0, 0.0]);
    let cfg = SgdConfig {
        base_lr: 1.0,
        momentum: 0.0,
        decay: 0.0,
        clip_norm: 1.0,
    };
    let mut opt = SgdMomentum::new(cfg, &store).unwrap();
    set_grad(&mut store, "w", &[3.0, 4.0]);
    opt.step(&mut store).unwrap();
    let pid = store.id_of("w").unwrap();
    let v = store.get(pid).value.data();
    assert!((v[0] + 0.6).abs() < 1e-6 && (v[1] + 0.8).abs() < 1e-6, "{v:?}");

    // Under the threshold nothing is scaled.
    let mut store2 = store_vec("w", &[0.0, 0.0]);
    let cfg2 = SgdConfig {
        base_lr: 1.0,
        momentum: 0.0,
        decay: 0.0,
        clip_norm: 10.0,
    };
    let mut opt2 = SgdMomentum::new(cfg2, &store2).unwrap();
    set_grad(&mut store2, "w", &[3.0, 4.0]);
    opt2.step(&mut store2).unwrap();
    let pid2 = store2.id_of("w").unwrap();
    assert_eq!(store2.get(pid2).value.data(), &[-3.0, -4.0]);
}

#[test]
fn frozen_parameters_are_untouched() {
    let mut store = ParamStore::new();
    store
        .add("frozen", Tensor::new(vec![2], vec![1.0f32, 2.0]).unwrap(), false)
        .unwrap();
    let mut opt = SgdMomentum::new(SgdConfig::default(), &store).unwrap();
    let pid = store.id_of("frozen").unwrap();
    store.get_mut(pid).grad.copy_from_slice(&[5.0, 5.0]);
    opt.step(&mut store).unwrap();
    assert_eq!(store.get(pid).value.data(), &[1.0, 2.0]);
}

#[test]
fn decayed_lr_is_used_per_step() {
    let mut store = store_vec("w", &[0.0]);
    let cfg = SgdConfig {
        base_lr: 0.5,
        momentum: 0.0,
        decay: 0.005,
        clip_norm: 1e9,
    };
    let mut opt = SgdMomentum::new(cfg, &store).unwrap();
    assert_eq!(opt.current_lr(), 0.5);
    set_grad(&mut store, "w", &[1.0]);
    opt.step(&mut store).unwrap();
    assert!((opt.current_lr() - 0.5 / 1.005).abs() < 1e-12);
}
