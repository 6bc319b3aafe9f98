//! Forward-value examples and hand-checked backward rules.

use ndiff::{NdiffError, ParamStore, Tape, Tensor};

fn t2(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
    Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
}

fn store_one(id: &str, t: Tensor<f64>) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.add(id, t, true).unwrap();
    s
}

#[test]
fn softmax_of_uniform_logits_is_uniform() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t2(1, 2, &[0.0, 0.0]));
    let y = tape.softmax(x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, 0.5]);

    let x3 = tape.constant(t2(2, 3, &[1.0, 1.0, 1.0, -4.0, -4.0, -4.0]));
    let y3 = tape.softmax(x3).unwrap();
    for &v in tape.value(y3).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn matmul_hand_example() {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(t2(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let b = tape.constant(t2(2, 1, &[1.0, 1.0]));
    let y = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 1]);
    assert_eq!(tape.value(y).data(), &[3.0, 7.0]);
}

#[test]
fn matmul_shape_error_names_kernel_and_shapes() {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(t2(2, 3, &[0.0; 6]));
    let b = tape.constant(t2(2, 3, &[0.0; 6]));
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("matmul"), "{msg}");
    assert!(msg.contains("[2, 3]"), "{msg}");
    match err {
        NdiffError::ShapeMismatch { kernel, lhs, rhs } => {
            assert_eq!(kernel, "matmul");
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn dropout_rate_zero_is_identity() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(t2(2, 2, &[1.0, -2.0, 3.0, -4.0]));
    let y = tape.dropout(x, 0.0, &mut rng).unwrap();
    assert_eq!(y, x, "rate 0 should not even record a node");
    assert_eq!(tape.value(y).data(), &[1.0, -2.0, 3.0, -4.0]);

    assert!(matches!(
        tape.dropout(x, 1.0, &mut rng),
        Err(NdiffError::InvalidDropoutRate(_))
    ));
    assert!(matches!(
        tape.dropout(x, -0.1, &mut rng),
        Err(NdiffError::InvalidDropoutRate(_))
    ));
}

#[test]
fn dropout_scales_survivors() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full(vec![1000], 1.0));
    let y = tape.dropout(x, 0.5, &mut rng).unwrap();
    let mut kept = 0usize;
    for &v in tape.value(y).data() {
        assert!(v == 0.0 || v == 2.0, "survivors scale by 1/(1-r), got {v}");
        kept += (v != 0.0) as usize;
    }
    // Seeded mask; roughly half survive.
    assert!((350..650).contains(&kept), "kept {kept} of 1000");
}

#[test]
fn max_over_time_picks_first_max_and_routes_gradient() {
    let mut store = ParamStore::new();
    let x = t2(4, 2, &[1.0, 5.0, 3.0, 5.0, -1.0, 0.0, -1.0, -2.0]);
    let pid = store.add("x", x, true).unwrap();

    let mut tape = Tape::<f64>::new();
    let v = tape.param(&store, pid);
    let y = tape.max_over_time(v, 2).unwrap();
    // Word 0 rows: [1,5],[3,5] -> [3,5] (tie in col 1 takes the first row).
    // Word 1 rows: [-1,0],[-1,-2] -> [-1,0] (tie in col 0 takes the first).
    assert_eq!(tape.value(y).data(), &[3.0, 5.0, -1.0, 0.0]);

    let loss = tape.sum_all(y).unwrap();
    tape.backward(loss, &mut store).unwrap();
    let g = &store.get(pid).grad;
    assert_eq!(g.as_slice(), &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
}

#[test]
fn im2col_unfolds_windows() {
    let mut tape = Tape::<f64>::new();
    // 1 word, 4 chars, embedding dim 2.
    let x = tape.constant(t2(4, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]));
    let y = tape.im2col(x, 1, 4, 3).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 6]);
    assert_eq!(
        tape.value(y).data(),
        &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    );

    // Too few chars for the filter width is an error, not a silent shrink.
    let short = tape.constant(t2(2, 2, &[0.0; 4]));
    assert!(tape.im2col(short, 1, 2, 3).is_err());
}

#[test]
fn gather_pick_slice_concat_forward() {
    let mut tape = Tape::<f64>::new();
    let table = tape.constant(t2(3, 2, &[10.0, 11.0, 20.0, 21.0, 30.0, 31.0]));
    let g = tape.gather_rows(table, &[2, 0, 2]).unwrap();
    assert_eq!(tape.value(g).data(), &[30.0, 31.0, 10.0, 11.0, 30.0, 31.0]);
    assert!(tape.gather_rows(table, &[3]).is_err());

    let p = tape.pick_per_row(g, &[0, 1, 1]).unwrap();
    assert_eq!(tape.value(p).data(), &[30.0, 11.0, 31.0]);

    let s = tape.slice_rows(g, 1, 2).unwrap();
    assert_eq!(tape.value(s).data(), &[10.0, 11.0, 30.0, 31.0]);

    let c = tape.concat_cols(&[s, s]).unwrap();
    assert_eq!(tape.value(c).shape(), &[2, 4]);
    assert_eq!(
        tape.value(c).data(),
        &[10.0, 11.0, 10.0, 11.0, 30.0, 31.0, 30.0, 31.0]
    );

    let r = tape.concat_rows(&[s, s]).unwrap();
    assert_eq!(tape.value(r).shape(), &[4, 2]);
}

#[test]
fn backward_of_sum_is_ones() {
    let mut store = store_one("w", t2(2, 3, &[0.3, -0.7, 1.5, 2.0, -0.2, 0.9]));
    let pid = store.id_of("w").unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, pid);
    let loss = tape.sum_all(w).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.get(pid).grad.as_slice(), &[1.0; 6]);
}

#[test]
fn backward_through_stop_gradient_is_exactly_zero() {
    let mut store = store_one("w", t2(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let pid = store.id_of("w").unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, pid);
    let frozen = tape.stop_gradient(w).unwrap();
    let loss = tape.sum_all(frozen).unwrap();
    assert_eq!(tape.value(loss).item(), 10.0);
    tape.backward(loss, &mut store).unwrap();
    for &g in &store.get(pid).grad {
        assert_eq!(g.to_bits(), 0f64.to_bits(), "stop_gradient must block exactly");
    }
}

#[test]
fn backward_of_square_at_two_is_four() {
    let mut store = store_one("w", t2(1, 1, &[2.0]));
    let pid = store.id_of("w").unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, pid);
    let sq = tape.mul(w, w).unwrap();
    let loss = tape.sum_all(sq).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.get(pid).grad.as_slice(), &[4.0]);
}

#[test]
fn repeated_backward_accumulates() {
    let mut store = store_one("w", t2(1, 2, &[1.0, -1.0]));
    let pid = store.id_of("w").unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, pid);
    let loss = tape.sum_all(w).unwrap();
    tape.backward(loss, &mut store).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.get(pid).grad.as_slice(), &[2.0, 2.0]);
}

#[test]
fn backward_rejects_non_scalar_and_foreign_vars() {
    let mut store = store_one("w", t2(1, 2, &[1.0, 2.0]));
    let pid = store.id_of("w").unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, pid);
    assert!(matches!(
        tape.backward(w, &mut store),
        Err(NdiffError::NonScalarLoss { numel: 2 })
    ));

    let mut other = Tape::<f64>::new();
    let foreign = other.constant(Tensor::scalar(1.0));
    assert!(matches!(
        tape.backward(foreign, &mut store),
        Err(NdiffError::ForeignVariable)
    ));
}

#[test]
fn masked_reductions() {
    let mut store = store_one("x", t2(1, 4, &[1.0, 2.0, 3.0, 4.0]));
    let pid = store.id_of("x").unwrap();
    let mut tape = Tape::new();
    let x = tape.param(&store, pid);
    let mask = [1.0, 0.0, 1.0, 0.0];
    let mean = tape.masked_mean(x, &mask).unwrap();
    assert_eq!(tape.value(mean).item(), 2.0);
    let sum = tape.masked_sum(x, &mask).unwrap();
    assert_eq!(tape.value(sum).item(), 4.0);

    tape.backward(mean, &mut store).unwrap();
    assert_eq!(store.get(pid).grad.as_slice(), &[0.5, 0.0, 0.5, 0.0]);

    assert!(tape.masked_mean(x, &[0.0; 4]).is_err());
    assert!(tape.masked_mean(x, &[1.0; 3]).is_err());
}

#[test]
fn finiteness_is_assertable() {
    let mut tape = Tape::<f64>::new();
    tape.constant(t2(1, 2, &[1.0, 2.0]));
    assert!(tape.assert_all_finite().is_ok());
    tape.constant(t2(1, 2, &[1.0, f64::NAN]));
    assert!(tape.assert_all_finite().is_err());
}
