use ndiff::{lr_schedule, ParamStore, Tape, Tensor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 2usize..9,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Logit gaps stay under ~30 so the winning probability is strictly
        // below 1 even after f64 rounding.
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-15.0..15.0)).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![rows, cols], data).unwrap());
        let y = tape.softmax(x).unwrap();
        for row in tape.value(y).data().chunks(cols) {
            let mut sum = 0.0;
            for &v in row {
                prop_assert!(v > 0.0 && v < 1.0, "softmax value {} outside (0,1)", v);
                sum += v;
            }
            prop_assert!((sum - 1.0).abs() < 1e-6, "row sums to {}", sum);
        }
    }

    #[test]
    fn log_softmax_agrees_with_softmax(
        cols in 2usize..9,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..cols).map(|_| rng.random_range(-20.0..20.0)).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, cols], data).unwrap());
        let p = tape.softmax(x).unwrap();
        let lp = tape.log_softmax(x).unwrap();
        for (&pv, &lv) in tape.value(p).data().iter().zip(tape.value(lp).data()) {
            prop_assert!((lv.exp() - pv).abs() < 1e-12);
        }
    }

    #[test]
    fn lr_schedule_is_monotone(
        base in 0.01f64..10.0,
        decay in 0.0f64..1.0,
        s1 in 0u64..100_000,
        gap in 0u64..100_000,
    ) {
        prop_assert!(lr_schedule(base, decay, s1 + gap) <= lr_schedule(base, decay, s1));
        prop_assert_eq!(lr_schedule(base, 0.0, s1), base);
    }

    #[test]
    fn gather_backward_counts_multiplicity(
        rows in 2usize..6,
        picks in proptest::collection::vec(0usize..6, 1..12),
    ) {
        let picks: Vec<usize> = picks.into_iter().map(|p| p % rows).collect();
        let mut store = ParamStore::new();
        let pid = store
            .add("table", Tensor::<f64>::full(vec![rows, 3], 0.5), true)
            .unwrap();
        let mut tape = Tape::new();
        let table = tape.param(&store, pid);
        let g = tape.gather_rows(table, &picks).unwrap();
        let loss = tape.sum_all(g).unwrap();
        tape.backward(loss, &mut store).unwrap();
        let grad = &store.get(pid).grad;
        for r in 0..rows {
            let mult = picks.iter().filter(|&&p| p == r).count() as f64;
            for c in 0..3 {
                prop_assert_eq!(grad[r * 3 + c], mult);
            }
        }
    }

    #[test]
    fn single_column_softmax_is_exactly_one(rows in 1usize..5, v in -5.0f64..5.0) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![rows, 1], v));
        let y = tape.softmax(x).unwrap();
        for &o in tape.value(y).data() {
            prop_assert_eq!(o, 1.0);
        }
    }
}
