//! Rayon path vs. sequential fallback on the kernels that dominate a
//! training step. Run with `cargo bench -p ndiff`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndiff::{set_parallel, ParamStore, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(shape, data).unwrap()
}

fn bench_matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for &n in &[64usize, 128, 256] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let a = random_tensor(&mut rng, vec![n, n]);
        let b = random_tensor(&mut rng, vec![n, n]);
        for (label, par) in [("parallel", true), ("sequential", false)] {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |bench, _| {
                set_parallel(par);
                bench.iter(|| {
                    let mut tape = Tape::new();
                    let av = tape.constant(a.clone());
                    let bv = tape.constant(b.clone());
                    black_box(tape.matmul(av, bv).unwrap());
                });
            });
        }
    }
    set_parallel(true);
    group.finish();
}

fn bench_softmax_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("softmax_fwd_bwd");
    for &rows in &[256usize, 2048] {
        let cols = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(rows as u64);
        let x = random_tensor(&mut rng, vec![rows, cols]);
        let mask: Vec<f32> = (0..rows * cols).map(|i| ((i % 5) != 0) as u8 as f32).collect();
        for (label, par) in [("parallel", true), ("sequential", false)] {
            group.bench_with_input(BenchmarkId::new(label, rows), &rows, |bench, _| {
                set_parallel(par);
                bench.iter(|| {
                    let mut store = ParamStore::new();
                    let pid = store.add("x", x.clone(), true).unwrap();
                    let mut tape = Tape::new();
                    let xv = tape.param(&store, pid);
                    let p = tape.log_softmax(xv).unwrap();
                    let loss = tape.masked_mean(p, &mask).unwrap();
                    tape.backward(loss, &mut store).unwrap();
                    black_box(store.get(pid).grad[0]);
                });
            });
        }
    }
    set_parallel(true);
    group.finish();
}

fn bench_char_cnn(c: &mut Criterion) {
    // im2col + filter matmul + relu + max pool for a batch of words.
    let words = 512;
    let chars = 16;
    let emb = 50;
    let width = 3;
    let filters = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_tensor(&mut rng, vec![words * chars, emb]);
    let w = random_tensor(&mut rng, vec![width * emb, filters]);

    let mut group = c.benchmark_group("char_cnn");
    for (label, par) in [("parallel", true), ("sequential", false)] {
        group.bench_function(label, |bench| {
            set_parallel(par);
            bench.iter(|| {
                let mut tape = Tape::new();
                let xv = tape.constant(x.clone());
                let wv = tape.constant(w.clone());
                let cols = tape.im2col(xv, words, chars, width).unwrap();
                let conv = tape.matmul(cols, wv).unwrap();
                let act = tape.relu(conv).unwrap();
                black_box(tape.max_over_time(act, chars - width + 1).unwrap());
            });
        });
    }
    set_parallel(true);
    group.finish();
}

criterion_group!(benches, bench_matmul, bench_softmax_backward, bench_char_cnn);
criterion_main!(benches);
