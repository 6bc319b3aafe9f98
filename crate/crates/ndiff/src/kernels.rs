//! Raw numeric kernels shared by forward ops and backward rules.
//!
//! Parallel loops go over output rows only; the per-row reduction order is
//! fixed, which keeps results independent of thread count.

use crate::par::for_each_chunk;
use crate::real::Real;

/// out[m,n] = a[m,k] * b[k,n]
pub(crate) fn matmul_nn<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for_each_chunk(&mut out, n, m * k * n, |i, row| {
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &a_ik) in a_row.iter().enumerate() {
            if a_ik == T::zero() {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o = *o + a_ik * bv;
            }
        }
    });
    out
}

/// out[m,k] = a[m,n] * b[k,n]^T  (b given row-major as [k,n])
pub(crate) fn matmul_nt<T: Real>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for_each_chunk(&mut out, k, m * k * n, |i, row| {
        let a_row = &a[i * n..(i + 1) * n];
        for (kk, o) in row.iter_mut().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            let mut acc = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc = acc + av * bv;
            }
            *o = acc;
        }
    });
    out
}

/// out[k,n] = a[m,k]^T * b[m,n]  (a given row-major as [m,k])
pub(crate) fn matmul_tn<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for_each_chunk(&mut out, n, m * k * n, |kk, row| {
        for i in 0..m {
            let a_ik = a[i * k + kk];
            if a_ik == T::zero() {
                continue;
            }
            let b_row = &b[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o = *o + a_ik * bv;
            }
        }
    });
    out
}

pub(crate) fn map_unary<T: Real>(a: &[T], f: impl Fn(T) -> T + Sync) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    let chunk = chunk_len(a.len());
    for_each_chunk(&mut out, chunk, a.len(), |i, c| {
        let src = &a[i * chunk..i * chunk + c.len()];
        for (o, &v) in c.iter_mut().zip(src) {
            *o = f(v);
        }
    });
    out
}

pub(crate) fn map_binary<T: Real>(a: &[T], b: &[T], f: impl Fn(T, T) -> T + Sync) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut out = vec![T::zero(); a.len()];
    let chunk = chunk_len(a.len());
    for_each_chunk(&mut out, chunk, a.len(), |i, c| {
        let lo = i * chunk;
        let (sa, sb) = (&a[lo..lo + c.len()], &b[lo..lo + c.len()]);
        for ((o, &va), &vb) in c.iter_mut().zip(sa).zip(sb) {
            *o = f(va, vb);
        }
    });
    out
}

fn chunk_len(len: usize) -> usize {
    // Chunk size only affects scheduling, not results.
    len.clamp(1, 4096)
}

/// Row-wise softmax over the last axis, numerically stabilized.
pub(crate) fn softmax_rows<T: Real>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for_each_chunk(&mut out, cols, rows * cols * 4, |i, row| {
        let src = &x[i * cols..(i + 1) * cols];
        let mut mx = src[0];
        for &v in &src[1..] {
            if v > mx {
                mx = v;
            }
        }
        let mut sum = T::zero();
        for (o, &v) in row.iter_mut().zip(src) {
            let e = (v - mx).exp();
            *o = e;
            sum = sum + e;
        }
        for o in row.iter_mut() {
            *o = *o / sum;
        }
    });
    out
}

/// Row-wise log-softmax: x - max - log(sum(exp(x - max))).
pub(crate) fn log_softmax_rows<T: Real>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for_each_chunk(&mut out, cols, rows * cols * 4, |i, row| {
        let src = &x[i * cols..(i + 1) * cols];
        let mut mx = src[0];
        for &v in &src[1..] {
            if v > mx {
                mx = v;
            }
        }
        let mut sum = T::zero();
        for &v in src {
            sum = sum + (v - mx).exp();
        }
        let log_z = sum.ln();
        for (o, &v) in row.iter_mut().zip(src) {
            *o = v - mx - log_z;
        }
    });
    out
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}
