//! Recorded computation graph with reverse-mode backward rules.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::NdiffError;
use crate::kernels;
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a [`Tape`]. Only valid for the tape that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

enum Op<T> {
    Leaf { param: Option<ParamId> },
    Constant,
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, factor: T },
    AddBias { a: usize, bias: usize },
    ConcatCols { parts: Vec<usize>, widths: Vec<usize> },
    ConcatRows { parts: Vec<usize>, heights: Vec<usize> },
    SliceRows { a: usize, start: usize },
    GatherRows { a: usize, indices: Vec<usize> },
    Im2Col { a: usize, chars: usize, width: usize },
    MaxOverTime { a: usize, group: usize, argmax: Vec<u32> },
    Sigmoid { a: usize },
    Tanh { a: usize },
    Relu { a: usize },
    Softmax { a: usize },
    LogSoftmax { a: usize },
    Dropout { a: usize, mask: Vec<T> },
    StopGradient,
    ScaleRows { a: usize, factors: Vec<T> },
    SumAll { a: usize },
    RowSum { a: usize },
    MaskedMean { a: usize, mask: Vec<T>, count: T },
    MaskedSum { a: usize, mask: Vec<T> },
    PickPerRow { a: usize, indices: Vec<usize> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// One forward computation. Nodes are appended in topological order; the
/// backward pass walks them once in reverse.
pub struct Tape<T> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<usize, NdiffError> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(NdiffError::ForeignVariable);
        }
        Ok(v.idx)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    /// Record a constant; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Record a leaf bound to a stored parameter; `backward` accumulates
    /// its gradient into the store.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let value = store.get(id).value.clone();
        self.push(value, Op::Leaf { param: Some(id) })
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NdiffError> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ai].value, &self.nodes[bi].value);
        let (m, k) = (ta.rows(), ta.cols());
        let (k2, n) = (tb.rows(), tb.cols());
        if k != k2 || ta.shape().len() != 2 || tb.shape().len() != 2 {
            return Err(NdiffError::ShapeMismatch {
                kernel: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = kernels::matmul_nn(ta.data(), tb.data(), m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::MatMul { a: ai, b: bi }))
    }

    fn binary(
        &mut self,
        kernel: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T + Sync,
        tag: impl Fn(usize, usize) -> Op<T>,
    ) -> Result<Var, NdiffError> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (ta, tb) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if ta.shape() != tb.shape() {
            return Err(NdiffError::ShapeMismatch {
                kernel,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let data = kernels::map_binary(ta.data(), tb.data(), f);
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, tag(ai, bi)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NdiffError> {
        self.binary("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NdiffError> {
        self.binary("sub", a, b, |x, y| x - y, |a, b| Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NdiffError> {
        self.binary("mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let f = T::from_f64(factor);
        let ta = &self.nodes[ai].value;
        let data = kernels::map_unary(ta.data(), |x| x * f);
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Scale { a: ai, factor: f }))
    }

    /// Add a 1-D bias of length `cols` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, NdiffError> {
        let (ai, bi) = (self.check(a)?, self.check(bias)?);
        let (ta, tb) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if tb.shape().len() != 1 || tb.cols() != ta.cols() {
            return Err(NdiffError::ShapeMismatch {
                kernel: "add_bias",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let cols = ta.cols();
        let (xd, bd) = (ta.data(), tb.data());
        let mut data = vec![T::zero(); xd.len()];
        crate::par::for_each_chunk(&mut data, cols, xd.len(), |i, row| {
            let src = &xd[i * cols..(i + 1) * cols];
            for ((o, &x), &b) in row.iter_mut().zip(src).zip(bd) {
                *o = x + b;
            }
        });
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddBias { a: ai, bias: bi }))
    }

    /// Concatenate 2-D inputs along columns; all must share the row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NdiffError> {
        if parts.is_empty() {
            return Err(NdiffError::InvalidArgument {
                kernel: "concat_cols",
                msg: "no inputs".into(),
            });
        }
        let idxs: Vec<usize> = parts
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<_, _>>()?;
        let rows = self.nodes[idxs[0]].value.rows();
        let mut widths = Vec::with_capacity(idxs.len());
        for &i in &idxs {
            let t = &self.nodes[i].value;
            if t.rows() != rows {
                return Err(NdiffError::ShapeMismatch {
                    kernel: "concat_cols",
                    lhs: self.nodes[idxs[0]].value.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            widths.push(t.cols());
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![T::zero(); rows * total];
        let mut off = 0;
        for (&i, &w) in idxs.iter().zip(&widths) {
            let src = self.nodes[i].value.data();
            for r in 0..rows {
                data[r * total + off..r * total + off + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            off += w;
        }
        let out = Tensor::new(vec![rows, total], data)?;
        Ok(self.push(out, Op::ConcatCols { parts: idxs, widths }))
    }

    /// Stack 2-D inputs along rows; all must share the column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NdiffError> {
        if parts.is_empty() {
            return Err(NdiffError::InvalidArgument {
                kernel: "concat_rows",
                msg: "no inputs".into(),
            });
        }
        let idxs: Vec<usize> = parts
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<_, _>>()?;
        let cols = self.nodes[idxs[0]].value.cols();
        let mut heights = Vec::with_capacity(idxs.len());
        for &i in &idxs {
            let t = &self.nodes[i].value;
            if t.cols() != cols {
                return Err(NdiffError::ShapeMismatch {
                    kernel: "concat_rows",
                    lhs: self.nodes[idxs[0]].value.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            heights.push(t.rows());
        }
        let total: usize = heights.iter().sum();
        let mut data = Vec::with_capacity(total * cols);
        for &i in &idxs {
            data.extend_from_slice(self.nodes[i].value.data());
        }
        let out = Tensor::new(vec![total, cols], data)?;
        Ok(self.push(out, Op::ConcatRows { parts: idxs, heights }))
    }

    /// Contiguous row slice `[start, start + len)` of a 2-D input.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        if len == 0 || start + len > rows {
            return Err(NdiffError::InvalidArgument {
                kernel: "slice_rows",
                msg: format!("slice {}..{} out of {} rows", start, start + len, rows),
            });
        }
        let data = ta.data()[start * cols..(start + len) * cols].to_vec();
        let out = Tensor::new(vec![len, cols], data)?;
        Ok(self.push(out, Op::SliceRows { a: ai, start }))
    }

    /// Row lookup (embedding gather): out[i] = a[indices[i]].
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(NdiffError::InvalidArgument {
                kernel: "gather_rows",
                msg: format!("index {} out of {} rows", bad, rows),
            });
        }
        let src = ta.data();
        let mut data = vec![T::zero(); indices.len() * cols];
        for (o, &i) in data.chunks_mut(cols).zip(indices) {
            o.copy_from_slice(&src[i * cols..(i + 1) * cols]);
        }
        let out = Tensor::new(vec![indices.len(), cols], data)?;
        Ok(self.push(
            out,
            Op::GatherRows {
                a: ai,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Unfold per-word character rows into convolution windows.
    ///
    /// Input is `[words * chars, emb]`; each word contributes
    /// `chars - width + 1` windows of `width * emb` values.
    pub fn im2col(
        &mut self,
        a: Var,
        words: usize,
        chars: usize,
        width: usize,
    ) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let emb = ta.cols();
        if width == 0 || chars < width || ta.rows() != words * chars {
            return Err(NdiffError::InvalidArgument {
                kernel: "im2col",
                msg: format!(
                    "words={} chars={} width={} incompatible with input shape {:?}",
                    words,
                    chars,
                    width,
                    ta.shape()
                ),
            });
        }
        let windows = chars - width + 1;
        let src = ta.data();
        let out_cols = width * emb;
        let mut data = vec![T::zero(); words * windows * out_cols];
        crate::par::for_each_chunk(&mut data, out_cols, words * windows * out_cols, |i, row| {
            let (w, j) = (i / windows, i % windows);
            let lo = (w * chars + j) * emb;
            row.copy_from_slice(&src[lo..lo + out_cols]);
        });
        let out = Tensor::new(vec![words * windows, out_cols], data)?;
        Ok(self.push(
            out,
            Op::Im2Col {
                a: ai,
                chars,
                width,
            },
        ))
    }

    /// Per-word max over `group` consecutive rows: `[words * group, f]`
    /// becomes `[words, f]`. Ties resolve to the first maximum.
    pub fn max_over_time(&mut self, a: Var, group: usize) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        if group == 0 || rows % group != 0 {
            return Err(NdiffError::InvalidArgument {
                kernel: "max_over_time",
                msg: format!("group {} does not divide {} rows", group, rows),
            });
        }
        let words = rows / group;
        let src = ta.data();
        let mut data = vec![T::zero(); words * cols];
        let mut argmax = vec![0u32; words * cols];
        for w in 0..words {
            let out_row = &mut data[w * cols..(w + 1) * cols];
            let am_row = &mut argmax[w * cols..(w + 1) * cols];
            out_row.copy_from_slice(&src[w * group * cols..(w * group + 1) * cols]);
            for j in 1..group {
                let cand = &src[(w * group + j) * cols..(w * group + j + 1) * cols];
                for f in 0..cols {
                    if cand[f] > out_row[f] {
                        out_row[f] = cand[f];
                        am_row[f] = j as u32;
                    }
                }
            }
        }
        let out = Tensor::new(vec![words, cols], data)?;
        Ok(self.push(out, Op::MaxOverTime { a: ai, group, argmax }))
    }

    fn unary(
        &mut self,
        a: Var,
        f: impl Fn(T) -> T + Sync,
        tag: impl Fn(usize) -> Op<T>,
    ) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let data = kernels::map_unary(ta.data(), f);
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, tag(ai)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NdiffError> {
        self.unary(a, kernels::sigmoid, |a| Op::Sigmoid { a })
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NdiffError> {
        self.unary(a, |x| x.tanh(), |a| Op::Tanh { a })
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NdiffError> {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, |a| {
            Op::Relu { a }
        })
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let data = kernels::softmax_rows(ta.data(), ta.rows(), ta.cols());
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Softmax { a: ai }))
    }

    /// Row-wise log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let data = kernels::log_softmax_rows(ta.data(), ta.rows(), ta.cols());
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::LogSoftmax { a: ai }))
    }

    /// Inverted dropout: each element is zeroed with probability `rate`,
    /// survivors scaled by 1/(1-rate). `rate == 0` is the identity.
    pub fn dropout<R: Rng>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
    ) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        if !(0.0..1.0).contains(&rate) {
            return Err(NdiffError::InvalidDropoutRate(rate));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let ta = &self.nodes[ai].value;
        let mask: Vec<T> = (0..ta.numel())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = kernels::map_binary(ta.data(), &mask, |x, m| x * m);
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout { a: ai, mask }))
    }

    /// Pass values forward, block all gradient flow.
    pub fn stop_gradient(&mut self, a: Var) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let value = self.nodes[ai].value.clone();
        Ok(self.push(value, Op::StopGradient))
    }

    /// Multiply row `i` of a 2-D input by `factors[i]` (mask application).
    pub fn scale_rows(&mut self, a: Var, factors: &[T]) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        if factors.len() != rows {
            return Err(NdiffError::InvalidArgument {
                kernel: "scale_rows",
                msg: format!("{} factors for {} rows", factors.len(), rows),
            });
        }
        let src = ta.data();
        let mut data = vec![T::zero(); src.len()];
        crate::par::for_each_chunk(&mut data, cols, src.len(), |i, row| {
            let f = factors[i];
            let s = &src[i * cols..(i + 1) * cols];
            for (o, &x) in row.iter_mut().zip(s) {
                *o = x * f;
            }
        });
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(
            out,
            Op::ScaleRows {
                a: ai,
                factors: factors.to_vec(),
            },
        ))
    }

    /// Sum of all elements, as a `[1]` scalar.
    pub fn sum_all(&mut self, a: Var) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let mut acc = T::zero();
        for &v in self.nodes[ai].value.data() {
            acc = acc + v;
        }
        Ok(self.push(Tensor::scalar(acc), Op::SumAll { a: ai }))
    }

    /// Sum over the last axis of a 2-D input: `[r, c]` becomes `[r]`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        let src = ta.data();
        let mut data = vec![T::zero(); rows];
        for (o, row) in data.iter_mut().zip(src.chunks(cols)) {
            let mut acc = T::zero();
            for &v in row {
                acc = acc + v;
            }
            *o = acc;
        }
        let out = Tensor::new(vec![rows], data)?;
        Ok(self.push(out, Op::RowSum { a: ai }))
    }

    /// Mean of the elements selected by a 0/1 mask. Errors when the mask
    /// selects nothing.
    pub fn masked_mean(&mut self, a: Var, mask: &[T]) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        if mask.len() != ta.numel() {
            return Err(NdiffError::InvalidArgument {
                kernel: "masked_mean",
                msg: format!("mask of {} for {} elements", mask.len(), ta.numel()),
            });
        }
        let mut count = T::zero();
        let mut acc = T::zero();
        for (&v, &m) in ta.data().iter().zip(mask) {
            acc = acc + v * m;
            count = count + m;
        }
        if count == T::zero() {
            return Err(NdiffError::InvalidArgument {
                kernel: "masked_mean",
                msg: "mask selects zero elements".into(),
            });
        }
        let out = Tensor::scalar(acc / count);
        Ok(self.push(
            out,
            Op::MaskedMean {
                a: ai,
                mask: mask.to_vec(),
                count,
            },
        ))
    }

    /// Sum of the elements selected by a 0/1 mask.
    pub fn masked_sum(&mut self, a: Var, mask: &[T]) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        if mask.len() != ta.numel() {
            return Err(NdiffError::InvalidArgument {
                kernel: "masked_sum",
                msg: format!("mask of {} for {} elements", mask.len(), ta.numel()),
            });
        }
        let mut acc = T::zero();
        for (&v, &m) in ta.data().iter().zip(mask) {
            acc = acc + v * m;
        }
        let out = Tensor::scalar(acc);
        Ok(self.push(
            out,
            Op::MaskedSum {
                a: ai,
                mask: mask.to_vec(),
            },
        ))
    }

    /// Select one column per row: out[i] = a[i, indices[i]].
    pub fn pick_per_row(&mut self, a: Var, indices: &[usize]) -> Result<Var, NdiffError> {
        let ai = self.check(a)?;
        let ta = &self.nodes[ai].value;
        let (rows, cols) = (ta.rows(), ta.cols());
        if indices.len() != rows {
            return Err(NdiffError::InvalidArgument {
                kernel: "pick_per_row",
                msg: format!("{} indices for {} rows", indices.len(), rows),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= cols) {
            return Err(NdiffError::InvalidArgument {
                kernel: "pick_per_row",
                msg: format!("column {} out of {}", bad, cols),
            });
        }
        let src = ta.data();
        let data: Vec<T> = indices
            .iter()
            .enumerate()
            .map(|(i, &j)| src[i * cols + j])
            .collect();
        let out = Tensor::new(vec![rows], data)?;
        Ok(self.push(
            out,
            Op::PickPerRow {
                a: ai,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Debug check: every node value on the tape is finite.
    pub fn assert_all_finite(&self) -> Result<(), NdiffError> {
        for node in &self.nodes {
            if !node.value.is_finite() {
                return Err(NdiffError::NonFiniteLoss);
            }
        }
        Ok(())
    }

    /// Reverse-mode pass from a scalar loss. Parameter gradients are added
    /// into the store's accumulators; repeated calls accumulate.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<(), NdiffError> {
        let loss_idx = self.check(loss)?;
        let loss_val = &self.nodes[loss_idx].value;
        if loss_val.numel() != 1 {
            return Err(NdiffError::NonScalarLoss {
                numel: loss_val.numel(),
            });
        }

        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss_idx + 1];
        grads[loss_idx] = Some(vec![T::one()]);

        for i in (0..=loss_idx).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(pid) = param {
                        store.accumulate(*pid, &g);
                    }
                }
                Op::Constant | Op::StopGradient => {}
                Op::MatMul { a, b } => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let da = kernels::matmul_nt(&g, tb.data(), m, n, k);
                    let db = kernels::matmul_tn(ta.data(), &g, m, k, n);
                    accum_owned(&mut grads, *a, da);
                    accum_owned(&mut grads, *b, db);
                }
                Op::Add { a, b } => {
                    accum(&mut grads, *a, &g);
                    accum_owned(&mut grads, *b, g);
                }
                Op::Sub { a, b } => {
                    accum(&mut grads, *a, &g);
                    let neg = kernels::map_unary(&g, |x| -x);
                    accum_owned(&mut grads, *b, neg);
                }
                Op::Mul { a, b } => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let da = kernels::map_binary(&g, tb.data(), |gv, bv| gv * bv);
                    let db = kernels::map_binary(&g, ta.data(), |gv, av| gv * av);
                    accum_owned(&mut grads, *a, da);
                    accum_owned(&mut grads, *b, db);
                }
                Op::Scale { a, factor } => {
                    let f = *factor;
                    let da = kernels::map_unary(&g, |x| x * f);
                    accum_owned(&mut grads, *a, da);
                }
                Op::AddBias { a, bias } => {
                    let cols = self.nodes[*bias].value.cols();
                    let mut db = vec![T::zero(); cols];
                    for row in g.chunks(cols) {
                        for (o, &v) in db.iter_mut().zip(row) {
                            *o = *o + v;
                        }
                    }
                    accum(&mut grads, *a, &g);
                    accum_owned(&mut grads, *bias, db);
                }
                Op::ConcatCols { parts, widths } => {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut off = 0;
                    for (&p, &w) in parts.iter().zip(widths) {
                        let mut dp = vec![T::zero(); rows * w];
                        for r in 0..rows {
                            dp[r * w..(r + 1) * w]
                                .copy_from_slice(&g[r * total + off..r * total + off + w]);
                        }
                        accum_owned(&mut grads, p, dp);
                        off += w;
                    }
                }
                Op::ConcatRows { parts, heights } => {
                    let cols = node.value.cols();
                    let mut off = 0;
                    for (&p, &h) in parts.iter().zip(heights) {
                        let dp = g[off * cols..(off + h) * cols].to_vec();
                        accum_owned(&mut grads, p, dp);
                        off += h;
                    }
                }
                Op::SliceRows { a, start } => {
                    let ta = &self.nodes[*a].value;
                    let cols = ta.cols();
                    let mut da = vec![T::zero(); ta.numel()];
                    da[*start * cols..*start * cols + g.len()].copy_from_slice(&g);
                    accum_owned(&mut grads, *a, da);
                }
                Op::GatherRows { a, indices } => {
                    let ta = &self.nodes[*a].value;
                    let cols = ta.cols();
                    let mut da = vec![T::zero(); ta.numel()];
                    for (row, &i) in g.chunks(cols).zip(indices) {
                        let dst = &mut da[i * cols..(i + 1) * cols];
                        for (o, &v) in dst.iter_mut().zip(row) {
                            *o = *o + v;
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::Im2Col { a, chars, width } => {
                    let ta = &self.nodes[*a].value;
                    let emb = ta.cols();
                    let windows = chars - width + 1;
                    let out_cols = width * emb;
                    let words = ta.rows() / chars;
                    let mut da = vec![T::zero(); ta.numel()];
                    for w in 0..words {
                        for j in 0..windows {
                            let src = &g[(w * windows + j) * out_cols..][..out_cols];
                            let dst = &mut da[(w * chars + j) * emb..][..out_cols];
                            for (o, &v) in dst.iter_mut().zip(src) {
                                *o = *o + v;
                            }
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::MaxOverTime { a, group, argmax } => {
                    let ta = &self.nodes[*a].value;
                    let cols = ta.cols();
                    let words = node.value.rows();
                    let mut da = vec![T::zero(); ta.numel()];
                    for w in 0..words {
                        for f in 0..cols {
                            let j = argmax[w * cols + f] as usize;
                            da[(w * group + j) * cols + f] =
                                da[(w * group + j) * cols + f] + g[w * cols + f];
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::Sigmoid { a } => {
                    let y = node.value.data();
                    let da = kernels::map_binary(&g, y, |gv, yv| gv * yv * (T::one() - yv));
                    accum_owned(&mut grads, *a, da);
                }
                Op::Tanh { a } => {
                    let y = node.value.data();
                    let da = kernels::map_binary(&g, y, |gv, yv| gv * (T::one() - yv * yv));
                    accum_owned(&mut grads, *a, da);
                }
                Op::Relu { a } => {
                    let y = node.value.data();
                    let da = kernels::map_binary(&g, y, |gv, yv| {
                        if yv > T::zero() {
                            gv
                        } else {
                            T::zero()
                        }
                    });
                    accum_owned(&mut grads, *a, da);
                }
                Op::Softmax { a } => {
                    let y = node.value.data();
                    let cols = node.value.cols();
                    let mut da = vec![T::zero(); g.len()];
                    for ((drow, grow), yrow) in
                        da.chunks_mut(cols).zip(g.chunks(cols)).zip(y.chunks(cols))
                    {
                        let mut dot = T::zero();
                        for (&gv, &yv) in grow.iter().zip(yrow) {
                            dot = dot + gv * yv;
                        }
                        for ((o, &gv), &yv) in drow.iter_mut().zip(grow).zip(yrow) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::LogSoftmax { a } => {
                    let y = node.value.data();
                    let cols = node.value.cols();
                    let mut da = vec![T::zero(); g.len()];
                    for ((drow, grow), yrow) in
                        da.chunks_mut(cols).zip(g.chunks(cols)).zip(y.chunks(cols))
                    {
                        let mut gsum = T::zero();
                        for &gv in grow {
                            gsum = gsum + gv;
                        }
                        for ((o, &gv), &yv) in drow.iter_mut().zip(grow).zip(yrow) {
                            *o = gv - yv.exp() * gsum;
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::Dropout { a, mask } => {
                    let da = kernels::map_binary(&g, mask, |gv, m| gv * m);
                    accum_owned(&mut grads, *a, da);
                }
                Op::ScaleRows { a, factors } => {
                    let cols = node.value.cols();
                    let mut da = vec![T::zero(); g.len()];
                    for ((drow, grow), &f) in da.chunks_mut(cols).zip(g.chunks(cols)).zip(factors)
                    {
                        for (o, &gv) in drow.iter_mut().zip(grow) {
                            *o = gv * f;
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::SumAll { a } => {
                    let ta = &self.nodes[*a].value;
                    let da = vec![g[0]; ta.numel()];
                    accum_owned(&mut grads, *a, da);
                }
                Op::RowSum { a } => {
                    let ta = &self.nodes[*a].value;
                    let cols = ta.cols();
                    let mut da = vec![T::zero(); ta.numel()];
                    for (drow, &gv) in da.chunks_mut(cols).zip(g.iter()) {
                        for o in drow {
                            *o = gv;
                        }
                    }
                    accum_owned(&mut grads, *a, da);
                }
                Op::MaskedMean { a, mask, count } => {
                    let scale = g[0] / *count;
                    let da: Vec<T> = mask.iter().map(|&m| m * scale).collect();
                    accum_owned(&mut grads, *a, da);
                }
                Op::MaskedSum { a, mask } => {
                    let gv = g[0];
                    let da: Vec<T> = mask.iter().map(|&m| m * gv).collect();
                    accum_owned(&mut grads, *a, da);
                }
                Op::PickPerRow { a, indices } => {
                    let ta = &self.nodes[*a].value;
                    let cols = ta.cols();
                    let mut da = vec![T::zero(); ta.numel()];
                    for (i, (&j, &gv)) in indices.iter().zip(g.iter()).enumerate() {
                        da[i * cols + j] = da[i * cols + j] + gv;
                    }
                    accum_owned(&mut grads, *a, da);
                }
            }
        }
        Ok(())
    }
}

fn accum<T: Real>(grads: &mut [Option<Vec<T>>], idx: usize, add: &[T]) {
    match &mut grads[idx] {
        Some(g) => {
            for (o, &v) in g.iter_mut().zip(add) {
                *o = *o + v;
            }
        }
        None => grads[idx] = Some(add.to_vec()),
    }
}

fn accum_owned<T: Real>(grads: &mut [Option<Vec<T>>], idx: usize, add: Vec<T>) {
    match &mut grads[idx] {
        Some(g) => {
            for (o, &v) in g.iter_mut().zip(&add) {
                *o = *o + v;
            }
        }
        None => grads[idx] = Some(add),
    }
}
