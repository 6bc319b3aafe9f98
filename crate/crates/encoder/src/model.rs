//! Parameter construction and the forward network: char-CNN word
//! representations, two projected BiLSTM layers over masked batches, and
//! five prediction heads (one full view plus four restricted views).

use corpus::Batch;
use ndiff::{ParamId, ParamStore, Real, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::EncoderConfig;
use crate::error::EncoderError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum View {
    Full,
    Fwd,
    Bwd,
    Future,
    Past,
}

impl View {
    pub const ALL: [View; 5] = [View::Full, View::Fwd, View::Bwd, View::Future, View::Past];
    /// The four restricted views taught from the primary's predictions.
    pub const AUXILIARY: [View; 4] = [View::Fwd, View::Bwd, View::Future, View::Past];

    pub fn name(self) -> &'static str {
        match self {
            View::Full => "full",
            View::Fwd => "fwd",
            View::Bwd => "bwd",
            View::Future => "future",
            View::Past => "past",
        }
    }

    fn index(self) -> usize {
        match self {
            View::Full => 0,
            View::Fwd => 1,
            View::Bwd => 2,
            View::Future => 3,
            View::Past => 4,
        }
    }
}

impl std::str::FromStr for View {
    type Err = EncoderError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(View::Full),
            "fwd" => Ok(View::Fwd),
            "bwd" => Ok(View::Bwd),
            "future" => Ok(View::Future),
            "past" => Ok(View::Past),
            other => Err(EncoderError::UnknownView(other.to_string())),
        }
    }
}

/// One LSTM direction: per-gate input/recurrent weights and biases
/// (order i, f, o, g), plus an output projection when the cell size
/// differs from the projection size.
pub struct LstmParams {
    pub wx: [ParamId; 4],
    pub wh: [ParamId; 4],
    pub bias: [ParamId; 4],
    pub proj: Option<ParamId>,
    pub cell: usize,
    pub out: usize,
}

struct Conv {
    width: usize,
    w: ParamId,
    b: ParamId,
}

/// Per-token encoder states for one batch, flattened to `[size·t_max]`
/// rows (row `b·t_max + t`); padded rows are zero vectors.
pub struct EncoderStates {
    pub h1_fwd: Var,
    pub h1_bwd: Var,
    /// Layer-2 bidirectional concatenation, `2·projection` wide.
    pub h2: Var,
    pub size: usize,
    pub t_max: usize,
    pub mask: Vec<u8>,
}

pub struct CvtModel {
    pub config: EncoderConfig,
    pub word_vocab: usize,
    pub char_vocab: usize,
    word_emb: ParamId,
    char_emb: ParamId,
    convs: Vec<Conv>,
    lstm1f: LstmParams,
    lstm1b: LstmParams,
    lstm2f: LstmParams,
    lstm2b: LstmParams,
    heads: [(ParamId, ParamId); 5],
}

const GATES: [&str; 4] = ["i", "f", "o", "g"];
const FORGET: usize = 1;

fn xavier<T: Real, R: Rng>(
    rng: &mut R,
    store: &mut ParamStore<T>,
    name: String,
    rows: usize,
    cols: usize,
) -> ParamId {
    let lim = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<T> = (0..rows * cols)
        .map(|_| T::from_f64(rng.random_range(-lim..lim)))
        .collect();
    store
        .add(name, Tensor::new(vec![rows, cols], data).expect("shape"), true)
        .expect("fresh name")
}

fn bias_param<T: Real>(store: &mut ParamStore<T>, name: String, len: usize, fill: f64) -> ParamId {
    store
        .add(name, Tensor::full(vec![len], T::from_f64(fill)), true)
        .expect("fresh name")
}

fn lstm_group<T: Real, R: Rng>(
    rng: &mut R,
    store: &mut ParamStore<T>,
    name: &str,
    input: usize,
    cell: usize,
    out: usize,
) -> LstmParams {
    let mut wx = [ParamId::default(); 4];
    let mut wh = [ParamId::default(); 4];
    let mut bias = [ParamId::default(); 4];
    for (g, gate) in GATES.iter().enumerate() {
        wx[g] = xavier(rng, store, format!("{name}.wx_{gate}"), input, cell);
        wh[g] = xavier(rng, store, format!("{name}.wh_{gate}"), out, cell);
        // Forget-gate bias starts at 1 so early training remembers.
        let fill = if g == FORGET { 1.0 } else { 0.0 };
        bias[g] = bias_param(store, format!("{name}.b_{gate}"), cell, fill);
    }
    let proj = (cell != out).then(|| xavier(rng, store, format!("{name}.proj"), cell, out));
    LstmParams {
        wx,
        wh,
        bias,
        proj,
        cell,
        out,
    }
}

impl CvtModel {
    /// Build a model and a freshly initialized parameter store. Weights are
    /// uniform in ±sqrt(6/(fan_in+fan_out)), biases zero except the LSTM
    /// forget gates at 1; all draws come from one seeded stream in a fixed
    /// creation order, so equal seeds give bitwise-equal parameters.
    pub fn new<T: Real>(
        config: EncoderConfig,
        word_vocab: usize,
        char_vocab: usize,
        seed: u64,
    ) -> Result<(Self, ParamStore<T>), EncoderError> {
        config.validate()?;
        if word_vocab == 0 || char_vocab == 0 {
            return Err(EncoderError::Config("empty vocabulary".into()));
        }
        let mut store = ParamStore::new();
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let word_emb = xavier(rng, &mut store, "word.emb".into(), word_vocab, config.word_dim);
        let char_emb = xavier(
            rng,
            &mut store,
            "char.emb".into(),
            char_vocab,
            config.char_emb_dim,
        );
        let convs = config
            .char_filter_widths
            .iter()
            .map(|&width| Conv {
                width,
                w: xavier(
                    rng,
                    &mut store,
                    format!("char.conv{width}.w"),
                    width * config.char_emb_dim,
                    config.char_filters,
                ),
                b: bias_param(
                    &mut store,
                    format!("char.conv{width}.b"),
                    config.char_filters,
                    0.0,
                ),
            })
            .collect();
        let token = config.token_dim();
        let proj = config.projection_size;
        let lstm1f = lstm_group(rng, &mut store, "lstm1f", token, config.lstm1_size, proj);
        let lstm1b = lstm_group(rng, &mut store, "lstm1b", token, config.lstm1_size, proj);
        let lstm2f = lstm_group(rng, &mut store, "lstm2f", 2 * proj, config.lstm2_size, proj);
        let lstm2b = lstm_group(rng, &mut store, "lstm2b", 2 * proj, config.lstm2_size, proj);
        let mut heads = [(ParamId::default(), ParamId::default()); 5];
        for view in View::ALL {
            let width = match view {
                View::Full => config.full_view_width(),
                _ => proj,
            };
            let w = xavier(
                rng,
                &mut store,
                format!("head_{}.w", view.name()),
                width,
                config.num_tags,
            );
            let b = bias_param(
                &mut store,
                format!("head_{}.b", view.name()),
                config.num_tags,
                0.0,
            );
            heads[view.index()] = (w, b);
        }
        Ok((
            CvtModel {
                config,
                word_vocab,
                char_vocab,
                word_emb,
                char_emb,
                convs,
                lstm1f,
                lstm1b,
                lstm2f,
                lstm2b,
                heads,
            },
            store,
        ))
    }

    /// Replace the word embedding table with pretrained vectors.
    pub fn set_word_embeddings<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        emb: &corpus::EmbeddingMatrix,
    ) -> Result<(), EncoderError> {
        let rows = emb.rows.len() / emb.dim.max(1);
        if emb.dim != self.config.word_dim || rows != self.word_vocab {
            return Err(EncoderError::Config(format!(
                "embedding matrix {}x{} does not fit model {}x{}",
                rows, emb.dim, self.word_vocab, self.config.word_dim
            )));
        }
        let data: Vec<T> = emb.rows.iter().map(|&x| T::from_f64(x)).collect();
        store.set_value(self.word_emb, Tensor::new(vec![rows, emb.dim], data)?)?;
        Ok(())
    }

    pub fn lstm_params(&self, layer: usize, backward: bool) -> &LstmParams {
        match (layer, backward) {
            (1, false) => &self.lstm1f,
            (1, true) => &self.lstm1b,
            (2, false) => &self.lstm2f,
            (2, true) => &self.lstm2b,
            _ => panic!("layer must be 1 or 2"),
        }
    }

    pub fn head(&self, view: View) -> (ParamId, ParamId) {
        self.heads[view.index()]
    }

    /// Token representations `[size·t_max × token_dim]`: pretrained word
    /// vector concatenated with relu char convolutions max-pooled over
    /// time, one block per filter width. Char sequences are re-padded so
    /// every filter width yields at least one window. Dropout only in
    /// train mode.
    pub fn embed_tokens<T: Real, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        batch: &Batch,
        dropout: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var, EncoderError> {
        if let Some(&id) = batch.words.iter().find(|&&id| id >= self.word_vocab) {
            return Err(EncoderError::TokenIdOutOfRange {
                kind: "word",
                id,
                vocab: self.word_vocab,
            });
        }
        if let Some(&id) = batch.chars.iter().find(|&&id| id >= self.char_vocab) {
            return Err(EncoderError::TokenIdOutOfRange {
                kind: "char",
                id,
                vocab: self.char_vocab,
            });
        }
        let we = tape.param(store, self.word_emb);
        let word_vecs = tape.gather_rows(we, &batch.words)?;

        let max_width = *self.config.char_filter_widths.iter().max().expect("widths");
        let c_eff = batch.c_max.max(max_width);
        let n_words = batch.size * batch.t_max;
        let mut char_ids = Vec::with_capacity(n_words * c_eff);
        for w in 0..n_words {
            char_ids.extend_from_slice(&batch.chars[w * batch.c_max..(w + 1) * batch.c_max]);
            char_ids.extend(std::iter::repeat_n(corpus::PAD_ID, c_eff - batch.c_max));
        }
        let ce = tape.param(store, self.char_emb);
        let char_vecs = tape.gather_rows(ce, &char_ids)?;

        let mut parts = vec![word_vecs];
        for conv in &self.convs {
            let windows = tape.im2col(char_vecs, n_words, c_eff, conv.width)?;
            let w = tape.param(store, conv.w);
            let b = tape.param(store, conv.b);
            let z = tape.matmul(windows, w)?;
            let z = tape.add_bias(z, b)?;
            let z = tape.relu(z)?;
            parts.push(tape.max_over_time(z, c_eff - conv.width + 1)?);
        }
        let reps = tape.concat_cols(&parts)?;
        match mode {
            Mode::Train => Ok(tape.dropout(reps, dropout, rng)?),
            Mode::Eval => Ok(reps),
        }
    }

    /// Run both layers over a batch. Layer 2 consumes the concatenation of
    /// layer-1 directions; states at padded positions are forced to zero
    /// each step, which also stops recurrence from crossing sentence
    /// boundaries within the padded region.
    pub fn encode<T: Real, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        batch: &Batch,
        dropout: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<EncoderStates, EncoderError> {
        let reps = self.embed_tokens(tape, store, batch, dropout, mode, rng)?;
        let h1_fwd = run_lstm(tape, store, &self.lstm1f, reps, batch, false)?;
        let h1_bwd = run_lstm(tape, store, &self.lstm1b, reps, batch, true)?;
        let reps2 = tape.concat_cols(&[h1_fwd, h1_bwd])?;
        let h2f = run_lstm(tape, store, &self.lstm2f, reps2, batch, false)?;
        let h2b = run_lstm(tape, store, &self.lstm2b, reps2, batch, true)?;
        let h2 = tape.concat_cols(&[h2f, h2b])?;
        Ok(EncoderStates {
            h1_fwd,
            h1_bwd,
            h2,
            size: batch.size,
            t_max: batch.t_max,
            mask: batch.mask.clone(),
        })
    }

    /// The state each view is allowed to see, per token.
    pub fn view_input<T: Real>(
        &self,
        tape: &mut Tape<T>,
        states: &EncoderStates,
        view: View,
    ) -> Result<Var, EncoderError> {
        let v = match view {
            View::Full => tape.concat_cols(&[states.h1_fwd, states.h1_bwd, states.h2])?,
            View::Fwd => states.h1_fwd,
            View::Bwd => states.h1_bwd,
            // future sees only strictly-left context: h1_fwd[t-1], zero at
            // t=0; past mirrors it on the right.
            View::Future => shift(tape, states.h1_fwd, states.size, states.t_max, true)?,
            View::Past => shift(tape, states.h1_bwd, states.size, states.t_max, false)?,
        };
        Ok(v)
    }

    /// Per-token tag logits for one view's head, with head-input dropout
    /// in train mode.
    pub fn view_logits<T: Real, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        states: &EncoderStates,
        view: View,
        dropout: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var, EncoderError> {
        let mut input = self.view_input(tape, states, view)?;
        if mode == Mode::Train {
            input = tape.dropout(input, dropout, rng)?;
        }
        let (wid, bid) = self.heads[view.index()];
        let w = tape.param(store, wid);
        let b = tape.param(store, bid);
        let z = tape.matmul(input, w)?;
        Ok(tape.add_bias(z, b)?)
    }

    /// Per-token tag distributions (softmax over the view's logits).
    pub fn predict<T: Real, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        states: &EncoderStates,
        view: View,
        dropout: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var, EncoderError> {
        let z = self.view_logits(tape, store, states, view, dropout, mode, rng)?;
        Ok(tape.softmax(z)?)
    }
}

/// Standard LSTM cell over one step: gates i,f,o = sigmoid, candidate g =
/// tanh, c = f∘c_prev + i∘g, h = o∘tanh(c), projected when the cell size
/// differs from the output size.
pub fn lstm_cell<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &LstmParams,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var), EncoderError> {
    let pre = |tape: &mut Tape<T>, g: usize| -> Result<Var, EncoderError> {
        let wx = tape.param(store, p.wx[g]);
        let wh = tape.param(store, p.wh[g]);
        let b = tape.param(store, p.bias[g]);
        let xs = tape.matmul(x, wx)?;
        let hs = tape.matmul(h_prev, wh)?;
        let s = tape.add(xs, hs)?;
        Ok(tape.add_bias(s, b)?)
    };
    let zi = pre(tape, 0)?;
    let i = tape.sigmoid(zi)?;
    let zf = pre(tape, 1)?;
    let f = tape.sigmoid(zf)?;
    let zo = pre(tape, 2)?;
    let o = tape.sigmoid(zo)?;
    let zg = pre(tape, 3)?;
    let g = tape.tanh(zg)?;
    let fc = tape.mul(f, c_prev)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c)?;
    let h_pre = tape.mul(o, tc)?;
    let h = match p.proj {
        Some(pid) => {
            let w = tape.param(store, pid);
            tape.matmul(h_pre, w)?
        }
        None => h_pre,
    };
    Ok((h, c))
}

/// One direction over all steps; returns per-token states `[size·t_max ×
/// out]` in row order `b·t_max + t`.
fn run_lstm<T: Real>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    p: &LstmParams,
    tokens: Var,
    batch: &Batch,
    reverse: bool,
) -> Result<Var, EncoderError> {
    let (bsz, t_max) = (batch.size, batch.t_max);
    let mut h = tape.constant(Tensor::zeros(vec![bsz, p.out]));
    let mut c = tape.constant(Tensor::zeros(vec![bsz, p.cell]));
    let mut per_step: Vec<Option<Var>> = vec![None; t_max];
    let order: Vec<usize> = if reverse {
        (0..t_max).rev().collect()
    } else {
        (0..t_max).collect()
    };
    for t in order {
        let idx: Vec<usize> = (0..bsz).map(|b| b * t_max + t).collect();
        let x = tape.gather_rows(tokens, &idx)?;
        let (nh, nc) = lstm_cell(tape, store, p, x, h, c)?;
        let factors: Vec<T> = (0..bsz)
            .map(|b| T::from_f64(batch.mask[b * t_max + t] as f64))
            .collect();
        h = tape.scale_rows(nh, &factors)?;
        c = tape.scale_rows(nc, &factors)?;
        per_step[t] = Some(h);
    }
    let hs: Vec<Var> = per_step.into_iter().map(|v| v.expect("all steps run")).collect();
    let stacked = tape.concat_rows(&hs)?; // row t·bsz + b
    let perm: Vec<usize> = (0..bsz * t_max)
        .map(|i| (i % t_max) * bsz + i / t_max)
        .collect();
    Ok(tape.gather_rows(stacked, &perm)?)
}

/// Within-sentence step shift. `future` reads the previous step (zero at
/// t=0); otherwise the next step (zero at t=t_max-1).
fn shift<T: Real>(
    tape: &mut Tape<T>,
    h: Var,
    size: usize,
    t_max: usize,
    future: bool,
) -> Result<Var, EncoderError> {
    let cols = tape.value(h).cols();
    let zero = tape.constant(Tensor::zeros(vec![1, cols]));
    let ext = tape.concat_rows(&[h, zero])?;
    let zrow = size * t_max;
    let idx: Vec<usize> = (0..size * t_max)
        .map(|i| {
            let t = i % t_max;
            if future {
                if t == 0 {
                    zrow
                } else {
                    i - 1
                }
            } else if t + 1 == t_max {
                zrow
            } else {
                i + 1
            }
        })
        .collect();
    Ok(tape.gather_rows(ext, &idx)?)
}
