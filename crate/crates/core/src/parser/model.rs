//! Parameters, token encoding, greedy decoding and per-sentence gradients.
//!
//! Parameters are stored as `f32`; every computation runs in `f64`.

use std::collections::HashMap;

use rand::Rng;

use crate::conllu::{Sentence, Token};
use crate::error::{Error, Result};
use crate::parser::config::{ParserConfig, N_SLOTS};
use crate::parser::transition::{n_actions, Action, State, TransitionSystem};
use crate::parser::ParseResult;
use crate::weights::WeightVector;

pub const UNK: usize = 0;
pub const ROOT_WORD: usize = 1;
pub const PAD_WORD: usize = 2;
const RESERVED_WORDS: [&str; 3] = ["<unk>", "<root>", "<pad>"];

/// An injective string-to-row mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(items: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.clone(), i).is_some() {
                return Err(Error::ModelFormat(format!("duplicate vocabulary entry {item:?}")));
            }
        }
        Ok(Vocab { items, index })
    }

    pub(crate) fn with_reserved_words(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut items: Vec<String> = RESERVED_WORDS.iter().map(|s| s.to_string()).collect();
        items.extend(words.into_iter().filter(|w| !RESERVED_WORDS.contains(&w.as_str())));
        Vocab::new(items)
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// All trainable tensors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub word: Vec<T>,
    pub chars: Vec<T>,
    pub fwd_x: Vec<T>,
    pub fwd_h: Vec<T>,
    pub fwd_b: Vec<T>,
    pub bwd_x: Vec<T>,
    pub bwd_h: Vec<T>,
    pub bwd_b: Vec<T>,
    pub tb: Vec<T>,
    pub hidden_w: Vec<T>,
    pub hidden_b: Vec<T>,
    pub out_w: Vec<T>,
    pub out_b: Vec<T>,
}

impl<T> Params<T> {
    pub const NAMES: [&'static str; 13] = [
        "word", "chars", "fwd_x", "fwd_h", "fwd_b", "bwd_x", "bwd_h", "bwd_b", "tb", "hidden_w", "hidden_b", "out_w",
        "out_b",
    ];

    pub fn tensors(&self) -> [&Vec<T>; 13] {
        [
            &self.word,
            &self.chars,
            &self.fwd_x,
            &self.fwd_h,
            &self.fwd_b,
            &self.bwd_x,
            &self.bwd_h,
            &self.bwd_b,
            &self.tb,
            &self.hidden_w,
            &self.hidden_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 13] {
        [
            &mut self.word,
            &mut self.chars,
            &mut self.fwd_x,
            &mut self.fwd_h,
            &mut self.fwd_b,
            &mut self.bwd_x,
            &mut self.bwd_h,
            &mut self.bwd_b,
            &mut self.tb,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }
}

impl Params<f64> {
    pub fn zeros_like<U>(other: &Params<U>) -> Self {
        let t = other.tensors();
        let z = |i: usize| vec![0.0; t[i].len()];
        Params {
            word: z(0),
            chars: z(1),
            fwd_x: z(2),
            fwd_h: z(3),
            fwd_b: z(4),
            bwd_x: z(5),
            bwd_h: z(6),
            bwd_b: z(7),
            tb: z(8),
            hidden_w: z(9),
            hidden_b: z(10),
            out_w: z(11),
            out_b: z(12),
        }
    }

    pub fn clear(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// A trained multi-treebank parser.
#[derive(Clone, Debug, PartialEq)]
pub struct ParserModel {
    pub config: ParserConfig,
    pub treebanks: Vec<String>,
    pub words: Vocab,
    pub chars: Vocab,
    pub labels: Vocab,
    pub params: Params<f32>,
}

/// Hidden states of one character-encoder direction, `h_0..h_k`.
struct RnnTrace {
    states: Vec<Vec<f64>>,
}

/// Tensor shapes implied by a configuration and vocabulary sizes.
pub(crate) fn shapes(config: &ParserConfig, n_words: usize, n_chars: usize, m: usize, n_labels: usize) -> [Vec<usize>; 13] {
    let r = config.rnn_dim;
    let c = config.char_dim;
    [
        vec![n_words, config.word_dim],
        vec![n_chars, c],
        vec![r, c],
        vec![r, r],
        vec![r],
        vec![r, c],
        vec![r, r],
        vec![r],
        vec![m, config.tb_dim],
        vec![config.hidden, N_SLOTS * config.token_dim()],
        vec![config.hidden],
        vec![n_actions(n_labels), config.hidden],
        vec![n_actions(n_labels)],
    ]
}

/// A sentence encoded up to the treebank-vector-independent projections.
pub struct PreparedSentence {
    n: usize,
    /// `(n + 2) × N_SLOTS × hidden`: items are tokens, root, padding.
    proj: Vec<f64>,
}

impl ParserModel {
    /// A freshly initialised model.
    pub fn initialize<R: Rng>(
        config: ParserConfig,
        treebanks: Vec<String>,
        words: Vocab,
        chars: Vocab,
        labels: Vocab,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if treebanks.is_empty() {
            return Err(Error::Config("at least one treebank is required".into()));
        }
        let shapes = shapes(&config, words.len(), chars.len(), treebanks.len(), labels.len());
        let e = config.embedding_init;
        let embed = |shape: &[usize], rng: &mut R| -> Vec<f32> {
            (0..shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-e..e) as f32)
                .collect()
        };
        let glorot = |shape: &[usize], rng: &mut R| -> Vec<f32> {
            let a = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            (0..shape[0] * shape[1]).map(|_| rng.gen_range(-a..a) as f32).collect()
        };
        let zeros = |shape: &[usize]| vec![0.0f32; shape.iter().product()];
        let params = Params {
            word: embed(&shapes[0], rng),
            chars: embed(&shapes[1], rng),
            fwd_x: glorot(&shapes[2], rng),
            fwd_h: glorot(&shapes[3], rng),
            fwd_b: zeros(&shapes[4]),
            bwd_x: glorot(&shapes[5], rng),
            bwd_h: glorot(&shapes[6], rng),
            bwd_b: zeros(&shapes[7]),
            tb: embed(&shapes[8], rng),
            hidden_w: glorot(&shapes[9], rng),
            hidden_b: zeros(&shapes[10]),
            out_w: glorot(&shapes[11], rng),
            out_b: zeros(&shapes[12]),
        };
        Ok(ParserModel {
            config,
            treebanks,
            words,
            chars,
            labels,
            params,
        })
    }

    /// Number of training treebanks.
    pub fn m(&self) -> usize {
        self.treebanks.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn system(&self) -> TransitionSystem {
        self.config.system
    }

    /// Row `t` (1-based) of the treebank embedding table.
    pub fn tb_row(&self, t: usize) -> Result<Vec<f64>> {
        if t == 0 || t > self.m() {
            return Err(Error::TreebankOutOfRange { index: t, m: self.m() });
        }
        let d = self.config.tb_dim;
        Ok(self.params.tb[(t - 1) * d..t * d].iter().map(|&x| x as f64).collect())
    }

    /// `Σ_t α_t · e_3(t)`, without renormalisation.
    pub fn interpolate_tbvec(&self, weights: &WeightVector) -> Result<Vec<f64>> {
        if weights.m() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: weights.m(),
            });
        }
        let d = self.config.tb_dim;
        let mut out = vec![0.0; d];
        for (row, &alpha) in self.params.tb.chunks_exact(d).zip(weights.alphas()) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += alpha * x as f64;
            }
        }
        Ok(out)
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.words.get(form).unwrap_or(UNK)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        let mut buf = [0u8; 4];
        form.chars()
            .map(|c| self.chars.get(c.encode_utf8(&mut buf)).unwrap_or(UNK))
            .collect()
    }

    /// Concatenation of the word embedding, the final forward and backward
    /// character-encoder states, and `tbvec`.
    pub fn encode_token(&self, token: &Token, tbvec: &[f64]) -> Result<Vec<f64>> {
        if tbvec.len() != self.config.tb_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.tb_dim,
                found: tbvec.len(),
            });
        }
        let (mut lexical, _) = self.lexical(self.word_id(&token.form), &self.char_ids(&token.form), false);
        lexical.extend_from_slice(tbvec);
        Ok(lexical)
    }

    fn word_row(&self, id: usize) -> &[f32] {
        let d = self.config.word_dim;
        &self.params.word[id * d..(id + 1) * d]
    }

    fn char_row(&self, id: usize) -> &[f32] {
        let d = self.config.char_dim;
        &self.params.chars[id * d..(id + 1) * d]
    }

    fn run_rnn(&self, wx: &[f32], wh: &[f32], b: &[f32], chars: impl Iterator<Item = usize>) -> RnnTrace {
        let r = self.config.rnn_dim;
        let c = self.config.char_dim;
        let mut states = vec![vec![0.0; r]];
        for id in chars {
            let x = self.char_row(id);
            let prev = states.last().expect("initial state");
            let mut next = Vec::with_capacity(r);
            for i in 0..r {
                let mut acc = b[i] as f64;
                let wxi = &wx[i * c..(i + 1) * c];
                for j in 0..c {
                    acc += wxi[j] as f64 * x[j] as f64;
                }
                let whi = &wh[i * r..(i + 1) * r];
                for j in 0..r {
                    acc += whi[j] as f64 * prev[j];
                }
                next.push(acc.tanh());
            }
            states.push(next);
        }
        RnnTrace { states }
    }

    /// Word embedding plus character-encoder output; optionally the traces
    /// needed for backpropagation.
    fn lexical(&self, word: usize, chars: &[usize], keep: bool) -> (Vec<f64>, Option<(RnnTrace, RnnTrace)>) {
        let p = &self.params;
        let fwd = self.run_rnn(&p.fwd_x, &p.fwd_h, &p.fwd_b, chars.iter().copied());
        let bwd = self.run_rnn(&p.bwd_x, &p.bwd_h, &p.bwd_b, chars.iter().rev().copied());
        let mut out: Vec<f64> = self.word_row(word).iter().map(|&x| x as f64).collect();
        out.extend_from_slice(fwd.states.last().expect("non-empty trace"));
        out.extend_from_slice(bwd.states.last().expect("non-empty trace"));
        (out, keep.then_some((fwd, bwd)))
    }

    fn special_lexical(&self, word: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.word_row(word).iter().map(|&x| x as f64).collect();
        out.resize(self.config.lexical_dim(), 0.0);
        out
    }

    /// `W_slot[:, lexical] · x` for every slot, appended to `proj`.
    fn project_lexical(&self, x: &[f64], proj: &mut Vec<f64>) {
        let h = self.config.hidden;
        let f = self.config.token_dim();
        let l = self.config.lexical_dim();
        let w = &self.params.hidden_w;
        let row_len = N_SLOTS * f;
        for slot in 0..N_SLOTS {
            for unit in 0..h {
                let row = &w[unit * row_len + slot * f..unit * row_len + slot * f + l];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(x) {
                    acc += *a as f64 * b;
                }
                proj.push(acc);
            }
        }
    }

    /// `W_slot[:, tb] · tbvec` for every slot (`N_SLOTS × hidden`).
    fn project_tbvec(&self, tbvec: &[f64]) -> Vec<f64> {
        let h = self.config.hidden;
        let f = self.config.token_dim();
        let l = self.config.lexical_dim();
        let w = &self.params.hidden_w;
        let row_len = N_SLOTS * f;
        let mut out = Vec::with_capacity(N_SLOTS * h);
        for slot in 0..N_SLOTS {
            for unit in 0..h {
                let row = &w[unit * row_len + slot * f + l..unit * row_len + (slot + 1) * f];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(tbvec) {
                    acc += *a as f64 * b;
                }
                out.push(acc);
            }
        }
        out
    }

    fn prepare_ids(&self, words: &[usize], chars: &[Vec<usize>]) -> PreparedSentence {
        let n = words.len();
        let mut proj = Vec::with_capacity((n + 2) * N_SLOTS * self.config.hidden);
        for (w, c) in words.iter().zip(chars) {
            let (x, _) = self.lexical(*w, c, false);
            self.project_lexical(&x, &mut proj);
        }
        self.project_lexical(&self.special_lexical(ROOT_WORD), &mut proj);
        self.project_lexical(&self.special_lexical(PAD_WORD), &mut proj);
        PreparedSentence { n, proj }
    }

    /// Encodes a sentence once so it can be decoded under many weight vectors.
    pub fn prepare(&self, sentence: &Sentence) -> PreparedSentence {
        let words: Vec<usize> = sentence.forms().map(|f| self.word_id(f)).collect();
        let chars: Vec<Vec<usize>> = sentence.forms().map(|f| self.char_ids(f)).collect();
        self.prepare_ids(&words, &chars)
    }

    /// Items filling the feature slots; `n + 1` is padding.
    fn slot_items(state: &State, n: usize) -> [usize; N_SLOTS] {
        let pad = n + 1;
        let s0 = state.stack_item(0);
        let b0 = state.buffer_front();
        [
            s0.unwrap_or(pad),
            state.stack_item(1).unwrap_or(pad),
            state.stack_item(2).unwrap_or(pad),
            b0.unwrap_or(pad),
            s0.and_then(|s| state.leftmost_child(s)).unwrap_or(pad),
            b0.and_then(|b| state.leftmost_child(b)).unwrap_or(pad),
        ]
    }

    fn hidden_pre(&self, prepared: &PreparedSentence, tbproj: &[f64], items: &[usize; N_SLOTS]) -> Vec<f64> {
        let h = self.config.hidden;
        let pad = prepared.n + 1;
        let mut pre: Vec<f64> = self.params.hidden_b.iter().map(|&b| b as f64).collect();
        for (slot, &item) in items.iter().enumerate() {
            let base = (item * N_SLOTS + slot) * h;
            let p = &prepared.proj[base..base + h];
            for (acc, v) in pre.iter_mut().zip(p) {
                *acc += v;
            }
            if item != pad {
                for (acc, v) in pre.iter_mut().zip(&tbproj[slot * h..(slot + 1) * h]) {
                    *acc += v;
                }
            }
        }
        pre
    }

    fn scores(&self, hidden: &[f64]) -> Vec<f64> {
        let h = self.config.hidden;
        let w = &self.params.out_w;
        self.params
            .out_b
            .iter()
            .enumerate()
            .map(|(a, &b)| {
                let row = &w[a * h..(a + 1) * h];
                let mut acc = b as f64;
                for (x, y) in row.iter().zip(hidden) {
                    acc += *x as f64 * y;
                }
                acc
            })
            .collect()
    }

    /// Greedy decoding with an explicit treebank vector.
    pub fn parse_with_tbvec(&self, prepared: &PreparedSentence, tbvec: &[f64]) -> Result<ParseResult> {
        if tbvec.len() != self.config.tb_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.tb_dim,
                found: tbvec.len(),
            });
        }
        let n = prepared.n;
        let n_labels = self.n_labels();
        let system = self.system();
        let tbproj = self.project_tbvec(tbvec);
        let mut state = State::new(n);
        while !state.is_terminal() {
            let items = Self::slot_items(&state, n);
            let hidden: Vec<f64> = self.hidden_pre(prepared, &tbproj, &items).into_iter().map(f64::tanh).collect();
            let scores = self.scores(&hidden);
            let mut best: Option<(Action, f64)> = None;
            for (index, &score) in scores.iter().enumerate() {
                let action = Action::from_index(index, n_labels);
                if !state.is_legal(system, action) {
                    continue;
                }
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((action, score));
                }
            }
            let (action, _) = best.expect("a non-terminal state always has a legal action");
            state.apply(system, action);
        }
        let heads = state
            .heads
            .iter()
            .map(|h| match h.expect("complete tree") {
                h if h == n => 0,
                h => h + 1,
            })
            .collect();
        let deprels = state
            .labels
            .iter()
            .map(|l| self.labels.items()[l.expect("complete tree")].clone())
            .collect();
        Ok(ParseResult { heads, deprels })
    }

    pub fn parse_prepared(&self, prepared: &PreparedSentence, weights: &WeightVector) -> Result<ParseResult> {
        let tbvec = self.interpolate_tbvec(weights)?;
        self.parse_with_tbvec(prepared, &tbvec)
    }

    /// Parses with the interpolated treebank vector for `weights`.
    pub fn parse(&self, sentence: &Sentence, weights: &WeightVector) -> Result<ParseResult> {
        self.parse_prepared(&self.prepare(sentence), weights)
    }

    /// Cross-entropy loss of the oracle action sequence and its gradient,
    /// accumulated into `grads`.
    pub(crate) fn sentence_gradient(
        &self,
        words: &[usize],
        chars: &[Vec<usize>],
        treebank: usize,
        actions: &[Action],
        grads: &mut Params<f64>,
    ) -> f64 {
        let cfg = &self.config;
        let (h, f, l, wd, r) = (cfg.hidden, cfg.token_dim(), cfg.lexical_dim(), cfg.word_dim, cfg.rnn_dim);
        let row_len = N_SLOTS * f;
        let n = words.len();
        let pad = n + 1;
        let n_labels = self.n_labels();
        let system = self.system();

        // Forward through the lexical encoders, keeping traces.
        let mut lexical = Vec::with_capacity(n + 2);
        let mut traces = Vec::with_capacity(n);
        let mut proj = Vec::with_capacity((n + 2) * N_SLOTS * h);
        for (w, c) in words.iter().zip(chars) {
            let (x, trace) = self.lexical(*w, c, true);
            self.project_lexical(&x, &mut proj);
            lexical.push(x);
            traces.push(trace.expect("trace requested"));
        }
        for special in [ROOT_WORD, PAD_WORD] {
            let x = self.special_lexical(special);
            self.project_lexical(&x, &mut proj);
            lexical.push(x);
        }
        let prepared = PreparedSentence { n, proj };
        let tbvec = self.tb_row(treebank).expect("treebank id checked by caller");
        let tbproj = self.project_tbvec(&tbvec);

        // Transitions: accumulate d(pre) per (item, slot).
        let mut slot_grads = vec![0.0; (n + 2) * N_SLOTS * h];
        let mut used = vec![false; (n + 2) * N_SLOTS];
        let mut loss = 0.0;
        let mut state = State::new(n);
        for &action in actions {
            let items = Self::slot_items(&state, n);
            let hidden: Vec<f64> = self.hidden_pre(&prepared, &tbproj, &items).into_iter().map(f64::tanh).collect();
            let scores = self.scores(&hidden);
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exp.iter().sum();
            let gold = action.index(n_labels);
            loss += z.ln() + max - scores[gold];

            let mut d_hidden = vec![0.0; h];
            for (a, e) in exp.iter().enumerate() {
                let d = e / z - if a == gold { 1.0 } else { 0.0 };
                grads.out_b[a] += d;
                let w_row = &self.params.out_w[a * h..(a + 1) * h];
                let g_row = &mut grads.out_w[a * h..(a + 1) * h];
                for k in 0..h {
                    g_row[k] += d * hidden[k];
                    d_hidden[k] += d * w_row[k] as f64;
                }
            }
            let d_pre: Vec<f64> = d_hidden
                .iter()
                .zip(&hidden)
                .map(|(d, y)| d * (1.0 - y * y))
                .collect();
            for (g, d) in grads.hidden_b.iter_mut().zip(&d_pre) {
                *g += d;
            }
            for (slot, &item) in items.iter().enumerate() {
                let key = item * N_SLOTS + slot;
                used[key] = true;
                for (g, d) in slot_grads[key * h..(key + 1) * h].iter_mut().zip(&d_pre) {
                    *g += d;
                }
            }
            state.apply(system, action);
        }

        // Hidden layer weights and input gradients.
        let mut d_lexical = vec![vec![0.0; l]; n + 2];
        let mut d_tb = vec![0.0; cfg.tb_dim];
        for item in 0..n + 2 {
            for slot in 0..N_SLOTS {
                let key = item * N_SLOTS + slot;
                if !used[key] {
                    continue;
                }
                let g = &slot_grads[key * h..(key + 1) * h];
                let x = &lexical[item];
                for (unit, &gu) in g.iter().enumerate() {
                    if gu == 0.0 {
                        continue;
                    }
                    let start = unit * row_len + slot * f;
                    let w_row = &self.params.hidden_w[start..start + f];
                    let g_row = &mut grads.hidden_w[start..start + f];
                    for j in 0..l {
                        g_row[j] += gu * x[j];
                        d_lexical[item][j] += gu * w_row[j] as f64;
                    }
                    if item != pad {
                        for j in 0..cfg.tb_dim {
                            g_row[l + j] += gu * tbvec[j];
                            d_tb[j] += gu * w_row[l + j] as f64;
                        }
                    }
                }
            }
        }
        let d = cfg.tb_dim;
        for (g, v) in grads.tb[(treebank - 1) * d..treebank * d].iter_mut().zip(&d_tb) {
            *g += v;
        }

        // Embedding rows and character encoder.
        let word_ids = words.iter().copied().chain([ROOT_WORD, PAD_WORD]);
        for (item, word) in word_ids.enumerate() {
            for (g, v) in grads.word[word * wd..(word + 1) * wd].iter_mut().zip(&d_lexical[item][..wd]) {
                *g += v;
            }
        }
        for (item, (fwd, bwd)) in traces.iter().enumerate() {
            let ids = &chars[item];
            let d_fwd = &d_lexical[item][wd..wd + r];
            let d_bwd = &d_lexical[item][wd + r..wd + 2 * r];
            self.rnn_backward(fwd, ids.iter().copied(), d_fwd, Direction::Forward, grads);
            self.rnn_backward(bwd, ids.iter().rev().copied(), d_bwd, Direction::Backward, grads);
        }
        loss
    }

    fn rnn_backward(
        &self,
        trace: &RnnTrace,
        chars: impl DoubleEndedIterator<Item = usize>,
        d_final: &[f64],
        direction: Direction,
        grads: &mut Params<f64>,
    ) {
        let (r, c) = (self.config.rnn_dim, self.config.char_dim);
        let p = &self.params;
        let (wx, wh) = match direction {
            Direction::Forward => (&p.fwd_x, &p.fwd_h),
            Direction::Backward => (&p.bwd_x, &p.bwd_h),
        };
        let ids: Vec<usize> = chars.collect();
        let mut dh = d_final.to_vec();
        for t in (1..trace.states.len()).rev() {
            let h_t = &trace.states[t];
            let h_prev = &trace.states[t - 1];
            let d_pre: Vec<f64> = dh.iter().zip(h_t).map(|(d, y)| d * (1.0 - y * y)).collect();
            let x = self.char_row(ids[t - 1]);
            let mut d_x = vec![0.0; c];
            let mut d_prev = vec![0.0; r];
            {
                let (gx, gh, gb) = match direction {
                    Direction::Forward => (&mut grads.fwd_x, &mut grads.fwd_h, &mut grads.fwd_b),
                    Direction::Backward => (&mut grads.bwd_x, &mut grads.bwd_h, &mut grads.bwd_b),
                };
                for i in 0..r {
                    let di = d_pre[i];
                    gb[i] += di;
                    for j in 0..c {
                        gx[i * c + j] += di * x[j] as f64;
                        d_x[j] += di * wx[i * c + j] as f64;
                    }
                    for j in 0..r {
                        gh[i * r + j] += di * h_prev[j];
                        d_prev[j] += di * wh[i * r + j] as f64;
                    }
                }
            }
            let id = ids[t - 1];
            for (g, v) in grads.chars[id * c..(id + 1) * c].iter_mut().zip(&d_x) {
                *g += v;
            }
            dh = d_prev;
        }
    }

    /// Plain SGD step: `p ← p − lr · g`.
    pub(crate) fn apply_gradient(&mut self, grads: &Params<f64>, learning_rate: f64) {
        for (p, g) in self.params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (x, d) in p.iter_mut().zip(g) {
                if *d != 0.0 {
                    *x = (*x as f64 - learning_rate * d) as f32;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}
