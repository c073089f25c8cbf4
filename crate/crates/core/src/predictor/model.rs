//! Micro-transformer forecaster.
//!
//! Past feature vectors are embedded with a linear layer plus a learned
//! position table, `horizon` learnable query tokens are appended, and the
//! sequence runs through pre-norm blocks of bidirectional multi-head
//! attention and a GELU feed-forward layer. The query positions are read out
//! through a final layer norm and a linear head. Query and value projections
//! carry LoRA pairs: `W_eff = W + alpha * A * B`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{add_row_bias, gelu, layer_norm, matmul, matmul_a_bt_into, matmul_into};
use crate::channel::stream_rng;
use crate::error::{bail, Result};

const INIT_STREAM: u64 = 7;

/// Hyper-parameters of a [`MicroModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Feature dimension `D` of each time step.
    pub d_in: usize,
    /// Model width `D_h`.
    pub width: usize,
    pub heads: usize,
    pub blocks: usize,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    /// Past window length `N`.
    pub past: usize,
    /// Forecast horizon `M`.
    pub horizon: usize,
    /// Feed-forward expansion factor.
    pub ffn_mult: usize,
}

impl ModelConfig {
    pub fn new(d_in: usize, past: usize, horizon: usize) -> Self {
        ModelConfig {
            d_in,
            width: 64,
            heads: 4,
            blocks: 2,
            lora_rank: 8,
            lora_alpha: 1.0,
            past,
            horizon,
            ffn_mult: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.width == 0 || self.heads == 0 || self.past == 0 || self.horizon == 0 {
            bail!(Config, "model dimensions must be positive");
        }
        if !self.width.is_multiple_of(self.heads) {
            bail!(Config, "width {} not divisible by heads {}", self.width, self.heads);
        }
        if self.lora_rank == 0 || self.lora_rank > self.width {
            bail!(Config, "lora rank must lie in 1..=width");
        }
        if self.ffn_mult == 0 {
            bail!(Config, "ffn_mult must be positive");
        }
        if !self.lora_alpha.is_finite() {
            bail!(Config, "lora alpha must be finite");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    pub fn tokens(&self) -> usize {
        self.past + self.horizon
    }

    pub fn ffn_width(&self) -> usize {
        self.ffn_mult * self.width
    }
}

/// Which optimiser group a parameter tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Backbone weights, frozen during LoRA fine-tuning.
    Base,
    /// LoRA factor.
    Lora,
    /// Query tokens and output head; trainable in both modes.
    Head,
}

/// Location of one parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub group: ParamGroup,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub ln1_gain: Slot,
    pub ln1_bias: Slot,
    pub wq: Slot,
    pub wk: Slot,
    pub wv: Slot,
    pub wo: Slot,
    pub lora_q_a: Slot,
    pub lora_q_b: Slot,
    pub lora_v_a: Slot,
    pub lora_v_b: Slot,
    pub ln2_gain: Slot,
    pub ln2_bias: Slot,
    pub ff1_w: Slot,
    pub ff1_b: Slot,
    pub ff2_w: Slot,
    pub ff2_b: Slot,
}

/// Declaration order of every parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub w_in: Slot,
    pub b_in: Slot,
    pub pos: Slot,
    pub queries: Slot,
    pub blocks: Vec<BlockLayout>,
    pub lnf_gain: Slot,
    pub lnf_bias: Slot,
    pub w_out: Slot,
    pub b_out: Slot,
    pub total: usize,
}

struct SlotAlloc {
    next: usize,
    slots: Vec<Slot>,
}

impl SlotAlloc {
    fn take(&mut self, rows: usize, cols: usize, group: ParamGroup) -> Slot {
        let s = Slot {
            offset: self.next,
            rows,
            cols,
            group,
        };
        self.next += rows * cols;
        self.slots.push(s);
        s
    }
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        use ParamGroup::*;
        let w = cfg.width;
        let r = cfg.lora_rank;
        let f = cfg.ffn_width();
        let mut a = SlotAlloc {
            next: 0,
            slots: Vec::new(),
        };
        let w_in = a.take(cfg.d_in, w, Base);
        let b_in = a.take(1, w, Base);
        let pos = a.take(cfg.past, w, Base);
        let queries = a.take(cfg.horizon, w, Head);
        let blocks = (0..cfg.blocks)
            .map(|_| BlockLayout {
                ln1_gain: a.take(1, w, Base),
                ln1_bias: a.take(1, w, Base),
                wq: a.take(w, w, Base),
                wk: a.take(w, w, Base),
                wv: a.take(w, w, Base),
                wo: a.take(w, w, Base),
                lora_q_a: a.take(w, r, Lora),
                lora_q_b: a.take(r, w, Lora),
                lora_v_a: a.take(w, r, Lora),
                lora_v_b: a.take(r, w, Lora),
                ln2_gain: a.take(1, w, Base),
                ln2_bias: a.take(1, w, Base),
                ff1_w: a.take(w, f, Base),
                ff1_b: a.take(1, f, Base),
                ff2_w: a.take(f, w, Base),
                ff2_b: a.take(1, w, Base),
            })
            .collect();
        let lnf_gain = a.take(1, w, Base);
        let lnf_bias = a.take(1, w, Base);
        let w_out = a.take(w, cfg.d_in, Head);
        let b_out = a.take(1, cfg.d_in, Head);
        ParamLayout {
            w_in,
            b_in,
            pos,
            queries,
            blocks,
            lnf_gain,
            lnf_bias,
            w_out,
            b_out,
            total: a.next,
        }
    }

    /// All slots in declaration order.
    pub fn slots(&self) -> Vec<Slot> {
        let mut v = vec![self.w_in, self.b_in, self.pos, self.queries];
        for b in &self.blocks {
            v.extend_from_slice(&[
                b.ln1_gain, b.ln1_bias, b.wq, b.wk, b.wv, b.wo, b.lora_q_a, b.lora_q_b, b.lora_v_a, b.lora_v_b,
                b.ln2_gain, b.ln2_bias, b.ff1_w, b.ff1_b, b.ff2_w, b.ff2_b,
            ]);
        }
        v.extend_from_slice(&[self.lnf_gain, self.lnf_bias, self.w_out, self.b_out]);
        v
    }
}

/// Training regime, deciding which parameter groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// Everything trains.
    Full,
    /// Only LoRA pairs, query tokens and the output head train.
    #[default]
    LoraOnly,
}

impl TrainMode {
    pub fn trains(&self, group: ParamGroup) -> bool {
        match self {
            TrainMode::Full => true,
            TrainMode::LoraOnly => group != ParamGroup::Base,
        }
    }
}

/// The forecaster: hyper-parameters plus one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroModel {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
}

impl MicroModel {
    /// Random initialisation. LoRA `A` is small Gaussian and `B` is zero, so
    /// the adapted weights start equal to the base weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = stream_rng(seed, INIT_STREAM);
        let w = config.width as f64;
        let fill = |params: &mut [f64], slot: Slot, std: f64, rng: &mut dyn rand::RngCore| {
            let normal = Normal::new(0.0, std).expect("finite std");
            for v in &mut params[slot.range()] {
                *v = normal.sample(rng);
            }
        };
        let constant = |params: &mut [f64], slot: Slot, value: f64| {
            params[slot.range()].iter_mut().for_each(|v| *v = value);
        };
        fill(&mut params, layout.w_in, 1.0 / libm::sqrt(config.d_in as f64), &mut rng);
        fill(&mut params, layout.pos, 1.0, &mut rng);
        fill(&mut params, layout.queries, 1.0, &mut rng);
        for b in &layout.blocks {
            constant(&mut params, b.ln1_gain, 1.0);
            for s in [b.wq, b.wk, b.wv, b.wo] {
                fill(&mut params, s, 1.0 / libm::sqrt(w), &mut rng);
            }
            fill(&mut params, b.lora_q_a, 1.0 / libm::sqrt(w), &mut rng);
            fill(&mut params, b.lora_v_a, 1.0 / libm::sqrt(w), &mut rng);
            constant(&mut params, b.ln2_gain, 1.0);
            fill(&mut params, b.ff1_w, 1.0 / libm::sqrt(w), &mut rng);
            fill(
                &mut params,
                b.ff2_w,
                1.0 / libm::sqrt(config.ffn_width() as f64),
                &mut rng,
            );
        }
        constant(&mut params, layout.lnf_gain, 1.0);
        fill(&mut params, layout.w_out, 1.0 / libm::sqrt(w), &mut rng);
        Ok(MicroModel { config, layout, params })
    }

    /// Rebuilds a model from stored parameters.
    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            bail!(Argument, "expected {} parameters, got {}", layout.total, params.len());
        }
        Ok(MicroModel { config, layout, params })
    }

    #[inline]
    pub fn slot(&self, s: Slot) -> &[f64] {
        &self.params[s.range()]
    }

    pub fn slot_mut(&mut self, s: Slot) -> &mut [f64] {
        &mut self.params[s.range()]
    }

    pub fn trainable_count(&self, mode: TrainMode) -> usize {
        self.layout
            .slots()
            .iter()
            .filter(|s| mode.trains(s.group))
            .map(|s| s.len())
            .sum()
    }

    /// Forecast for a batch `x` of shape `batch x past x d_in`, returning
    /// `batch x horizon x d_in`.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let per = self.config.past * self.config.d_in;
        if x.len() != batch * per {
            bail!(
                Argument,
                "input length {} does not match batch {} x past {} x features {}",
                x.len(),
                batch,
                self.config.past,
                self.config.d_in
            );
        }
        let mut out = Vec::with_capacity(batch * self.config.horizon * self.config.d_in);
        for sample in x.chunks_exact(per) {
            out.extend(self.forward_cached(sample).output);
        }
        Ok(out)
    }

    /// Single-sample forward pass keeping every intermediate needed by the
    /// backward pass.
    pub(crate) fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let c = &self.config;
        let (t, w, n) = (c.tokens(), c.width, c.past);
        let l = &self.layout;

        let mut z = vec![0.0; t * w];
        matmul_into(&mut z[..n * w], x, self.slot(l.w_in), n, c.d_in, w, false);
        add_row_bias(&mut z[..n * w], self.slot(l.b_in));
        for (v, p) in z[..n * w].iter_mut().zip(self.slot(l.pos)) {
            *v += p;
        }
        z[n * w..].copy_from_slice(self.slot(l.queries));

        let mut blocks = Vec::with_capacity(c.blocks);
        for bl in &l.blocks {
            let (cache, z_next) = self.block_forward(bl, z);
            blocks.push(cache);
            z = z_next;
        }
        let (zf, lnf_hat, lnf_rstd) = layer_norm(&z, self.slot(l.lnf_gain), self.slot(l.lnf_bias));
        let pred = &zf[n * w..];
        let mut output = matmul(pred, self.slot(l.w_out), c.horizon, w, c.d_in);
        add_row_bias(&mut output, self.slot(l.b_out));
        ForwardCache {
            x: x.to_vec(),
            blocks,
            lnf_hat,
            lnf_rstd,
            zf,
            output,
        }
    }

    fn block_forward(&self, bl: &BlockLayout, z_in: Vec<f64>) -> (BlockCache, Vec<f64>) {
        let c = &self.config;
        let (t, w, f) = (c.tokens(), c.width, c.ffn_width());
        let (a, ln1_hat, ln1_rstd) = layer_norm(&z_in, self.slot(bl.ln1_gain), self.slot(bl.ln1_bias));
        let wq = lora_weight(
            self.slot(bl.wq),
            self.slot(bl.lora_q_a),
            self.slot(bl.lora_q_b),
            c.lora_alpha,
            w,
            c.lora_rank,
        );
        let wv = lora_weight(
            self.slot(bl.wv),
            self.slot(bl.lora_v_a),
            self.slot(bl.lora_v_b),
            c.lora_alpha,
            w,
            c.lora_rank,
        );
        let q = matmul(&a, &wq, t, w, w);
        let k = matmul(&a, self.slot(bl.wk), t, w, w);
        let v = matmul(&a, &wv, t, w, w);
        let (attn_out, probs) = multi_head_attention(&q, &k, &v, t, w, c.heads);

        let mut z_mid = z_in.clone();
        matmul_into(&mut z_mid, &attn_out, self.slot(bl.wo), t, w, w, true);

        let (b, ln2_hat, ln2_rstd) = layer_norm(&z_mid, self.slot(bl.ln2_gain), self.slot(bl.ln2_bias));
        let mut pre = matmul(&b, self.slot(bl.ff1_w), t, w, f);
        add_row_bias(&mut pre, self.slot(bl.ff1_b));
        let act: Vec<f64> = pre.iter().map(|&u| gelu(u)).collect();
        let mut z_out = z_mid.clone();
        matmul_into(&mut z_out, &act, self.slot(bl.ff2_w), t, f, w, true);
        add_row_bias(&mut z_out, self.slot(bl.ff2_b));

        let cache = BlockCache {
            ln1_hat,
            ln1_rstd,
            a,
            wq,
            wv,
            q,
            k,
            v,
            probs,
            attn_out,
            ln2_hat,
            ln2_rstd,
            b,
            pre,
            act,
        };
        (cache, z_out)
    }
}

pub(crate) struct BlockCache {
    pub ln1_hat: Vec<f64>,
    pub ln1_rstd: Vec<f64>,
    pub a: Vec<f64>,
    pub wq: Vec<f64>,
    pub wv: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Attention weights, `heads x t x t`.
    pub probs: Vec<f64>,
    pub attn_out: Vec<f64>,
    pub ln2_hat: Vec<f64>,
    pub ln2_rstd: Vec<f64>,
    pub b: Vec<f64>,
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
}

pub(crate) struct ForwardCache {
    pub x: Vec<f64>,
    pub blocks: Vec<BlockCache>,
    pub lnf_hat: Vec<f64>,
    pub lnf_rstd: Vec<f64>,
    pub zf: Vec<f64>,
    pub output: Vec<f64>,
}

fn lora_weight(w: &[f64], a: &[f64], b: &[f64], alpha: f64, width: usize, rank: usize) -> Vec<f64> {
    let mut out = w.to_vec();
    if alpha != 0.0 {
        let mut delta = vec![0.0; width * width];
        matmul_into(&mut delta, a, b, width, rank, width, false);
        for (o, d) in out.iter_mut().zip(delta) {
            *o += alpha * d;
        }
    }
    out
}

/// `W + alpha * A * B` for `W: rows x cols`, `A: rows x rank`, `B: rank x cols`.
pub fn lora_effective(
    w: &[f64],
    a: &[f64],
    b: &[f64],
    alpha: f64,
    rows: usize,
    cols: usize,
    rank: usize,
) -> Result<Vec<f64>> {
    if w.len() != rows * cols || a.len() != rows * rank || b.len() != rank * cols {
        bail!(
            Argument,
            "LoRA factor shapes do not match {}x{} rank {}",
            rows,
            cols,
            rank
        );
    }
    let mut out = w.to_vec();
    let ab = matmul(a, b, rows, rank, cols);
    for (o, d) in out.iter_mut().zip(ab) {
        *o += alpha * d;
    }
    Ok(out)
}

/// Numerically stable softmax of one row, in place.
fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Scaled dot-product attention `softmax(Q K^T / sqrt(d_k)) V`.
///
/// `q: tq x d_k`, `k: tk x d_k`, `v: tk x d_v`. Returns `(output, weights)`.
pub fn attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    tq: usize,
    tk: usize,
    d_k: usize,
    d_v: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if q.len() != tq * d_k || k.len() != tk * d_k || v.len() != tk * d_v || tk == 0 || d_k == 0 {
        bail!(Argument, "attention operand shapes do not agree");
    }
    if q.iter().chain(k).chain(v).any(|x| !x.is_finite()) {
        bail!(Numerical, "non-finite attention input");
    }
    Ok(attention_unchecked(q, k, v, tq, tk, d_k, d_v))
}

fn attention_unchecked(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    tq: usize,
    tk: usize,
    d_k: usize,
    d_v: usize,
) -> (Vec<f64>, Vec<f64>) {
    let scale = 1.0 / libm::sqrt(d_k as f64);
    let mut weights = vec![0.0; tq * tk];
    matmul_a_bt_into(&mut weights, q, k, tq, d_k, tk, false);
    for row in weights.chunks_exact_mut(tk) {
        row.iter_mut().for_each(|s| *s *= scale);
        softmax_in_place(row);
    }
    let out = matmul(&weights, v, tq, tk, d_v);
    (out, weights)
}

/// Splits `x: t x width` into head `h` of width `d`.
pub(crate) fn head_slice(x: &[f64], t: usize, width: usize, h: usize, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t * d);
    for r in 0..t {
        out.extend_from_slice(&x[r * width + h * d..r * width + (h + 1) * d]);
    }
    out
}

fn multi_head_attention(q: &[f64], k: &[f64], v: &[f64], t: usize, width: usize, heads: usize) -> (Vec<f64>, Vec<f64>) {
    let d = width / heads;
    let mut out = vec![0.0; t * width];
    let mut probs = Vec::with_capacity(heads * t * t);
    for h in 0..heads {
        let qh = head_slice(q, t, width, h, d);
        let kh = head_slice(k, t, width, h, d);
        let vh = head_slice(v, t, width, h, d);
        let (oh, ph) = attention_unchecked(&qh, &kh, &vh, t, t, d, d);
        for r in 0..t {
            out[r * width + h * d..r * width + (h + 1) * d].copy_from_slice(&oh[r * d..(r + 1) * d]);
        }
        probs.extend(ph);
    }
    (out, probs)
}

/// `sum (y_hat - y)^2 / (sum y^2 + eps)`.
pub fn nmse_loss(y_hat: &[f64], y: &[f64], eps: f64) -> f64 {
    let num: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>() + eps;
    num / den
}

/// Gaussian sample helper for tests and callers that need the same law.
pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_attention_returns_value_row() {
        let (out, w) = attention(&[0.3, -1.0], &[2.0, 5.0], &[7.0, 8.0, 9.0], 1, 1, 2, 3).unwrap();
        assert_eq!(out, vec![7.0, 8.0, 9.0]);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn identical_keys_average_values() {
        let q = [0.4, 1.3, -2.0, 0.1];
        let k = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let v = [1.0, 10.0, 2.0, 20.0, 6.0, 60.0];
        let (out, _) = attention(&q, &k, &v, 2, 3, 2, 2).unwrap();
        for row in out.chunks(2) {
            assert!((row[0] - 3.0).abs() < 1e-12);
            assert!((row[1] - 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_are_stochastic_and_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = gaussian_vec(&mut rng, 5 * 4, 30.0);
        let k = gaussian_vec(&mut rng, 6 * 4, 30.0);
        let v = gaussian_vec(&mut rng, 6 * 3, 1.0);
        let (_, w) = attention(&q, &k, &v, 5, 6, 4, 3).unwrap();
        for row in w.chunks(6) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }

    #[test]
    fn attention_rejects_bad_input() {
        assert!(matches!(
            attention(&[1.0], &[1.0, 2.0], &[1.0], 1, 1, 1, 1),
            Err(crate::Error::Argument(_))
        ));
        assert!(matches!(
            attention(&[f64::NAN], &[1.0], &[1.0], 1, 1, 1, 1),
            Err(crate::Error::Numerical(_))
        ));
    }

    #[test]
    fn lora_effective_cases() {
        let w = [1.0, 2.0, 3.0, 4.0];
        let a = [0.5, -0.5];
        let b = [2.0, 1.0];
        assert_eq!(lora_effective(&w, &a, &b, 0.0, 2, 2, 1).unwrap(), w.to_vec());
        assert_eq!(lora_effective(&w, &a, &[0.0, 0.0], 3.0, 2, 2, 1).unwrap(), w.to_vec());
        let e1 = [1.0, 0.0];
        let got = lora_effective(&w, &e1, &e1, 0.5, 2, 2, 1).unwrap();
        assert_eq!(got, vec![1.5, 2.0, 3.0, 4.0]);
        assert!(lora_effective(&w, &a, &b, 1.0, 2, 2, 2).is_err());
    }

    #[test]
    fn forward_shape_and_batch_independence() {
        let cfg = ModelConfig {
            width: 8,
            heads: 2,
            blocks: 1,
            lora_rank: 2,
            ..ModelConfig::new(3, 4, 2)
        };
        let m = MicroModel::new(cfg, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let one = gaussian_vec(&mut rng, 4 * 3, 1.0);
        let mut x = one.clone();
        x.extend_from_slice(&one);
        let y = m.forward(&x, 2).unwrap();
        assert_eq!(y.len(), 2 * 2 * 3);
        assert_eq!(y[..6], y[6..]);
        assert!(m.forward(&x, 3).is_err());
    }

    #[test]
    fn nmse_loss_identities() {
        let y = [1.0, -2.0, 0.5];
        let eps = 1e-8;
        assert_eq!(nmse_loss(&y, &y, eps), 0.0);
        let sy: f64 = y.iter().map(|v| v * v).sum();
        assert!((nmse_loss(&[0.0; 3], &y, eps) - sy / (sy + eps)).abs() < 1e-15);
        assert!(nmse_loss(&[0.0; 3], &y, eps) < 1.0);
        let twice: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert!((nmse_loss(&twice, &y, eps) - sy / (sy + eps)).abs() < 1e-15);
    }

    #[test]
    fn layout_is_contiguous_in_declaration_order() {
        let cfg = ModelConfig {
            width: 8,
            heads: 2,
            blocks: 2,
            lora_rank: 2,
            ..ModelConfig::new(3, 4, 2)
        };
        let layout = ParamLayout::new(&cfg);
        let mut next = 0;
        for s in layout.slots() {
            assert_eq!(s.offset, next);
            next += s.len();
        }
        assert_eq!(next, layout.total);
    }

    #[test]
    fn lora_b_starts_at_zero() {
        let cfg = ModelConfig {
            width: 8,
            heads: 2,
            blocks: 2,
            lora_rank: 2,
            ..ModelConfig::new(3, 4, 2)
        };
        let m = MicroModel::new(cfg, 5).unwrap();
        for b in &m.layout.blocks {
            assert!(m.slot(b.lora_q_b).iter().all(|v| *v == 0.0));
            assert!(m.slot(b.lora_v_b).iter().all(|v| *v == 0.0));
            assert!(m.slot(b.lora_q_a).iter().any(|v| *v != 0.0));
        }
    }
}
