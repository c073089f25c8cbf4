//! Reverse-mode gradients of the NMSE loss.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{head_slice, BlockCache, BlockLayout, ForwardCache, MicroModel, ParamGroup, Slot, TrainMode};
use super::ops::{column_sums_acc, gelu_grad, layer_norm_backward, matmul_a_bt_into, matmul_at_b_acc, matmul_into};
use crate::error::{bail, Result};

/// Squared error and parameter gradient of one sample.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub squared_error: f64,
    pub grad: Vec<f64>,
}

/// Loss value and full-length gradient (zeros at frozen parameters).
#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Denominator of the batch loss: `sum y^2 + eps`.
pub fn loss_denominator(y: &[f64], eps: f64) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>() + eps
}

/// Gradient of `sum (y_hat - y)^2 / denom` for a single sample.
pub fn sample_gradient(model: &MicroModel, x: &[f64], y: &[f64], denom: f64, mode: TrainMode) -> SampleGradient {
    let cache = model.forward_cached(x);
    let mut squared_error = 0.0;
    let dy: Vec<f64> = cache
        .output
        .iter()
        .zip(y)
        .map(|(p, t)| {
            squared_error += (p - t) * (p - t);
            2.0 * (p - t) / denom
        })
        .collect();
    let mut grad = vec![0.0; model.layout.total];
    Backward {
        model,
        mode,
        grad: &mut grad,
    }
    .run(&cache, &dy);
    SampleGradient { squared_error, grad }
}

/// Batch loss and gradient, accumulating samples in order.
pub fn backward(model: &MicroModel, x: &[f64], y: &[f64], batch: usize, eps: f64, mode: TrainMode) -> Result<Gradient> {
    let c = &model.config;
    let (xs, ys) = (c.past * c.d_in, c.horizon * c.d_in);
    if batch == 0 || x.len() != batch * xs || y.len() != batch * ys {
        bail!(Argument, "batch shapes do not match the model");
    }
    let denom = loss_denominator(y, eps);
    let parts: Vec<SampleGradient> = (0..batch)
        .map(|i| sample_gradient(model, &x[i * xs..(i + 1) * xs], &y[i * ys..(i + 1) * ys], denom, mode))
        .collect();
    reduce(parts, denom, model.layout.total)
}

/// Sums per-sample results in index order.
pub fn reduce(parts: Vec<SampleGradient>, denom: f64, n_params: usize) -> Result<Gradient> {
    let mut grad = vec![0.0; n_params];
    let mut sq = 0.0;
    for p in parts {
        sq += p.squared_error;
        for (g, v) in grad.iter_mut().zip(&p.grad) {
            *g += v;
        }
    }
    let loss = sq / denom;
    if !loss.is_finite() {
        bail!(Numerical, "non-finite loss");
    }
    Ok(Gradient { loss, grad })
}

struct Backward<'a> {
    model: &'a MicroModel,
    mode: TrainMode,
    grad: &'a mut [f64],
}

impl<'a> Backward<'a> {
    fn trains(&self, s: Slot) -> bool {
        self.mode.trains(s.group)
    }

    fn g(&mut self, s: Slot) -> &mut [f64] {
        &mut self.grad[s.range()]
    }

    fn p(&self, s: Slot) -> &'a [f64] {
        self.model.slot(s)
    }

    fn run(&mut self, cache: &ForwardCache, dy: &[f64]) {
        let model = self.model;
        let c = model.config;
        let l = &model.layout;
        let (t, w, n, m, d) = (c.tokens(), c.width, c.past, c.horizon, c.d_in);

        if self.trains(l.w_out) {
            matmul_at_b_acc(self.g(l.w_out), &cache.zf[n * w..], dy, m, w, d);
            column_sums_acc(self.g(l.b_out), dy);
        }
        let mut dzf = vec![0.0; t * w];
        matmul_a_bt_into(&mut dzf[n * w..], dy, self.p(l.w_out), m, d, w, false);

        let mut dz = vec![0.0; t * w];
        let gain = self.p(l.lnf_gain).to_vec();
        if self.trains(l.lnf_gain) {
            let (lo, hi) = (l.lnf_gain.range(), l.lnf_bias.range());
            let (gpart, bpart) = split_two(self.grad, lo, hi);
            layer_norm_backward(
                &dzf,
                &cache.lnf_hat,
                &cache.lnf_rstd,
                &gain,
                &mut dz,
                Some((gpart, bpart)),
            );
        } else {
            layer_norm_backward(&dzf, &cache.lnf_hat, &cache.lnf_rstd, &gain, &mut dz, None);
        }

        for (bl, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
            dz = self.block(bl, bc, dz);
        }

        if self.trains(l.queries) {
            let dq = dz[n * w..].to_vec();
            for (g, v) in self.g(l.queries).iter_mut().zip(dq) {
                *g += v;
            }
        }
        if self.trains(l.w_in) {
            let dzp = &dz[..n * w];
            matmul_at_b_acc(&mut self.grad[l.w_in.range()], &cache.x, dzp, n, d, w);
            column_sums_acc(&mut self.grad[l.b_in.range()], dzp);
            for (g, v) in self.grad[l.pos.range()].iter_mut().zip(dzp) {
                *g += v;
            }
        }
    }

    fn block(&mut self, bl: &BlockLayout, bc: &BlockCache, dz_out: Vec<f64>) -> Vec<f64> {
        let c = self.model.config;
        let (t, w, f, heads) = (c.tokens(), c.width, c.ffn_width(), c.heads);
        let hd = c.head_dim();
        let alpha = c.lora_alpha;
        let rank = c.lora_rank;
        let base = self.mode.trains(ParamGroup::Base);
        let lora = self.mode.trains(ParamGroup::Lora);

        // Feed-forward sublayer.
        let mut dz_mid = dz_out.clone();
        if base {
            matmul_at_b_acc(self.g(bl.ff2_w), &bc.act, &dz_out, t, f, w);
            column_sums_acc(self.g(bl.ff2_b), &dz_out);
        }
        let mut dpre = vec![0.0; t * f];
        matmul_a_bt_into(&mut dpre, &dz_out, self.p(bl.ff2_w), t, w, f, false);
        for (dp, &u) in dpre.iter_mut().zip(&bc.pre) {
            *dp *= gelu_grad(u);
        }
        if base {
            matmul_at_b_acc(self.g(bl.ff1_w), &bc.b, &dpre, t, w, f);
            column_sums_acc(self.g(bl.ff1_b), &dpre);
        }
        let mut db = vec![0.0; t * w];
        matmul_a_bt_into(&mut db, &dpre, self.p(bl.ff1_w), t, f, w, false);
        let gain2 = self.p(bl.ln2_gain).to_vec();
        if base {
            let (gp, bp) = split_two(self.grad, bl.ln2_gain.range(), bl.ln2_bias.range());
            layer_norm_backward(&db, &bc.ln2_hat, &bc.ln2_rstd, &gain2, &mut dz_mid, Some((gp, bp)));
        } else {
            layer_norm_backward(&db, &bc.ln2_hat, &bc.ln2_rstd, &gain2, &mut dz_mid, None);
        }

        // Attention sublayer.
        let mut dz_in = dz_mid.clone();
        if base {
            matmul_at_b_acc(self.g(bl.wo), &bc.attn_out, &dz_mid, t, w, w);
        }
        let mut dattn = vec![0.0; t * w];
        matmul_a_bt_into(&mut dattn, &dz_mid, self.p(bl.wo), t, w, w, false);

        let scale = 1.0 / libm::sqrt(hd as f64);
        let mut dq = vec![0.0; t * w];
        let mut dk = vec![0.0; t * w];
        let mut dv = vec![0.0; t * w];
        for h in 0..heads {
            let probs = &bc.probs[h * t * t..(h + 1) * t * t];
            let do_h = head_slice(&dattn, t, w, h, hd);
            let qh = head_slice(&bc.q, t, w, h, hd);
            let kh = head_slice(&bc.k, t, w, h, hd);
            let vh = head_slice(&bc.v, t, w, h, hd);
            let mut dp = vec![0.0; t * t];
            matmul_a_bt_into(&mut dp, &do_h, &vh, t, hd, t, false);
            let mut dvh = vec![0.0; t * hd];
            matmul_at_b_acc(&mut dvh, probs, &do_h, t, t, hd);
            for (dp_row, p_row) in dp.chunks_exact_mut(t).zip(probs.chunks_exact(t)) {
                let dot: f64 = dp_row.iter().zip(p_row).map(|(a, b)| a * b).sum();
                for (ds, &p) in dp_row.iter_mut().zip(p_row) {
                    *ds = p * (*ds - dot) * scale;
                }
            }
            let mut dqh = vec![0.0; t * hd];
            matmul_into(&mut dqh, &dp, &kh, t, t, hd, false);
            let mut dkh = vec![0.0; t * hd];
            matmul_at_b_acc(&mut dkh, &dp, &qh, t, t, hd);
            for r in 0..t {
                let dst = r * w + h * hd..r * w + (h + 1) * hd;
                let src = r * hd..(r + 1) * hd;
                dq[dst.clone()].copy_from_slice(&dqh[src.clone()]);
                dk[dst.clone()].copy_from_slice(&dkh[src.clone()]);
                dv[dst].copy_from_slice(&dvh[src]);
            }
        }

        let mut da = vec![0.0; t * w];
        matmul_a_bt_into(&mut da, &dq, &bc.wq, t, w, w, true);
        matmul_a_bt_into(&mut da, &dk, self.p(bl.wk), t, w, w, true);
        matmul_a_bt_into(&mut da, &dv, &bc.wv, t, w, w, true);

        if base {
            matmul_at_b_acc(self.g(bl.wk), &bc.a, &dk, t, w, w);
        }
        for (dproj, wslot, a_slot, b_slot) in [
            (&dq, bl.wq, bl.lora_q_a, bl.lora_q_b),
            (&dv, bl.wv, bl.lora_v_a, bl.lora_v_b),
        ] {
            if !base && !lora {
                continue;
            }
            let mut dw = vec![0.0; w * w];
            matmul_at_b_acc(&mut dw, &bc.a, dproj, t, w, w);
            if lora {
                // W_eff = W + alpha * A * B
                let mut da_l = vec![0.0; w * rank];
                matmul_a_bt_into(&mut da_l, &dw, self.p(b_slot), w, w, rank, false);
                let mut db_l = vec![0.0; rank * w];
                matmul_at_b_acc(&mut db_l, self.p(a_slot), &dw, w, rank, w);
                for (g, v) in self.g(a_slot).iter_mut().zip(da_l) {
                    *g += alpha * v;
                }
                for (g, v) in self.g(b_slot).iter_mut().zip(db_l) {
                    *g += alpha * v;
                }
            }
            if base {
                for (g, v) in self.g(wslot).iter_mut().zip(dw) {
                    *g += v;
                }
            }
        }

        let gain1 = self.p(bl.ln1_gain).to_vec();
        if base {
            let (gp, bp) = split_two(self.grad, bl.ln1_gain.range(), bl.ln1_bias.range());
            layer_norm_backward(&da, &bc.ln1_hat, &bc.ln1_rstd, &gain1, &mut dz_in, Some((gp, bp)));
        } else {
            layer_norm_backward(&da, &bc.ln1_hat, &bc.ln1_rstd, &gain1, &mut dz_in, None);
        }
        dz_in
    }
}

/// Two disjoint mutable ranges, `lo` before `hi`.
fn split_two(v: &mut [f64], lo: core::ops::Range<usize>, hi: core::ops::Range<usize>) -> (&mut [f64], &mut [f64]) {
    debug_assert!(lo.end <= hi.start);
    let (left, right) = v.split_at_mut(hi.start);
    (&mut left[lo], &mut right[..hi.end - hi.start])
}
