//! Row-major f64 kernels used by the forward and backward passes.

use alloc::vec;
use alloc::vec::Vec;

/// `out[m x n] (+)= a[m x k] * b[k x n]`.
pub fn matmul_into(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    if !accumulate {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
}

pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    matmul_into(&mut out, a, b, m, k, n, true);
    out
}

/// `out[k x n] += a[m x k]^T * b[m x n]`.
pub fn matmul_at_b_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[m x k] (+)= a[m x n] * b[k x n]^T`.
pub fn matmul_a_bt_into(out: &mut [f64], a: &[f64], b: &[f64], m: usize, n: usize, k: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let b_row = &b[j * n..(j + 1) * n];
            let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            if accumulate {
                out[i * k + j] += dot;
            } else {
                out[i * k + j] = dot;
            }
        }
    }
}

/// Adds `bias` to every row of `x[rows x bias.len()]`.
pub fn add_row_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// `out[j] += sum_i x[i, j]`.
pub fn column_sums_acc(out: &mut [f64], x: &[f64]) {
    for row in x.chunks_exact(out.len()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

#[cfg(test)]
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_C * (x + GELU_A * x * x * x)))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let t = libm::tanh(GELU_C * (x + GELU_A * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row-wise layer norm. Returns `(output, normalised input, 1/std per row)`.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = gain.len();
    let rows = x.len() / w;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * w..(r + 1) * w];
        let mean = row.iter().sum::<f64>() / w as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w as f64;
        let rs = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        rstd[r] = rs;
        for j in 0..w {
            let h = (row[j] - mean) * rs;
            xhat[r * w + j] = h;
            out[r * w + j] = h * gain[j] + bias[j];
        }
    }
    (out, xhat, rstd)
}

/// Backward of [`layer_norm`]; adds into `dx`, and into `dgain`/`dbias` when given.
pub fn layer_norm_backward(
    dout: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    gain: &[f64],
    dx: &mut [f64],
    dparams: Option<(&mut [f64], &mut [f64])>,
) {
    let w = gain.len();
    if let Some((dgain, dbias)) = dparams {
        for (r_out, r_hat) in dout.chunks_exact(w).zip(xhat.chunks_exact(w)) {
            for j in 0..w {
                dgain[j] += r_out[j] * r_hat[j];
                dbias[j] += r_out[j];
            }
        }
    }
    for (r, &rs) in rstd.iter().enumerate() {
        let d = &dout[r * w..(r + 1) * w];
        let h = &xhat[r * w..(r + 1) * w];
        let mut mean_dh = 0.0;
        let mut mean_dh_h = 0.0;
        for j in 0..w {
            let dh = d[j] * gain[j];
            mean_dh += dh;
            mean_dh_h += dh * h[j];
        }
        mean_dh /= w as f64;
        mean_dh_h /= w as f64;
        for j in 0..w {
            let dh = d[j] * gain[j];
            dx[r * w + j] += rs * (dh - mean_dh - h[j] * mean_dh_h);
        }
    }
}
