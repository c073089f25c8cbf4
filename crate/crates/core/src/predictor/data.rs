//! Turning code sequences into normalised real-valued training windows.

use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;

use super::model::MicroModel;
use crate::compression::Code;
use crate::error::{bail, Result};

/// `[re_0, .., re_{k-1}, im_0, .., im_{k-1}]`.
pub fn realify(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Inverse of [`realify`].
pub fn complexify(v: &[f64]) -> Result<Vec<Complex64>> {
    if !v.len().is_multiple_of(2) {
        bail!(Argument, "realified vector has odd length {}", v.len());
    }
    let k = v.len() / 2;
    Ok((0..k).map(|i| Complex64::new(v[i], v[k + i])).collect())
}

/// Realified, column-major code vectors of a code sequence.
pub fn code_series(codes: &[Code]) -> Vec<Vec<f64>> {
    codes.iter().map(|c| realify(&c.vec())).collect()
}

/// Per-feature z-score transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits on `rows`; zero-variance features get `std = 1`.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            bail!(Argument, "cannot fit a normalizer on no rows");
        };
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            bail!(Argument, "rows have differing lengths");
        }
        let n = rows.len() as f64;
        let mut mean = alloc::vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Flattened `(past, future)` window pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// `count x past x dim`.
    pub x: Vec<f64>,
    /// `count x horizon x dim`.
    pub y: Vec<f64>,
    pub count: usize,
    pub past: usize,
    pub horizon: usize,
    pub dim: usize,
}

impl WindowSet {
    /// Stride-one windows whose first frame lies in `starts`.
    pub fn from_series(series: &[Vec<f64>], past: usize, horizon: usize, starts: Range<usize>) -> Result<Self> {
        if past == 0 || horizon == 0 {
            bail!(Argument, "window lengths must be positive");
        }
        let dim = series.first().map_or(0, |r| r.len());
        let span = past + horizon;
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut count = 0;
        for s in starts {
            if s + span > series.len() {
                break;
            }
            for r in &series[s..s + past] {
                x.extend_from_slice(r);
            }
            for r in &series[s + past..s + span] {
                y.extend_from_slice(r);
            }
            count += 1;
        }
        Ok(WindowSet {
            x,
            y,
            count,
            past,
            horizon,
            dim,
        })
    }

    /// Windows lying entirely inside `frames`.
    pub fn within(series: &[Vec<f64>], past: usize, horizon: usize, frames: Range<usize>) -> Result<Self> {
        let end = frames.end.min(series.len());
        WindowSet::from_series(&series[..end], past, horizon, frames.start..end)
    }

    pub fn x_len(&self) -> usize {
        self.past * self.dim
    }

    pub fn y_len(&self) -> usize {
        self.horizon * self.dim
    }

    pub fn sample_x(&self, i: usize) -> &[f64] {
        &self.x[i * self.x_len()..(i + 1) * self.x_len()]
    }

    pub fn sample_y(&self, i: usize) -> &[f64] {
        &self.y[i * self.y_len()..(i + 1) * self.y_len()]
    }
}

/// Number of leading frames in the training split.
pub fn train_split(n_frames: usize, train_fraction: f64) -> usize {
    libm::floor(n_frames as f64 * train_fraction) as usize
}

/// Forecasts the `horizon` codes following `history`.
pub fn predict_codes(model: &MicroModel, normalizer: &Normalizer, history: &[Code]) -> Result<Vec<Code>> {
    let c = &model.config;
    if history.len() < c.past {
        bail!(
            Argument,
            "history of {} frames is shorter than the window {}",
            history.len(),
            c.past
        );
    }
    let last = &history[history.len() - 1];
    let (r_s, r_d) = (last.matrix.rows(), last.matrix.cols());
    if 2 * r_s * r_d != c.d_in || normalizer.dim() != c.d_in {
        bail!(
            Argument,
            "code size {}x{} does not match model features {}",
            r_s,
            r_d,
            c.d_in
        );
    }
    let mut x = Vec::with_capacity(c.past * c.d_in);
    for code in &history[history.len() - c.past..] {
        x.extend(normalizer.apply(&realify(&code.vec())));
    }
    let y = model.forward(&x, 1)?;
    y.chunks_exact(c.d_in)
        .enumerate()
        .map(|(k, row)| {
            let v = complexify(&normalizer.invert(row))?;
            Code::from_vec(&v, r_s, r_d, last.frame_index + 1 + k)
        })
        .collect()
}
