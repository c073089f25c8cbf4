//! Prediction-error and link-level metrics.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::compression::RefMatrix;
use crate::error::{bail, Result};

/// Floor reported for a perfect prediction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Default energy coverage used to pick active taps.
pub const DEFAULT_ACTIVE_ENERGY: f64 = 0.99;

/// SNR and target rate of a single-stream link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub snr_linear: f64,
    /// Target rate in bit/s/Hz.
    pub target_rate: f64,
}

impl LinkParams {
    pub fn from_db(snr_db: f64, target_rate: f64) -> Self {
        LinkParams {
            snr_linear: db_to_linear(snr_db),
            target_rate,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// `10 log10(sum |p - t|^2 / sum |t|^2)` over paired vectors.
pub fn nmse_db<T: AsRef<[f64]>>(preds: &[T], truths: &[T]) -> Result<f64> {
    let (num, den) = error_and_energy(preds, truths)?;
    if den == 0.0 {
        bail!(UndefinedReference, "all-zero truth has no defined NMSE");
    }
    if num == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * libm::log10(num / den)).max(NMSE_FLOOR_DB))
}

/// Complex-valued variant of [`nmse_db`].
pub fn nmse_db_complex<T: AsRef<[Complex64]>>(preds: &[T], truths: &[T]) -> Result<f64> {
    let re = |v: &[T]| -> Vec<Vec<f64>> {
        v.iter()
            .map(|x| x.as_ref().iter().flat_map(|z| [z.re, z.im]).collect())
            .collect()
    };
    nmse_db(&re(preds), &re(truths))
}

/// `sqrt(sum_i |p_i - t_i|^2 / I)` with `I` the number of samples.
pub fn rmse<T: AsRef<[f64]>>(preds: &[T], truths: &[T]) -> Result<f64> {
    if preds.is_empty() {
        bail!(Argument, "rmse of an empty set");
    }
    let (num, _) = error_and_energy(preds, truths)?;
    Ok(libm::sqrt(num / preds.len() as f64))
}

fn error_and_energy<T: AsRef<[f64]>>(preds: &[T], truths: &[T]) -> Result<(f64, f64)> {
    if preds.len() != truths.len() || preds.is_empty() {
        bail!(Argument, "need equally many predictions and truths, at least one");
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            bail!(Argument, "sample lengths differ ({} vs {})", p.len(), t.len());
        }
        for (a, b) in p.iter().zip(t) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    Ok((num, den))
}

fn check_snr(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        bail!(Argument, "SNR must be a finite non-negative ratio, got {}", rho);
    }
    Ok(())
}

/// Mean of `log2(1 + rho |h|^2)` over all bins of one slice.
pub fn frame_capacity(h: &[Complex64], rho: f64) -> Result<f64> {
    check_snr(rho)?;
    if h.is_empty() {
        bail!(Argument, "empty channel slice");
    }
    let sum: f64 = h.iter().map(|z| libm::log2(1.0 + rho * z.norm_sqr())).sum();
    Ok(sum / h.len() as f64)
}

/// Mean frame capacity over `frames`.
pub fn ergodic_capacity<T: AsRef<[Complex64]>>(frames: &[T], rho: f64) -> Result<f64> {
    if frames.is_empty() {
        bail!(Argument, "no frames");
    }
    let mut sum = 0.0;
    for f in frames {
        sum += frame_capacity(f.as_ref(), rho)?;
    }
    Ok(sum / frames.len() as f64)
}

/// Fraction of frames whose capacity falls strictly below `target_rate`.
pub fn outage_probability<T: AsRef<[Complex64]>>(frames: &[T], rho: f64, target_rate: f64) -> Result<f64> {
    let caps = frames
        .iter()
        .map(|f| frame_capacity(f.as_ref(), rho))
        .collect::<Result<Vec<f64>>>()?;
    outage_from_capacities(&caps, target_rate)
}

/// [`outage_probability`] from precomputed per-frame capacities.
pub fn outage_from_capacities(capacities: &[f64], target_rate: f64) -> Result<f64> {
    if capacities.is_empty() {
        bail!(Argument, "no frames");
    }
    if !(target_rate >= 0.0) {
        bail!(Argument, "target rate must be non-negative");
    }
    let below = capacities.iter().filter(|&&c| c < target_rate).count();
    Ok(below as f64 / capacities.len() as f64)
}

/// Indices of the strongest taps, in descending energy order, until their
/// energy reaches `energy_fraction` of the total. Ties keep index order.
pub fn select_active_taps(h: &[Complex64], energy_fraction: f64) -> Result<Vec<usize>> {
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        bail!(Argument, "energy_fraction must lie in (0, 1], got {}", energy_fraction);
    }
    let total: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if !(total > 0.0) {
        bail!(UndefinedReference, "zero-energy frame has no active taps");
    }
    let mut order: Vec<usize> = (0..h.len()).collect();
    order.sort_by(|&a, &b| h[b].norm_sqr().total_cmp(&h[a].norm_sqr()));
    let target = energy_fraction * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut active = Vec::new();
    for i in order {
        active.push(i);
        acc += h[i].norm_sqr();
        if acc >= target {
            break;
        }
    }
    Ok(active)
}

/// Capacity averaged over the active taps after rescaling them to unit mean
/// power.
pub fn active_tap_capacity(h: &[Complex64], rho: f64, energy_fraction: f64) -> Result<f64> {
    check_snr(rho)?;
    let active = select_active_taps(h, energy_fraction)?;
    let power: f64 = active.iter().map(|&i| h[i].norm_sqr()).sum::<f64>() / active.len() as f64;
    let sum: f64 = active
        .iter()
        .map(|&i| libm::log2(1.0 + rho * h[i].norm_sqr() / power))
        .sum();
    Ok(sum / active.len() as f64)
}

/// Single-stream equivalent of a reference matrix: per bin, the transmit
/// elements combined with equal unit-norm weights, `sum_t H[t, bin] / sqrt(N_t)`.
pub fn beamformed_slice(reference: &RefMatrix) -> Vec<Complex64> {
    let m = &reference.data;
    let scale = 1.0 / libm::sqrt(m.rows() as f64);
    (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| m[(r, c)]).sum::<Complex64>() * scale)
        .collect()
}

/// Summary metrics of one forecaster at one horizon and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub horizon: usize,
    pub snr_db: f64,
    pub nmse_db: f64,
    pub rmse: f64,
    pub ergodic_capacity: f64,
    pub outage: f64,
    pub active_tap_capacity: f64,
}
