//! Zeroth-order Bessel function of the first kind.

use core::f64::consts::PI;

use crate::error::{bail, Result};

/// Above this magnitude the Hankel asymptotic expansion is used.
const ASYMPTOTIC_CUTOFF: f64 = 200.0;

/// `J0(x)`.
///
/// For moderate arguments this evaluates Bessel's integral
/// `J0(x) = (1/pi) * int_0^pi cos(x sin t) dt` with the midpoint rule. The
/// integrand is smooth and pi-periodic, so the rule converges
/// geometrically; its error is `2 * sum_m (-1)^m J_{2nm}(x)`, negligible once
/// `2n` clears `|x|` by a few dozen orders.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        bail!(Argument, "bessel_j0 needs a finite argument, got {}", x);
    }
    let ax = libm::fabs(x);
    if ax > ASYMPTOTIC_CUTOFF {
        return Ok(hankel_asymptotic(ax));
    }
    let n = libm::ceil(0.75 * ax) as usize + 32;
    let step = PI / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let t = (k as f64 + 0.5) * step;
        sum += libm::cos(ax * libm::sin(t));
    }
    Ok(sum / n as f64)
}

fn hankel_asymptotic(x: f64) -> f64 {
    // P and Q series for nu = 0; terms shrink until k ~ 2x.
    let mu = 0.0;
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut k = 1u32;
    loop {
        let kk = (2 * k - 1) as f64;
        term *= (mu - kk * kk) / (k as f64 * eight_x);
        if libm::fabs(term) < 1e-17 || k > 40 {
            break;
        }
        // P = sum over even k of (-1)^(k/2) t_k, Q = sum over odd k of (-1)^((k-1)/2) t_k
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        k += 1;
    }
    let phase = x - PI / 4.0;
    libm::sqrt(2.0 / (PI * x)) * (p * libm::cos(phase) - q * libm::sin(phase))
}
