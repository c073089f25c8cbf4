use ddfas_core::bessel::bessel_j0;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `terms` terms of `sum_k (-1)^k (x/2)^(2k) / (k!)^2` in exact rational arithmetic.
fn j0_series(x: f64, terms: u32) -> f64 {
    let half = BigRational::from_float(x).unwrap() / BigRational::from_integer(BigInt::from(2));
    let q = &half * &half;
    let mut term = BigRational::one();
    let mut sum = BigRational::zero();
    for k in 0..terms {
        if k > 0 {
            let kk = BigRational::from_integer(BigInt::from(k) * BigInt::from(k));
            term = -term * &q / kk;
        }
        sum += &term;
    }
    sum.to_f64().unwrap()
}

#[test]
fn j0_matches_series_on_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let x = 20.0 * i as f64 / 199.0;
        let err = (bessel_j0(x).unwrap() - j0_series(x, 60)).abs();
        worst = worst.max(err);
    }
    assert!(worst <= 1e-9, "max deviation {worst:e}");
}

#[test]
fn j0_reference_points() {
    assert!(bessel_j0(2.404825557695773).unwrap().abs() <= 1e-9);
    assert!((bessel_j0(1.0).unwrap() - 0.7651976866).abs() <= 1e-9);
    assert!((bessel_j0(1.0).unwrap() - j0_series(1.0, 60)).abs() <= 1e-12);
}

#[test]
fn j0_accurate_to_fifty() {
    // Exact arithmetic has no cancellation, so more terms extend the oracle.
    for i in 0..=50 {
        let x = i as f64;
        assert!((bessel_j0(x).unwrap() - j0_series(x, 160)).abs() <= 1e-9, "x = {x}");
    }
}
