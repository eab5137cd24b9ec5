//! Bessel functions of the first kind of integer order and their zeros.
//!
//! Small arguments use the ascending power series. Everything else goes
//! through Miller's downward recurrence normalized by the identity
//! `J_0(x) + 2 sum_k J_2k(x) = 1`, which is stable for every order and keeps
//! the absolute error near machine precision on the range we care about.

use crate::error::{Error, Result};

/// Largest order accepted by the checked entry points.
pub const DEFAULT_MAX_ORDER: u32 = 16;

/// Below this argument the power series is used directly.
const SERIES_LIMIT: f64 = 8.0;

/// `J_order(x)` for `order <= DEFAULT_MAX_ORDER`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    bessel_j_with_max(order, x, DEFAULT_MAX_ORDER)
}

/// `J_order(x)` with a caller-chosen order ceiling.
pub fn bessel_j_with_max(order: u32, x: f64, max_order: u32) -> Result<f64> {
    if order > max_order {
        return Err(Error::UnsupportedOrder {
            order,
            max: max_order,
        });
    }
    Ok(jn(order, x))
}

/// Unchecked evaluation, any order.
pub(crate) fn jn(order: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = jn(order, -x);
        return if order % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        series(order, x)
    } else {
        miller(order, x)
    }
}

/// Derivative `J_m'(x)`.
pub(crate) fn jn_prime(order: u32, x: f64) -> f64 {
    if order == 0 {
        -jn(1, x)
    } else {
        0.5 * (jn(order - 1, x) - jn(order + 1, x))
    }
}

/// `J_m(x) / x` for `m >= 1`, finite at the origin.
pub(crate) fn jn_over_x(order: u32, x: f64) -> f64 {
    debug_assert!(order >= 1);
    (jn(order - 1, x) + jn(order + 1, x)) / (2.0 * order as f64)
}

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=order {
        term *= half / i as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + order as f64));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
    }
    sum
}

fn miller(order: u32, x: f64) -> f64 {
    let top = (order as f64).max(x);
    let mut start = (top + (40.0 * top).sqrt() + 20.0) as usize;
    start += start % 2;

    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{k-1}
        if k - 1 == order as usize {
            wanted = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// The `q`-th positive zero of `J_order`, `q >= 1`.
///
/// Brackets come from a sign scan starting at `order` (the first zero lies
/// beyond it); each bracket is bisected and then polished with Newton steps.
pub fn bessel_zero(order: u32, q: u32) -> Result<f64> {
    if order > DEFAULT_MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            max: DEFAULT_MAX_ORDER,
        });
    }
    if q == 0 {
        return Err(Error::Config("Bessel zero index starts at 1".into()));
    }
    Ok(zero_unchecked(order, q))
}

pub(crate) fn zero_unchecked(order: u32, q: u32) -> f64 {
    const STEP: f64 = 0.25;
    let mut a = (order as f64).max(1.0);
    let mut fa = jn(order, a);
    let mut found = 0;
    loop {
        let b = a + STEP;
        let fb = jn(order, b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == q {
                return refine(order, a, b);
            }
        }
        a = b;
        fa = fb;
    }
}

fn refine(order: u32, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = jn(order, lo);
    if flo == 0.0 {
        return lo;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let fm = jn(order, mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = jn_prime(order, x);
        if d == 0.0 {
            break;
        }
        let step = jn(order, x) / d;
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_m(x) = (1/pi) int_0^pi cos(m t - x sin t) dt`, trapezoid rule.
    /// The integrand is smooth and periodic so the rule converges
    /// geometrically once the node count exceeds `x + m`.
    fn integral_oracle(m: u32, x: f64) -> f64 {
        let n = 400;
        let h = std::f64::consts::PI / n as f64;
        let f = |t: f64| (m as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn origin_values() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_integral_representation() {
        let mut worst: f64 = 0.0;
        for m in 0..=16 {
            let mut x = 0.0;
            while x <= 60.0 {
                let d = (bessel_j(m, x).unwrap() - integral_oracle(m, x)).abs();
                worst = worst.max(d);
                x += 0.37;
            }
        }
        assert!(worst < 1e-12, "worst abs error {worst:e}");
    }

    #[test]
    fn regime_boundary_is_continuous() {
        for m in 0..=16 {
            let lo = series(m, SERIES_LIMIT - 1e-9);
            let hi = miller(m, SERIES_LIMIT - 1e-9);
            assert!((lo - hi).abs() < 1e-13, "order {m}: {lo} vs {hi}");
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            bessel_j(17, 1.0),
            Err(Error::UnsupportedOrder { order: 17, max: 16 })
        ));
    }

    #[test]
    fn first_zero_of_j0_from_series_bisection() {
        // Independent route: bisection on a plain power series of J_0.
        let j0 = |x: f64| {
            let mut t = 1.0;
            let mut s = 1.0;
            for k in 1..60 {
                t *= -(x * x / 4.0) / (k as f64 * k as f64);
                s += t;
            }
            s
        };
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if j0(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - 2.404825557695773).abs() < 1e-12);
        assert!(bessel_j(0, 2.404825557695773).unwrap().abs() < 1e-10);
        assert!((bessel_zero(0, 1).unwrap() - root).abs() < 1e-9);
    }

    #[test]
    fn first_zero_of_j1_from_bisection() {
        let (mut lo, mut hi) = (3.0, 4.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if integral_oracle(1, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((bessel_zero(1, 1).unwrap() - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!((bessel_zero(1, 1).unwrap() - 3.8317059702).abs() < 1e-9);
    }

    #[test]
    fn zeros_interlace_and_increase() {
        let j01 = bessel_zero(0, 1).unwrap();
        let j11 = bessel_zero(1, 1).unwrap();
        let j02 = bessel_zero(0, 2).unwrap();
        assert!(j01 < j11 && j11 < j02);
        for m in 0..=8 {
            let mut prev = 0.0;
            for q in 1..=8 {
                let z = bessel_zero(m, q).unwrap();
                assert!(z > prev);
                assert!(bessel_j(m, z).unwrap().abs() < 1e-9, "m={m} q={q}");
                prev = z;
            }
        }
    }

    #[test]
    fn zero_index_must_be_positive() {
        assert!(bessel_zero(0, 0).is_err());
    }

    #[test]
    fn derivative_identities() {
        for m in 0..6 {
            for &x in &[0.3, 2.0, 9.5, 31.0] {
                let h = 1e-5;
                let fd = (jn(m, x + h) - jn(m, x - h)) / (2.0 * h);
                assert!((jn_prime(m, x) - fd).abs() < 1e-8);
                if m >= 1 {
                    assert!((jn_over_x(m, x) - jn(m, x) / x).abs() < 1e-13);
                }
            }
        }
        assert!((jn_over_x(1, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(jn_over_x(2, 0.0), 0.0);
    }
}
