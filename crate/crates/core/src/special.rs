//! Factorials, binomial coefficients and power-series coefficients.
//!
//! Integer arguments up to 20 are handled exactly; larger ones go through
//! log-gamma. Binomials with a negative upper argument use the falling
//! factorial product.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use statrs::function::gamma::ln_gamma;

const EXACT_LIMIT: u64 = 20;

/// `x * 2^e` without intermediate overflow for large `|e|`.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

pub fn ln_factorial(k: u64) -> f64 {
    if k <= EXACT_LIMIT {
        (factorial_u64(k) as f64).ln()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn factorial_u64(k: u64) -> u64 {
    (1..=k).product()
}

pub fn factorial(k: u64) -> f64 {
    if k <= EXACT_LIMIT {
        factorial_u64(k) as f64
    } else {
        ln_gamma(k as f64 + 1.0).exp()
    }
}

/// `C(n, k)` for `0 <= k`, `0 <= n`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        // exact in u128 for this range
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc as f64
    } else {
        (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))
            .exp()
            .round()
    }
}

/// Generalized binomial `C(m, j) = m (m-1) ... (m-j+1) / j!` for any integer `m`.
pub fn generalized_binomial(m: i64, j: u64) -> f64 {
    if m >= 0 {
        return binomial(m as u64, j);
    }
    // C(m, j) = (-1)^j C(j - m - 1, j) for m < 0
    let v = binomial((j as i64 - m - 1) as u64, j);
    if j.is_multiple_of(2) {
        v
    } else {
        -v
    }
}

pub fn binomial_exact(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn factorial_exact(k: u64) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `2^e` as an exact rational, any sign of `e`.
pub fn pow2_rational(e: i64) -> BigRational {
    let p = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// Coefficients `a^k / k!` for `k = 0..=deg`, by running product.
pub fn exp_series(a: f64, deg: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(deg + 1);
    let mut c = 1.0;
    out.push(c);
    for k in 1..=deg {
        c *= a / k as f64;
        out.push(c);
    }
    out
}

/// Single coefficient `a^k / k!`.
pub fn exp_coeff(a: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if a == 0.0 {
        return 0.0;
    }
    if k <= 200 {
        let mut c = 1.0;
        for i in 1..=k {
            c *= a / i as f64;
        }
        c
    } else {
        let mag = (k as f64 * a.abs().ln() - ln_factorial(k)).exp();
        if a < 0.0 && k % 2 == 1 {
            -mag
        } else {
            mag
        }
    }
}

/// Product of two truncated power series, truncated to `deg`.
pub fn series_mul(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    (0..=deg)
        .map(|k| {
            (0..=k)
                .filter(|&i| i < a.len() && k - i < b.len())
                .map(|i| a[i] * b[k - i])
                .sum()
        })
        .collect()
}
