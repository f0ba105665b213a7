//! One-dimensional lattice kernels.
//!
//! Every kernel here carries a power of two `2^{±(z1-z2)}` that grows
//! without bound on deep windows. The `*_conj` functions return the value
//! with that factor stripped; `KernelValue` keeps it in `log2_scale`.
//!
//! The time dependence enters only through the clock `α = r t`,
//! `β = ℓ t` (see [`Clock`]).

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::contour::{adaptive_contour_quadrature, ContourConfig, MAX_NODES};
use crate::error::{Error, Result};
use crate::special::{
    binomial, binomial_exact, exp_coeff, exp_series, factorial_exact, generalized_binomial, ldexp,
    pow2_rational,
};

/// Above this clock value the series are replaced by quadrature.
pub const SERIES_CLOCK_LIMIT: f64 = 50.0;
const SERIES_REL_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 5000;

/// A real value times `2^log2_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub log2_scale: i64,
}

impl KernelValue {
    pub fn new(value: f64, log2_scale: i64) -> Self {
        Self { value, log2_scale }
    }

    pub fn plain(value: f64) -> Self {
        Self::new(value, 0)
    }

    pub fn zero() -> Self {
        Self::plain(0.0)
    }

    pub fn to_f64(self) -> f64 {
        ldexp(self.value, self.log2_scale)
    }
}

/// PushASEP jump rates; TASEP is `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub r: f64,
    pub l: f64,
}

impl RateParams {
    pub const TASEP: RateParams = RateParams { r: 1.0, l: 0.0 };

    pub fn new(r: f64, l: f64) -> Result<Self> {
        if !(r >= 0.0 && l >= 0.0) || !(r + l > 0.0) || !r.is_finite() || !l.is_finite() {
            return Err(Error::domain(format!(
                "rates must satisfy r >= 0, l >= 0, r + l > 0; got ({r}, {l})"
            )));
        }
        Ok(Self { r, l })
    }

    pub fn total(&self) -> f64 {
        self.r + self.l
    }
}

/// The two clocks `α = r t1` (right jumps) and `β = ℓ t2` (pushes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clock {
    pub alpha: f64,
    pub beta: f64,
}

impl Clock {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::domain(format!(
                "clock values must be finite and nonnegative, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn at(t: f64, rates: RateParams) -> Result<Self> {
        Self::new(rates.r * t, rates.l * t)
    }

    /// Separate times for the right-jump and push parts.
    pub fn split(t1: f64, t2: f64, rates: RateParams) -> Result<Self> {
        Self::new(rates.r * t1, rates.l * t2)
    }
}

/// Which formula evaluates the S kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// Finite closed forms; valid only for `β = 0`.
    Tasep,
    /// Double series in `α` and `β` (PushASEP).
    General,
}

impl KernelFamily {
    pub fn for_rates(rates: RateParams) -> Self {
        if rates.l == 0.0 {
            KernelFamily::Tasep
        } else {
            KernelFamily::General
        }
    }
}

// ---------------------------------------------------------------------------
// Q and its relatives

/// `Q(x, y) = 2^{y-x} 1{x > y}`.
pub fn q_kernel(x: i64, y: i64) -> KernelValue {
    if x > y {
        KernelValue::new(1.0, y - x)
    } else {
        KernelValue::zero()
    }
}

/// `Q^n(x, y) = 2^{y-x} C(x-y-1, n-1)` for `x - y >= n >= 1`.
pub fn q_pow(n: u32, x: i64, y: i64) -> KernelValue {
    if n == 0 {
        return KernelValue::plain(if x == y { 1.0 } else { 0.0 });
    }
    let d = x - y;
    if d < n as i64 {
        return KernelValue::zero();
    }
    KernelValue::new(binomial((d - 1) as u64, n as u64 - 1), -d)
}

/// `Q^{-n}(x, y) = (-1)^{y-x+n} 2^{y-x} C(n, y-x)` for `0 <= y - x <= n`.
pub fn q_inv_pow(n: u32, x: i64, y: i64) -> KernelValue {
    let d = y - x;
    if d < 0 || d > n as i64 {
        return KernelValue::zero();
    }
    let sign = if (d + n as i64) % 2 == 0 { 1.0 } else { -1.0 };
    KernelValue::new(sign * binomial(n as u64, d as u64), d)
}

/// Polynomial extension of `Q^n`: `2^{y-x} ∏_{j=1}^{n-1} (x-y-j) / (n-1)!`.
pub fn qbar(n: u32, x: i64, y: i64) -> Result<KernelValue> {
    if n == 0 {
        return Err(Error::domain("qbar needs n >= 1"));
    }
    let d = x - y;
    // C(d-1, n-1) in the generalized sense
    Ok(KernelValue::new(generalized_binomial(d - 1, n as u64 - 1), -d))
}

pub fn q_pow_exact(n: u32, x: i64, y: i64) -> BigRational {
    if n == 0 {
        return if x == y { BigRational::one() } else { BigRational::zero() };
    }
    let d = x - y;
    if d < n as i64 {
        return BigRational::zero();
    }
    BigRational::from_integer(binomial_exact(d - 1, n as i64 - 1)) * pow2_rational(-d)
}

pub fn q_inv_pow_exact(n: u32, x: i64, y: i64) -> BigRational {
    let d = y - x;
    if d < 0 || d > n as i64 {
        return BigRational::zero();
    }
    let v = BigRational::from_integer(binomial_exact(n as i64, d)) * pow2_rational(d);
    if (d + n as i64) % 2 == 0 {
        v
    } else {
        -v
    }
}

/// `∏_{j=1}^{n-1} (d-j) / (n-1)!` exactly; the conjugated `qbar`.
pub fn qbar_conj_exact(n: u32, d: i64) -> BigRational {
    let num = (1..n as i64).fold(BigInt::one(), |acc, j| acc * BigInt::from(d - j));
    BigRational::new(num, factorial_exact(n as u64 - 1))
}

pub fn qbar_exact(n: u32, x: i64, y: i64) -> Result<BigRational> {
    if n == 0 {
        return Err(Error::domain("qbar needs n >= 1"));
    }
    let d = x - y;
    Ok(qbar_conj_exact(n, d) * pow2_rational(-d))
}

// ---------------------------------------------------------------------------
// Difference operators and the Poisson group

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `∇⁻f(x) = f(x) - f(x-1)`
    Minus,
    /// `∇⁺f(x) = f(x+1) - f(x)`
    Plus,
}

/// A function sampled on the sites `lo, lo+1, ..., lo + len - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFunction {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl WindowFunction {
    pub fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Self {
        Self {
            lo,
            values: (lo..=hi).map(f).collect(),
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> Option<f64> {
        if x < self.lo {
            return None;
        }
        self.values.get((x - self.lo) as usize).copied()
    }
}

/// Applies `∇⁻` or `∇⁺`; the output window is one site narrower.
pub fn nabla(direction: Direction, f: &WindowFunction) -> Result<WindowFunction> {
    if f.values.len() < 2 {
        return Err(Error::domain("difference needs a window of at least two sites"));
    }
    let diffs: Vec<f64> = f.values.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = match direction {
        Direction::Minus => f.lo + 1,
        Direction::Plus => f.lo,
    };
    Ok(WindowFunction { lo, values: diffs })
}

/// `e^{-t∇⁻/2}(x, y) = e^{-t/2} (t/2)^{x-y} / (x-y)!` for `x >= y`; any real `t`.
pub fn poisson_group(t: f64, x: i64, y: i64) -> KernelValue {
    if x < y {
        return KernelValue::zero();
    }
    KernelValue::plain((-t / 2.0).exp() * exp_coeff(t / 2.0, (x - y) as u64))
}

// ---------------------------------------------------------------------------
// S and S̄

/// `[w^q] (1-w)^n e^{αw}`.
pub fn a_coeff(n: u32, alpha: f64, q: i64) -> f64 {
    if q < 0 {
        return 0.0;
    }
    let top = (n as i64).min(q);
    let mut acc = 0.0;
    for j in 0..=top {
        let c = binomial(n as u64, j as u64) * exp_coeff(alpha, (q - j) as u64);
        if j % 2 == 0 {
            acc += c;
        } else {
            acc -= c;
        }
    }
    acc
}

/// Conjugated `S_{-t,-n}`: `S(z1, z2) = 2^{z1-z2} s_conj(n, m)` with `m = n + z2 - z1`.
pub fn s_conj(clock: Clock, family: KernelFamily, n: u32, m: i64) -> Result<f64> {
    match family {
        KernelFamily::Tasep => {
            if clock.beta != 0.0 {
                return Err(Error::domain("closed-form S kernel requires β = 0"));
            }
            Ok((-clock.alpha / 2.0).exp() * a_coeff(n, clock.alpha, m))
        }
        KernelFamily::General => s_conj_series(clock, n, m),
    }
}

fn s_conj_series(clock: Clock, n: u32, m: i64) -> Result<f64> {
    let Clock { alpha, beta } = clock;
    if alpha > SERIES_CLOCK_LIMIT || beta > SERIES_CLOCK_LIMIT {
        return s_conj_quadrature(clock, n, m);
    }
    let pref = (-alpha / 2.0 - 2.0 * beta).exp();
    let p0 = (-m).max(0) as u64;
    if beta == 0.0 {
        return Ok(if p0 == 0 { pref * a_coeff(n, alpha, m) } else { 0.0 });
    }
    // both factors decrease once p is past these points
    let p_stop = p0 + (alpha + beta).ceil() as u64 + n as u64;
    let mut acc = 0.0;
    let mut small = 0;
    for p in p0..p0 + SERIES_MAX_TERMS as u64 {
        let term = exp_coeff(beta, p) * a_coeff(n, alpha, m + p as i64);
        acc += term;
        if term.abs() <= SERIES_REL_TOL * acc.abs() {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 5 && p >= p_stop {
            return Ok(pref * acc);
        }
    }
    Err(Error::numeric(
        "S series",
        format!("no convergence in {SERIES_MAX_TERMS} terms (α={alpha}, β={beta}, n={n}, m={m})"),
    ))
}

/// Conjugated `S̄_{-t,n}`: `S̄(z1, z2) = 2^{z2-z1} sbar_conj(n, d)` with `d = z2 - z1`.
pub fn sbar_conj(clock: Clock, family: KernelFamily, n: u32, d: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("S̄ kernel needs n >= 1"));
    }
    let deg = n as usize - 1;
    let big_m = d + n as i64 - 1;
    match family {
        KernelFamily::Tasep => {
            if clock.beta != 0.0 {
                return Err(Error::domain("closed-form S̄ kernel requires β = 0"));
            }
            let mut acc = 0.0;
            for j in 0..=deg {
                let c = generalized_binomial(big_m, j as u64)
                    * exp_coeff(clock.alpha, (deg - j) as u64);
                if j % 2 == 0 {
                    acc += c;
                } else {
                    acc -= c;
                }
            }
            Ok((-clock.alpha / 2.0).exp() * acc)
        }
        KernelFamily::General => {
            let Clock { alpha, beta } = clock;
            if alpha > SERIES_CLOCK_LIMIT || beta > SERIES_CLOCK_LIMIT {
                return sbar_conj_quadrature(clock, n, d);
            }
            let poly: Vec<f64> = (0..=deg)
                .map(|j| {
                    let c = generalized_binomial(big_m, j as u64);
                    if j % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .collect();
            let ex = exp_series(alpha, deg);
            // h(w) = exp(-β w / (1 - w)): k h_k = Σ_{j=1}^k j (-β) h_{k-j}
            let mut h = vec![1.0; deg + 1];
            for k in 1..=deg {
                let s: f64 = (1..=k).map(|j| j as f64 * h[k - j]).sum();
                h[k] = -beta * s / k as f64;
            }
            let mut acc = 0.0;
            for i in 0..=deg {
                for j in 0..=deg - i {
                    acc += poly[i] * ex[j] * h[deg - i - j];
                }
            }
            Ok((-alpha / 2.0 + beta).exp() * acc)
        }
    }
}

pub fn s_kernel(t: f64, n: u32, z1: i64, z2: i64, rates: RateParams) -> Result<KernelValue> {
    let clock = Clock::at(t, rates)?;
    let v = s_conj(clock, KernelFamily::for_rates(rates), n, n as i64 + z2 - z1)?;
    Ok(KernelValue::new(v, z1 - z2))
}

pub fn sbar_kernel(t: f64, n: u32, z1: i64, z2: i64, rates: RateParams) -> Result<KernelValue> {
    let clock = Clock::at(t, rates)?;
    let v = sbar_conj(clock, KernelFamily::for_rates(rates), n, z2 - z1)?;
    Ok(KernelValue::new(v, z2 - z1))
}

/// `Ψ^n_k(x) = 2^{c-x} e^{-t} [w^{x+k-c}] (1-w)^k e^{tw}` with `c = X0(n-k)`.
///
/// `x0` is the sequence `X0(1), X0(2), ...`.
pub fn psi(n: usize, k: usize, x: i64, t: f64, x0: &[i64]) -> Result<KernelValue> {
    if n == 0 || n > x0.len() || k >= n {
        return Err(Error::domain(format!(
            "psi needs 1 <= n <= {} and 0 <= k < n, got n={n}, k={k}",
            x0.len()
        )));
    }
    let c = x0[n - k - 1];
    let v = (-t).exp() * a_coeff(k as u32, t, x + k as i64 - c);
    Ok(KernelValue::new(v, c - x))
}

// ---------------------------------------------------------------------------
// Quadrature evaluations

const ORACLE_REL_TOL: f64 = 1e-15;

/// Circle around the origin whose radius (below `r_max`) minimizes the
/// largest integrand magnitude, which is what limits roundoff.
fn best_origin_circle<F>(f: &F, r_max: f64) -> ContourConfig
where
    F: Fn(Complex64) -> Complex64,
{
    let mut best = (f64::INFINITY, 0.5);
    let steps = 40;
    for i in 0..=steps {
        let r = 0.02 * (r_max / 0.02).powf(i as f64 / steps as f64);
        let mut peak: f64 = 0.0;
        for k in 0..32 {
            let w = Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / 32.0);
            peak = peak.max((f(w) * w).norm());
        }
        if peak.is_finite() && peak < best.0 {
            best = (peak, r);
        }
    }
    ContourConfig::origin_circle(best.1).expect("radius in (0, 1)")
}

fn origin_integral<F>(f: F, r_max: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let cfg = best_origin_circle(&f, r_max);
    adaptive_contour_quadrature(&f, &cfg, MAX_NODES * 16, ORACLE_REL_TOL)?.real(1e-12)
}

/// `s_conj` from the contour integral of `(1-w)^n e^{αw + β/w} / w^{m+1}`.
pub fn s_conj_quadrature(clock: Clock, n: u32, m: i64) -> Result<f64> {
    let Clock { alpha, beta } = clock;
    let f = move |w: Complex64| {
        (Complex64::new(1.0, 0.0) - w).powi(n as i32) * (alpha * w + beta / w).exp()
            / w.powi((m + 1) as i32)
    };
    Ok((-alpha / 2.0 - 2.0 * beta).exp() * origin_integral(f, 0.95)?)
}

/// `sbar_conj` from the contour integral of `(1-w)^{d+n-1} e^{αw - βw/(1-w)} / w^n`.
pub fn sbar_conj_quadrature(clock: Clock, n: u32, d: i64) -> Result<f64> {
    let Clock { alpha, beta } = clock;
    let big_m = d + n as i64 - 1;
    let one = Complex64::new(1.0, 0.0);
    let f = move |w: Complex64| {
        (one - w).powi(big_m as i32) * (alpha * w - beta * w / (one - w)).exp() / w.powi(n as i32)
    };
    Ok((-alpha / 2.0 + beta).exp() * origin_integral(f, 0.9)?)
}

/// Conjugated `Ψ^n_k` (factor `2^{c-x}` removed) by quadrature.
pub fn psi_conj_quadrature(k: u32, q: i64, t: f64) -> Result<f64> {
    let one = Complex64::new(1.0, 0.0);
    let f = move |w: Complex64| (one - w).powi(k as i32) * (t * (w - 1.0)).exp() / w.powi((q + 1) as i32);
    origin_integral(f, 0.9)
}

/// Schütz's `G_n(t, x) = (-1)^n/(2πi) ∮_{Γ_{0,1}} (1-w)^{-n} w^{n-x-1} e^{t(w-1)} dw`.
pub fn g_schutz(n: i64, t: f64, x: i64) -> Result<KernelValue> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("G_n needs t >= 0, got {t}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let f = move |w: Complex64| {
        (one - w).powi(-n as i32) * w.powi((n - x - 1) as i32) * (t * (w - 1.0)).exp()
    };
    let cfg = ContourConfig::around_zero_and_one();
    let r = adaptive_contour_quadrature(f, &cfg, MAX_NODES, 1e-13)?;
    let v = r.real(1e-12)?;
    Ok(KernelValue::plain(if n.rem_euclid(2) == 0 { v } else { -v }))
}

/// Exact `G_n(0, x)` for `n >= 1`: `C(n-x-1, -x)` for `x <= 0`, else 0.
pub fn g_schutz_at_zero_exact(n: i64, x: i64) -> Result<BigRational> {
    if n < 1 {
        return Err(Error::domain("exact G_n(0, x) implemented for n >= 1"));
    }
    if x > 0 {
        return Ok(BigRational::zero());
    }
    Ok(BigRational::from_integer(binomial_exact(n - x - 1, -x)))
}

/// Relative distance with an absolute floor, used by the oracle checks.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasep_clock(t: f64) -> Clock {
        Clock::new(t, 0.0).unwrap()
    }

    #[test]
    fn q_kernel_values() {
        assert_eq!(q_kernel(1, 0).to_f64(), 0.5);
        assert_eq!(q_kernel(0, 0).to_f64(), 0.0);
        assert_eq!(q_kernel(3, 0).to_f64(), 0.125);
    }

    #[test]
    fn q_pow_values() {
        assert_eq!(q_pow(0, 5, 5).to_f64(), 1.0);
        assert_eq!(q_pow(2, 3, 0).to_f64(), 0.25);
        assert_eq!(q_pow(2, 1, 0).to_f64(), 0.0);
        // brute-force convolution
        let conv: f64 = (1..=2).map(|z| q_kernel(3, z).to_f64() * q_kernel(z, 0).to_f64()).sum();
        assert_eq!(conv, 0.25);
    }

    #[test]
    fn q_inv_pow_values() {
        assert_eq!(q_inv_pow(1, 0, 1).to_f64(), 2.0);
        assert_eq!(q_inv_pow(1, 0, 0).to_f64(), -1.0);
        assert_eq!(q_inv_pow(0, 0, 0).to_f64(), 1.0);
        assert_eq!(q_inv_pow(2, 0, 1).to_f64(), -4.0);
        let conv: f64 = (-1..=3)
            .map(|z| q_inv_pow(1, 0, z).to_f64() * q_inv_pow(1, z, 1).to_f64())
            .sum();
        assert_eq!(conv, -4.0);
    }

    #[test]
    fn qbar_values() {
        assert_eq!(qbar(2, 3, 0).unwrap().to_f64(), 0.25);
        assert_eq!(qbar(1, 7, -2).unwrap().to_f64(), 2f64.powi(-9));
        assert_eq!(qbar(1, -2, 7).unwrap().to_f64(), 2f64.powi(9));
        assert_eq!(qbar(3, 0, 0).unwrap().to_f64(), 1.0);
        assert!(qbar(0, 0, 0).is_err());
        // t = 0 coefficient extraction of the S̄ kernel
        let s = sbar_kernel(0.0, 3, 0, 0, RateParams::TASEP).unwrap();
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn exact_versions_agree() {
        for n in 1..5u32 {
            for x in -6..6i64 {
                let a = q_pow_exact(n, x, 0);
                let f = q_pow(n, x, 0).to_f64();
                assert_eq!(crate::dyadic::rational_to_f64(&a), f);
                let b = qbar_exact(n, x, 0).unwrap();
                assert_eq!(crate::dyadic::rational_to_f64(&b), qbar(n, x, 0).unwrap().to_f64());
                let c = q_inv_pow_exact(n, 0, x);
                assert_eq!(crate::dyadic::rational_to_f64(&c), q_inv_pow(n, 0, x).to_f64());
            }
        }
    }

    #[test]
    fn nabla_examples() {
        let c = WindowFunction::from_fn(-3, 3, |_| 4.0);
        assert!(nabla(Direction::Minus, &c).unwrap().values.iter().all(|&v| v == 0.0));
        let id = WindowFunction::from_fn(-3, 3, |x| x as f64);
        let d = nabla(Direction::Minus, &id).unwrap();
        assert_eq!(d.lo, -2);
        assert!(d.values.iter().all(|&v| v == 1.0));
        let p = WindowFunction::from_fn(-2, 2, |x| 2f64.powi(x as i32));
        assert_eq!(nabla(Direction::Plus, &p).unwrap().get(0), Some(1.0));
        let one = WindowFunction::from_fn(0, 0, |_| 1.0);
        assert!(nabla(Direction::Minus, &one).is_err());
    }

    #[test]
    fn poisson_group_values() {
        let t = 1.7f64;
        assert!((poisson_group(t, 4, 4).to_f64() - (-t / 2.0).exp()).abs() < 1e-16);
        assert_eq!(poisson_group(0.0, 3, 3).to_f64(), 1.0);
        assert_eq!(poisson_group(0.0, 3, 2).to_f64(), 0.0);
        assert!((poisson_group(2.0, 1, 0).to_f64() - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn poisson_group_law() {
        let t = 1.3;
        for x in -2..3i64 {
            for z in -2..3i64 {
                let s: f64 = (z..=x)
                    .map(|y| poisson_group(t, x, y).to_f64() * poisson_group(-t, y, z).to_f64())
                    .sum();
                let want = if x == z { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_kernel_reduces_at_t_zero() {
        for n in 0..5u32 {
            for z1 in -3..4i64 {
                for z2 in -3..4i64 {
                    let s = s_kernel(0.0, n, z1, z2, RateParams::TASEP).unwrap().to_f64();
                    assert_eq!(s, q_inv_pow(n, z2, z1).to_f64());
                }
            }
        }
    }

    #[test]
    fn s_kernel_n_zero_is_poisson() {
        let t = 0.8;
        for d in 0..6i64 {
            let s = s_kernel(t, 0, 0, d, RateParams::TASEP).unwrap().to_f64();
            let p = poisson_group(t, d, 0).to_f64();
            assert!((s - p).abs() <= 1e-15 * p.abs());
        }
    }

    #[test]
    fn s_matches_quadrature() {
        for &(a, b) in &[(0.7, 0.0), (1.3, 0.4), (0.0, 0.9), (2.0, 2.0)] {
            let clock = Clock::new(a, b).unwrap();
            for n in 0..4u32 {
                for m in -4..8i64 {
                    let series = s_conj(clock, KernelFamily::General, n, m).unwrap();
                    let quad = s_conj_quadrature(clock, n, m).unwrap();
                    assert!(rel_diff(series, quad, 1e-300) < 1e-12 || (series - quad).abs() < 1e-15,
                        "α={a} β={b} n={n} m={m}: {series} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn sbar_matches_quadrature() {
        for &(a, b) in &[(0.7, 0.0), (1.3, 0.4), (0.0, 0.9), (2.0, 2.0)] {
            let clock = Clock::new(a, b).unwrap();
            for n in 1..5u32 {
                for d in -6..6i64 {
                    let series = sbar_conj(clock, KernelFamily::General, n, d).unwrap();
                    let quad = sbar_conj_quadrature(clock, n, d).unwrap();
                    assert!(rel_diff(series, quad, 1e-300) < 1e-12 || (series - quad).abs() < 1e-15,
                        "α={a} β={b} n={n} d={d}: {series} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn families_agree_without_pushes() {
        let clock = tasep_clock(1.1);
        for n in 1..5u32 {
            for d in -8..8i64 {
                let a = s_conj(clock, KernelFamily::Tasep, n, d).unwrap();
                let b = s_conj(clock, KernelFamily::General, n, d).unwrap();
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
                let a = sbar_conj(clock, KernelFamily::Tasep, n, d).unwrap();
                let b = sbar_conj(clock, KernelFamily::General, n, d).unwrap();
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
            }
        }
        assert!(s_conj(Clock::new(1.0, 1.0).unwrap(), KernelFamily::Tasep, 1, 0).is_err());
    }

    #[test]
    fn sbar_at_zero_is_qbar() {
        for n in 1..6u32 {
            for z1 in -4..4i64 {
                let a = sbar_kernel(0.0, n, z1, 0, RateParams::TASEP).unwrap().to_f64();
                assert_eq!(a, qbar(n, z1, 0).unwrap().to_f64());
            }
        }
    }

    #[test]
    fn sbar_semigroup_factorization() {
        let t = 0.9;
        for n in 1..4u32 {
            for z1 in -3..3i64 {
                for z2 in -3..3i64 {
                    let s: f64 = (z2..z2 + 60)
                        .map(|y| {
                            sbar_kernel(t, n, z1, y, RateParams::TASEP).unwrap().to_f64()
                                * poisson_group(t, y, z2).to_f64()
                        })
                        .sum();
                    let q = qbar(n, z1, z2).unwrap().to_f64();
                    assert!((s - q).abs() < 1e-12 * q.abs().max(1.0), "{n} {z1} {z2}: {s} vs {q}");
                }
            }
        }
    }

    #[test]
    fn kernel_time_derivatives() {
        // d/dt S(z1, ·) = -½ ∇⁻ S(z1, ·); d/dt S̄(·, z2) = +½ ∇⁻ S̄(·, z2) for TASEP
        let (t, h) = (0.8, 1e-4);
        let rates = RateParams::TASEP;
        for n in 1..4u32 {
            for z2 in -2..3i64 {
                let f = |tt: f64, y: i64| s_kernel(tt, n, 0, y, rates).unwrap().to_f64();
                let fd = (f(t + h, z2) - f(t - h, z2)) / (2.0 * h);
                let rhs = -0.5 * (f(t, z2) - f(t, z2 - 1));
                assert!((fd - rhs).abs() < 1e-7 * rhs.abs().max(1.0));
                let g = |tt: f64, x: i64| sbar_kernel(tt, n, x, z2, rates).unwrap().to_f64();
                let fd = (g(t + h, 0) - g(t - h, 0)) / (2.0 * h);
                let rhs = 0.5 * (g(t, 0) - g(t, -1));
                assert!((fd - rhs).abs() < 1e-7 * rhs.abs().max(1.0));
            }
        }
        // pure push: d/dt S(z1, ·) = 2∇⁺ S(z1, ·); d/dt S̄(·, z2) = -2∇⁺ S̄(·, z2)
        let rates = RateParams::new(0.0, 1.0).unwrap();
        for n in 1..4u32 {
            for z2 in -2..3i64 {
                let f = |tt: f64, y: i64| s_kernel(tt, n, 0, y, rates).unwrap().to_f64();
                let fd = (f(t + h, z2) - f(t - h, z2)) / (2.0 * h);
                let rhs = 2.0 * (f(t, z2 + 1) - f(t, z2));
                assert!((fd - rhs).abs() < 1e-7 * rhs.abs().max(1.0), "{fd} {rhs}");
                let g = |tt: f64, x: i64| sbar_kernel(tt, n, x, z2, rates).unwrap().to_f64();
                let fd = (g(t + h, 0) - g(t - h, 0)) / (2.0 * h);
                let rhs = -2.0 * (g(t, 1) - g(t, 0));
                assert!((fd - rhs).abs() < 1e-7 * rhs.abs().max(1.0), "{fd} {rhs}");
            }
        }
    }

    #[test]
    fn psi_examples() {
        let x0 = [3i64, 1, 0, -4];
        for n in 1..=4usize {
            for x in -6..6i64 {
                let v = psi(n, 0, x, 0.0, &x0).unwrap().to_f64();
                assert_eq!(v, if x == x0[n - 1] { 1.0 } else { 0.0 });
            }
        }
        let t = 1.4f64;
        for x in x0[2]..x0[2] + 6 {
            let d = x - x0[2];
            let want = (-t).exp() * t.powi(d as i32)
                / (2f64.powi(d as i32) * crate::special::factorial(d as u64));
            assert!((psi(3, 0, x, t, &x0).unwrap().to_f64() - want).abs() < 1e-15);
        }
        for n in 1..=4usize {
            for k in 0..n {
                for x in -6..6i64 {
                    let c = x0[n - k - 1];
                    let q = x + k as i64 - c;
                    let quad = psi_conj_quadrature(k as u32, q, t).unwrap();
                    let v = psi(n, k, x, t, &x0).unwrap().value;
                    assert!((v - quad).abs() <= 1e-12 * v.abs().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn g_schutz_examples() {
        let t = 1.5f64;
        for x in 0..8i64 {
            let want = (-t).exp() * t.powi(x as i32) / crate::special::factorial(x as u64);
            assert!((g_schutz(0, t, x).unwrap().to_f64() - want).abs() < 1e-13);
        }
        for x in -4..0i64 {
            assert!(g_schutz(0, t, x).unwrap().to_f64().abs() < 1e-13);
        }
        for n in 1..4i64 {
            for x in -5..4i64 {
                let exact = crate::dyadic::rational_to_f64(&g_schutz_at_zero_exact(n, x).unwrap());
                assert!((g_schutz(n, 0.0, x).unwrap().to_f64() - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rates_validation() {
        assert!(RateParams::new(0.0, 0.0).is_err());
        assert!(RateParams::new(-1.0, 1.0).is_err());
        assert_eq!(KernelFamily::for_rates(RateParams::TASEP), KernelFamily::Tasep);
    }
}
